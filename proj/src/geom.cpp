// SPDX-License-Identifier: Apache-2.0

#include "trajattn/geom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <thread>

namespace ta::geom {

Extrinsics compose(const Extrinsics& a, const Extrinsics& b) {
    Extrinsics out;
    out.rotation = a.rotation * b.rotation;
    out.translation = a.rotation * b.translation + a.translation;
    return out;
}

void validate(const Intrinsics& k) {
    if (!(k.fx > 0.0) || !(k.fy > 0.0)) {
        throw std::invalid_argument("Intrinsics: focal lengths must be positive");
    }
    if (!std::isfinite(k.cx) || !std::isfinite(k.cy)) {
        throw std::invalid_argument("Intrinsics: principal point must be finite");
    }
}

void validate(const Extrinsics& e) {
    const Eigen::Matrix3d gram = e.rotation.transpose() * e.rotation;
    const double dev = (gram - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
    if (!(dev <= 1e-6)) {
        throw std::invalid_argument("Extrinsics: rotation is not orthonormal");
    }
    if (!(e.rotation.determinant() > 0.0)) {
        throw std::invalid_argument("Extrinsics: rotation determinant must be +1");
    }
    if (!e.translation.allFinite()) {
        throw std::invalid_argument("Extrinsics: translation must be finite");
    }
}

void validate(const DepthMap& d) {
    if (d.height <= 0 || d.width <= 0) {
        throw std::invalid_argument("DepthMap: dimensions must be positive");
    }
    if (d.values.size() != static_cast<size_t>(d.height) * d.width) {
        throw std::invalid_argument("DepthMap: value count does not match dimensions");
    }
    for (double v : d.values) {
        if (!std::isfinite(v) || !(v > 0.0)) {
            throw std::invalid_argument("DepthMap: values must be finite and > 0");
        }
    }
}

PixelGrid make_pixel_grid(int height, int width) {
    if (height <= 0 || width <= 0) {
        throw std::invalid_argument("make_pixel_grid: dimensions must be positive");
    }
    PixelGrid g;
    g.height = height;
    g.width = width;
    g.coords.resize(static_cast<size_t>(height) * width * 2);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            g.coords[(static_cast<size_t>(y) * width + x) * 2] = x;
            g.coords[(static_cast<size_t>(y) * width + x) * 2 + 1] = y;
        }
    }
    return g;
}

Intrinsics make_default_intrinsics(double width, double height, double focal) {
    if (!(width > 0.0) || !(height > 0.0) || !(focal > 0.0)) {
        throw std::invalid_argument("make_default_intrinsics: width, height, focal must be > 0");
    }
    return Intrinsics{focal, focal, width / 2.0, height / 2.0};
}

Extrinsics relative_transform(const Extrinsics& e1, const Extrinsics& e2) {
    return compose(e2, e1.inverse());
}

int thread_budget() {
    int hw = static_cast<int>(std::thread::hardware_concurrency());
    if (hw < 1) hw = 1;
    if (const char* env = std::getenv("TA_THREADS")) {
        const long cap = std::strtol(env, nullptr, 10);
        if (cap >= 1 && cap < hw) hw = static_cast<int>(cap);
    }
    return hw;
}

TranslationFrame pixel_translation(const DepthMap& depth, const Intrinsics& k,
                                   const Extrinsics& e1, const Extrinsics& e2) {
    validate(depth);
    validate(k);
    validate(e1);
    validate(e2);

    TranslationFrame out(depth.height, depth.width);
    if (e1.bitwise_equal(e2)) {
        return out;  // zero-motion identity, exact
    }

    const Extrinsics rel = relative_transform(e1, e2);
    const Eigen::Matrix3d r = rel.rotation;
    const Eigen::Vector3d t = rel.translation;

    auto run_rows = [&](int y0, int y1) {
        for (int y = y0; y < y1; ++y) {
            for (int x = 0; x < depth.width; ++x) {
                const double d = depth.at(y, x);
                const Eigen::Vector3d p(d * (x - k.cx) / k.fx, d * (y - k.cy) / k.fy, d);
                const Eigen::Vector3d q = r * p + t;
                const size_t i = static_cast<size_t>(y) * depth.width + x;
                if (q.z() <= kBehindCameraEps) {
                    out.valid[i] = 0;
                    continue;
                }
                const double u = k.fx * q.x() / q.z() + k.cx;
                const double v = k.fy * q.y() / q.z() + k.cy;
                out.vectors[i * 2] = u - x;
                out.vectors[i * 2 + 1] = v - y;
            }
        }
    };

    const int n_threads = std::min(thread_budget(), depth.height);
    if (n_threads <= 1) {
        run_rows(0, depth.height);
    } else {
        std::vector<std::thread> pool;
        const int chunk = (depth.height + n_threads - 1) / n_threads;
        for (int t_id = 0; t_id < n_threads; ++t_id) {
            const int y0 = t_id * chunk;
            const int y1 = std::min(depth.height, y0 + chunk);
            if (y0 < y1) pool.emplace_back(run_rows, y0, y1);
        }
        for (auto& th : pool) th.join();
    }
    return out;
}

}  // namespace ta::geom
