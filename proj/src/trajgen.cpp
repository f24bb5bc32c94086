// SPDX-License-Identifier: Apache-2.0

#include "trajattn/trajgen.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ta::traj {

namespace {

bool in_bounds(double x, double y, int width, int height) {
    return x >= 0.0 && x < width && y >= 0.0 && y < height;
}

// Bilinear sample of a translation frame at a fractional position.
// Returns false if the position leaves the field or touches an invalid cell.
bool sample_field(const geom::TranslationFrame& field, double px, double py,
                  double& dx, double& dy) {
    if (!(px >= 0.0 && px <= field.width - 1 && py >= 0.0 && py <= field.height - 1)) {
        return false;
    }
    const int x0 = std::min(static_cast<int>(std::floor(px)), field.width - 2 >= 0 ? field.width - 2 : 0);
    const int y0 = std::min(static_cast<int>(std::floor(py)), field.height - 2 >= 0 ? field.height - 2 : 0);
    const int x1 = std::min(x0 + 1, field.width - 1);
    const int y1 = std::min(y0 + 1, field.height - 1);
    const double ax = px - x0;
    const double ay = py - y0;
    if (!field.ok(y0, x0) || !field.ok(y0, x1) || !field.ok(y1, x0) || !field.ok(y1, x1)) {
        return false;
    }
    const double top_x = (1.0 - ax) * field.dx(y0, x0) + ax * field.dx(y0, x1);
    const double bot_x = (1.0 - ax) * field.dx(y1, x0) + ax * field.dx(y1, x1);
    const double top_y = (1.0 - ax) * field.dy(y0, x0) + ax * field.dy(y0, x1);
    const double bot_y = (1.0 - ax) * field.dy(y1, x0) + ax * field.dy(y1, x1);
    dx = (1.0 - ay) * top_x + ay * bot_x;
    dy = (1.0 - ay) * top_y + ay * bot_y;
    return true;
}

}  // namespace

TrajectorySet extract_from_image(const geom::DepthMap& depth, const geom::Intrinsics& k,
                                 const std::vector<geom::Extrinsics>& poses) {
    if (poses.empty()) {
        throw std::invalid_argument("extract_from_image: pose list is empty");
    }
    geom::validate(depth);

    const int h = depth.height;
    const int w = depth.width;
    const int frames = static_cast<int>(poses.size());
    TrajectorySet ts(h * w, frames);
    ts.width = w;
    ts.height = h;

    for (int f = 0; f < frames; ++f) {
        const geom::TranslationFrame field =
            geom::pixel_translation(depth, k, poses[0], poses[f]);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const int l = y * w + x;
                if (f == 0) {
                    // Frame-0 anchoring: grid coordinate, bit-exact.
                    ts.set(l, 0, static_cast<float>(x), static_cast<float>(y));
                    ts.set_valid(0, l, true);
                    continue;
                }
                const double tx = x + field.dx(y, x);
                const double ty = y + field.dy(y, x);
                ts.set(l, f, static_cast<float>(tx), static_cast<float>(ty));
                const bool ok = field.ok(y, x) &&
                                in_bounds(ts.x(l, f), ts.y(l, f), w, h);
                ts.set_valid(f, l, ok);
            }
        }
    }
    return ts;
}

TrajectorySet extract_from_video(const PointTracks& tracks,
                                 const std::vector<geom::DepthMap>& depths,
                                 const geom::Intrinsics& k,
                                 const std::vector<geom::Extrinsics>& poses) {
    const int frames = tracks.frames;
    if (frames <= 0 || tracks.count <= 0) {
        throw std::invalid_argument("extract_from_video: empty tracks");
    }
    if (static_cast<int>(depths.size()) != frames ||
        static_cast<int>(poses.size()) != frames) {
        throw std::invalid_argument(
            "extract_from_video: frame count mismatch (tracks F=" + std::to_string(frames) +
            ", depths=" + std::to_string(depths.size()) +
            ", poses=" + std::to_string(poses.size()) + ")");
    }

    const int l_count = tracks.count;
    TrajectorySet ts(l_count, frames);
    ts.width = depths[0].width;
    ts.height = depths[0].height;

    for (int f = 0; f < frames; ++f) {
        const geom::TranslationFrame field =
            geom::pixel_translation(depths[f], k, poses[0], poses[f]);
        for (int l = 0; l < l_count; ++l) {
            const double px = tracks.x(f, l);
            const double py = tracks.y(f, l);
            double dx = 0.0, dy = 0.0;
            const bool sampled = sample_field(field, px, py, dx, dy);
            const float tx = static_cast<float>(px + dx);
            const float ty = static_cast<float>(py + dy);
            ts.set(l, f, tx, ty);
            const bool visible = tracks.visible[static_cast<size_t>(f) * l_count + l] != 0;
            ts.set_valid(f, l, visible && sampled && in_bounds(tx, ty, ts.width, ts.height));
        }
    }
    return ts;
}

TrajectorySet sparsify(const TrajectorySet& ts, int stride,
                       const std::optional<RegionMask>& region) {
    if (stride < 1) {
        throw std::invalid_argument("sparsify: stride must be >= 1");
    }
    std::vector<int> keep;
    keep.reserve(ts.count);
    for (int l = 0; l < ts.count; ++l) {
        const long gx = std::lround(ts.x(l, 0));
        const long gy = std::lround(ts.y(l, 0));
        if (gx % stride != 0 || gy % stride != 0) continue;
        if (region && !region->inside(static_cast<int>(gy), static_cast<int>(gx))) continue;
        keep.push_back(l);
    }

    TrajectorySet out;
    out.count = static_cast<int>(keep.size());
    out.frames = ts.frames;
    out.width = ts.width;
    out.height = ts.height;
    out.coords.resize(static_cast<size_t>(out.count) * ts.frames * 2);
    out.mask.resize(static_cast<size_t>(ts.frames) * out.count);
    for (int j = 0; j < out.count; ++j) {
        const int l = keep[j];
        for (int f = 0; f < ts.frames; ++f) {
            out.coords[(static_cast<size_t>(j) * ts.frames + f) * 2] = ts.x(l, f);
            out.coords[(static_cast<size_t>(j) * ts.frames + f) * 2 + 1] = ts.y(l, f);
            out.mask[static_cast<size_t>(f) * out.count + j] = ts.mask[static_cast<size_t>(f) * ts.count + l];
        }
    }
    return out;
}

TrajectorySet rescale_to_latent(const TrajectorySet& ts, double scale) {
    if (!(scale > 0.0)) {
        throw std::invalid_argument("rescale_to_latent: scale must be > 0");
    }
    if (ts.width <= 0 || ts.height <= 0) {
        throw std::invalid_argument("rescale_to_latent: trajectory set has no pixel bounds");
    }
    const int stride = std::max(1L, std::lround(1.0 / scale));
    TrajectorySet out = sparsify(ts, stride);
    const int lat_w = static_cast<int>(std::floor(ts.width * scale));
    const int lat_h = static_cast<int>(std::floor(ts.height * scale));
    for (int l = 0; l < out.count; ++l) {
        for (int f = 0; f < out.frames; ++f) {
            const float sx = static_cast<float>(out.x(l, f) * scale);
            const float sy = static_cast<float>(out.y(l, f) * scale);
            out.set(l, f, sx, sy);
            if (out.valid(f, l) && !(sx >= 0.0f && sx < lat_w && sy >= 0.0f && sy < lat_h)) {
                out.set_valid(f, l, false);
            }
        }
    }
    out.width = lat_w;
    out.height = lat_h;
    return out;
}

}  // namespace ta::traj
