// SPDX-License-Identifier: Apache-2.0

#include "trajattn/synth.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace ta::synth {

namespace {

// Value noise: random knot lattice, bilinear in between. Knot values are
// pushed toward 0/1 so the texture has full contrast but bounded slope.
std::vector<float> make_texture(uint32_t seed, int width, int height, int channels,
                                int lattice) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const int kx = width / lattice + 2;
    const int ky = height / lattice + 2;
    std::vector<double> knots(static_cast<size_t>(kx) * ky * channels);
    for (double& v : knots) {
        const double u = uni(rng);
        v = (u < 0.5) ? 0.2 * u : 1.0 - 0.2 * (1.0 - u);
    }
    auto knot = [&](int gy, int gx, int c) {
        return knots[(static_cast<size_t>(gy) * kx + gx) * channels + c];
    };

    std::vector<float> tex(static_cast<size_t>(height) * width * channels);
    for (int y = 0; y < height; ++y) {
        const int gy = y / lattice;
        const double ay = static_cast<double>(y % lattice) / lattice;
        for (int x = 0; x < width; ++x) {
            const int gx = x / lattice;
            const double ax = static_cast<double>(x % lattice) / lattice;
            for (int c = 0; c < channels; ++c) {
                const double top = (1 - ax) * knot(gy, gx, c) + ax * knot(gy, gx + 1, c);
                const double bot = (1 - ax) * knot(gy + 1, gx, c) + ax * knot(gy + 1, gx + 1, c);
                tex[(static_cast<size_t>(y) * width + x) * channels + c] =
                    static_cast<float>((1 - ay) * top + ay * bot);
            }
        }
    }
    return tex;
}

}  // namespace

SyntheticScene make_scene(uint32_t seed, int width, int height, int channels,
                          const SceneParams& params) {
    if (width <= 0 || height <= 0 || channels <= 0) {
        throw std::invalid_argument("make_scene: dimensions must be positive");
    }
    SyntheticScene scene;
    scene.width = width;
    scene.height = height;
    scene.channels = channels;
    scene.texture = make_texture(seed, width, height, channels, params.texture_lattice);
    scene.depth = geom::DepthMap(height, width);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            scene.depth.at(y, x) =
                params.base_depth + params.depth_amplitude *
                                        std::sin(2.0 * M_PI * x / width) *
                                        std::sin(2.0 * M_PI * y / height);
        }
    }
    scene.intrinsics = geom::make_default_intrinsics(width, height, static_cast<double>(width));
    return scene;
}

Volume<float> render_sequence(const SyntheticScene& scene,
                              const std::vector<geom::Extrinsics>& poses) {
    if (poses.empty()) {
        throw std::invalid_argument("render_sequence: pose list is empty");
    }
    const int h = scene.height;
    const int w = scene.width;
    const int c = scene.channels;
    const int frames = static_cast<int>(poses.size());
    const geom::Intrinsics& k = scene.intrinsics;

    Volume<float> out(frames, h, w, c + 1);
    std::vector<double> zbuf(static_cast<size_t>(h) * w);
    const geom::Extrinsics ref_inv = poses[0].inverse();

    for (int f = 0; f < frames; ++f) {
        std::fill(zbuf.begin(), zbuf.end(), std::numeric_limits<double>::infinity());
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const double d = scene.depth.at(y, x);
                const Eigen::Vector3d p_cam0(d * (x - k.cx) / k.fx, d * (y - k.cy) / k.fy, d);
                const Eigen::Vector3d p_world = ref_inv.apply(p_cam0);
                const Eigen::Vector3d p = poses[f].apply(p_world);
                if (p.z() <= geom::kBehindCameraEps) continue;
                const double u = k.fx * p.x() / p.z() + k.cx;
                const double v = k.fy * p.y() / p.z() + k.cy;
                const int tx = attn::round_half_away(u);
                const int ty = attn::round_half_away(v);
                if (tx < 0 || tx >= w || ty < 0 || ty >= h) continue;
                const size_t cell = static_cast<size_t>(ty) * w + tx;
                if (p.z() >= zbuf[cell]) continue;
                zbuf[cell] = p.z();
                for (int ch = 0; ch < c; ++ch) {
                    out.at(f, ty, tx, ch) = scene.tex(y, x, ch);
                }
                out.at(f, ty, tx, c) = 1.0f;
            }
        }
    }
    return out;
}

double check_trajectory_constancy(const Volume<float>& volume, const traj::TrajectorySet& ts) {
    if (ts.frames != volume.frames) {
        throw std::invalid_argument("check_trajectory_constancy: frame count mismatch");
    }
    if (volume.channels < 2) {
        throw std::invalid_argument("check_trajectory_constancy: volume lacks a sentinel channel");
    }
    const int c = volume.channels - 1;  // last channel is the hit flag
    double worst = 0.0;
    std::vector<float> ref(c);
    for (int l = 0; l < ts.count; ++l) {
        if (!ts.valid(0, l)) continue;
        const int rx = std::clamp(attn::round_half_away(ts.x(l, 0)), 0, volume.width - 1);
        const int ry = std::clamp(attn::round_half_away(ts.y(l, 0)), 0, volume.height - 1);
        if (volume.at(0, ry, rx, c) < 0.5f) continue;  // frame-0 sample unhit
        for (int ch = 0; ch < c; ++ch) ref[ch] = volume.at(0, ry, rx, ch);

        for (int f = 1; f < ts.frames; ++f) {
            if (!ts.valid(f, l)) continue;
            const int gx = std::clamp(attn::round_half_away(ts.x(l, f)), 0, volume.width - 1);
            const int gy = std::clamp(attn::round_half_away(ts.y(l, f)), 0, volume.height - 1);
            if (volume.at(f, gy, gx, c) < 0.5f) continue;
            for (int ch = 0; ch < c; ++ch) {
                worst = std::max(worst,
                                 std::abs(static_cast<double>(volume.at(f, gy, gx, ch)) - ref[ch]));
            }
        }
    }
    return worst;
}

double texture_quantization_bound(const SyntheticScene& scene, int radius) {
    double worst = 0.0;
    for (int y = 0; y < scene.height; ++y) {
        for (int x = 0; x < scene.width; ++x) {
            for (int dy = -radius; dy <= radius; ++dy) {
                for (int dx = -radius; dx <= radius; ++dx) {
                    const int ny = y + dy;
                    const int nx = x + dx;
                    if (ny < 0 || ny >= scene.height || nx < 0 || nx >= scene.width) continue;
                    for (int c = 0; c < scene.channels; ++c) {
                        worst = std::max(worst, std::abs(static_cast<double>(scene.tex(y, x, c)) -
                                                         scene.tex(ny, nx, c)));
                    }
                }
            }
        }
    }
    return worst;
}

std::vector<geom::Extrinsics> camera_path(PathKind kind, int frames, double magnitude,
                                          double scene_distance) {
    if (frames < 1) {
        throw std::invalid_argument("camera_path: frames must be >= 1");
    }
    std::vector<geom::Extrinsics> poses(frames);
    const double step = frames > 1 ? magnitude / (frames - 1) : 0.0;
    for (int f = 0; f < frames; ++f) {
        const double s = step * f;
        geom::Extrinsics& e = poses[f];
        switch (kind) {
            case PathKind::Pan:
                e.translation = Eigen::Vector3d(-s, 0, 0);  // camera center moves +x
                break;
            case PathKind::ZoomIn:
                e.translation = Eigen::Vector3d(0, 0, -s);  // center moves toward the scene
                break;
            case PathKind::ZoomOut:
                e.translation = Eigen::Vector3d(0, 0, s);
                break;
            case PathKind::Orbit: {
                // Rigid rotation of the camera about the vertical axis through
                // the scene pivot (0, 0, scene_distance).
                const Eigen::Matrix3d rot =
                    Eigen::AngleAxisd(s, Eigen::Vector3d::UnitY()).toRotationMatrix();
                const Eigen::Vector3d pivot(0, 0, scene_distance);
                const Eigen::Vector3d center = pivot + rot * (-pivot);
                e.rotation = rot.transpose();
                e.translation = -(e.rotation * center);
                break;
            }
            case PathKind::Roll:
                e.rotation = Eigen::AngleAxisd(s, Eigen::Vector3d::UnitZ()).toRotationMatrix();
                break;
        }
    }
    poses[0] = geom::Extrinsics::identity();  // frame 0 exactly identity
    return poses;
}

// ---------------------------------------------------------------------------
// Brute-force references
// ---------------------------------------------------------------------------
namespace oracle {

namespace {

int naive_round(double v) {
    // Half away from zero, spelled out.
    if (v >= 0.0) return static_cast<int>(v + 0.5);
    return -static_cast<int>(-v + 0.5);
}

int naive_clamp(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

}  // namespace

template <typename T>
TrajFeatures<T> sample_reference(const Volume<T>& z, const traj::TrajectorySet& ts) {
    TrajFeatures<T> out(z.frames, ts.count, z.channels);
    out.mask = ts.mask;
    for (int l = 0; l < ts.count; ++l) {
        for (int f = 0; f < z.frames; ++f) {
            for (int c = 0; c < z.channels; ++c) {
                T value = T(0);
                if (ts.valid(f, l)) {
                    const int gx = naive_clamp(naive_round(ts.x(l, f)), 0, z.width - 1);
                    const int gy = naive_clamp(naive_round(ts.y(l, f)), 0, z.height - 1);
                    value = z.data[((static_cast<size_t>(f) * z.height + gy) * z.width + gx) *
                                       z.channels + c];
                }
                out.data[(static_cast<size_t>(f) * ts.count + l) * z.channels + c] = value;
            }
        }
    }
    return out;
}

template <typename T>
attn::BackProjection<T> back_project_reference(const TrajFeatures<T>& zt,
                                               const traj::TrajectorySet& ts,
                                               int height, int width) {
    attn::BackProjection<T> out;
    out.values = Volume<T>(zt.frames, height, width, zt.channels);
    out.counts.assign(static_cast<size_t>(zt.frames) * height * width, 0);
    std::vector<double> sums(out.values.data.size(), 0.0);
    for (int f = 0; f < zt.frames; ++f) {
        for (int l = 0; l < ts.count; ++l) {
            if (!ts.valid(f, l)) continue;
            const int gx = naive_clamp(naive_round(ts.x(l, f)), 0, width - 1);
            const int gy = naive_clamp(naive_round(ts.y(l, f)), 0, height - 1);
            for (int c = 0; c < zt.channels; ++c) {
                sums[out.values.index(f, gy, gx, c)] +=
                    static_cast<double>(zt.data[(static_cast<size_t>(f) * ts.count + l) * zt.channels + c]);
            }
            out.counts[(static_cast<size_t>(f) * height + gy) * width + gx] += 1;
        }
    }
    for (int f = 0; f < zt.frames; ++f) {
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) {
                const int u = out.counts[(static_cast<size_t>(f) * height + y) * width + x];
                if (u == 0) continue;
                for (int c = 0; c < zt.channels; ++c) {
                    out.values.at(f, y, x, c) =
                        static_cast<T>(sums[out.values.index(f, y, x, c)] / u);
                }
            }
        }
    }
    return out;
}

template <typename T>
TrajFeatures<T> frame_attention_reference(const TrajFeatures<T>& q, const TrajFeatures<T>& k,
                                          const TrajFeatures<T>& v, int heads,
                                          const uint8_t* key_mask) {
    const int frames = q.frames;
    const int n_tok = q.count;
    const int c = q.channels;
    const int hd = c / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
    TrajFeatures<T> out(frames, n_tok, c);

    auto masked = [&](int f, int n) {
        return key_mask && key_mask[static_cast<size_t>(f) * n_tok + n] == 0;
    };

    for (int n = 0; n < n_tok; ++n) {
        for (int h = 0; h < heads; ++h) {
            for (int i = 0; i < frames; ++i) {
                // Unnormalized weights; no max-shift, fine at toy scale.
                std::vector<double> wgt(frames, 0.0);
                double denom = 0.0;
                for (int j = 0; j < frames; ++j) {
                    if (masked(j, n)) continue;
                    double dot = 0.0;
                    for (int d = 0; d < hd; ++d) {
                        dot += static_cast<double>(q.at(i, n, h * hd + d)) *
                               static_cast<double>(k.at(j, n, h * hd + d));
                    }
                    wgt[j] = std::exp(scale * dot);
                    denom += wgt[j];
                }
                if (denom == 0.0) continue;
                for (int d = 0; d < hd; ++d) {
                    double acc = 0.0;
                    for (int j = 0; j < frames; ++j) {
                        acc += (wgt[j] / denom) * static_cast<double>(v.at(j, n, h * hd + d));
                    }
                    out.at(i, n, h * hd + d) = static_cast<T>(acc);
                }
            }
        }
    }
    return out;
}

geom::TranslationFrame pixel_translation_reference(const geom::DepthMap& depth,
                                                   const geom::Intrinsics& k,
                                                   const geom::Extrinsics& e1,
                                                   const geom::Extrinsics& e2) {
    geom::TranslationFrame out(depth.height, depth.width);
    const Eigen::Matrix4d rel = e2.matrix() * e1.matrix().inverse();
    const Eigen::Matrix3d k_inv = k.matrix().inverse();
    for (int y = 0; y < depth.height; ++y) {
        for (int x = 0; x < depth.width; ++x) {
            const Eigen::Vector3d ray = k_inv * Eigen::Vector3d(x, y, 1.0);
            const Eigen::Vector3d p = depth.at(y, x) * ray;
            const Eigen::Vector4d q = rel * Eigen::Vector4d(p.x(), p.y(), p.z(), 1.0);
            const Eigen::Vector3d proj = k.matrix() * q.head<3>();
            const size_t i = static_cast<size_t>(y) * depth.width + x;
            if (q.z() <= geom::kBehindCameraEps) {
                out.valid[i] = 0;
                continue;
            }
            out.vectors[i * 2] = proj.x() / proj.z() - x;
            out.vectors[i * 2 + 1] = proj.y() / proj.z() - y;
        }
    }
    return out;
}

bool has_reference(std::string_view op_name) {
    return op_name == "sample_along_trajectories" || op_name == "back_project" ||
           op_name == "frame_attention" || op_name == "pixel_translation";
}

template TrajFeatures<float> sample_reference(const Volume<float>&, const traj::TrajectorySet&);
template TrajFeatures<double> sample_reference(const Volume<double>&, const traj::TrajectorySet&);
template attn::BackProjection<float> back_project_reference(const TrajFeatures<float>&,
                                                            const traj::TrajectorySet&, int, int);
template attn::BackProjection<double> back_project_reference(const TrajFeatures<double>&,
                                                             const traj::TrajectorySet&, int, int);
template TrajFeatures<float> frame_attention_reference(const TrajFeatures<float>&,
                                                       const TrajFeatures<float>&,
                                                       const TrajFeatures<float>&, int,
                                                       const uint8_t*);
template TrajFeatures<double> frame_attention_reference(const TrajFeatures<double>&,
                                                        const TrajFeatures<double>&,
                                                        const TrajFeatures<double>&, int,
                                                        const uint8_t*);

}  // namespace oracle

}  // namespace ta::synth
