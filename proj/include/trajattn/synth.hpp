// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "trajattn/attn.hpp"
#include "trajattn/geom.hpp"
#include "trajattn/tensor.hpp"
#include "trajattn/trajgen.hpp"

#include <cstdint>
#include <string_view>
#include <vector>

namespace ta::synth {

/// Synthetic scene with exact analytic depth and a smooth seeded texture.
struct SyntheticScene {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<float> texture;  // H*W*C
    geom::DepthMap depth;
    geom::Intrinsics intrinsics;

    float tex(int y, int x, int c) const {
        return texture[(static_cast<size_t>(y) * width + x) * channels + c];
    }
};

struct SceneParams {
    double base_depth = 2.0;       // meters
    double depth_amplitude = 0.25; // meters
    int texture_lattice = 32;      // value-noise knot spacing in pixels
};

/// Deterministic scene: value-noise texture from the seed and depth
/// d(x, y) = d0 + a sin(2 pi x / W) sin(2 pi y / H).
SyntheticScene make_scene(uint32_t seed, int width, int height, int channels,
                          const SceneParams& params = {});

/// Forward-splat rendering with a z-buffer. Output has channels + 1 channels;
/// the last channel is 1 where a scene point landed and 0 for unhit pixels.
Volume<float> render_sequence(const SyntheticScene& scene,
                              const std::vector<geom::Extrinsics>& poses);

/// Max channel-wise deviation of gathered features (nearest cell) from each
/// trajectory's frame-0 value. Entries that are masked out, unhit, or whose
/// frame-0 sample is unhit are skipped. The volume's last channel is read as
/// the hit flag.
double check_trajectory_constancy(const Volume<float>& volume, const traj::TrajectorySet& ts);

/// Largest texture difference between pixels within Chebyshev distance
/// `radius` - the scene-derived quantization bound for constancy checks.
double texture_quantization_bound(const SyntheticScene& scene, int radius = 2);

enum class PathKind { Pan, ZoomIn, ZoomOut, Orbit, Roll };

/// World->camera pose sequences for the standard motion families.
/// `magnitude` is total meters of travel (pan/zoom) or total radians
/// (orbit/roll) across the sequence; frame 0 is always identity.
std::vector<geom::Extrinsics> camera_path(PathKind kind, int frames, double magnitude,
                                          double scene_distance = 2.0);

// ---------------------------------------------------------------------------
// Brute-force references (oracles). Deliberately plain scalar loops,
// independent of the optimized implementations they check.
// ---------------------------------------------------------------------------
namespace oracle {

template <typename T>
TrajFeatures<T> sample_reference(const Volume<T>& z, const traj::TrajectorySet& ts);

template <typename T>
attn::BackProjection<T> back_project_reference(const TrajFeatures<T>& zt,
                                               const traj::TrajectorySet& ts,
                                               int height, int width);

template <typename T>
TrajFeatures<T> frame_attention_reference(const TrajFeatures<T>& q, const TrajFeatures<T>& k,
                                          const TrajFeatures<T>& v, int heads,
                                          const uint8_t* key_mask = nullptr);

/// Pixel translation through the full 4x4 homogeneous matrix route.
geom::TranslationFrame pixel_translation_reference(const geom::DepthMap& depth,
                                                   const geom::Intrinsics& k,
                                                   const geom::Extrinsics& e1,
                                                   const geom::Extrinsics& e2);

/// True if `op_name` names one of the reference implementations above.
bool has_reference(std::string_view op_name);

}  // namespace oracle

}  // namespace ta::synth
