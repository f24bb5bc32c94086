// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "trajattn/geom.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace ta::traj {

/// L per-frame 2D coordinate paths plus a per-frame validity mask.
/// coords layout is (l*frames + f)*2 + {x, y}; mask layout is f*count + l.
/// width/height record the bounds the masks were evaluated against
/// (0 when unknown, e.g. freshly loaded from file).
struct TrajectorySet {
    int count = 0;
    int frames = 0;
    int width = 0;
    int height = 0;
    std::vector<float> coords;
    std::vector<uint8_t> mask;

    TrajectorySet() = default;
    TrajectorySet(int l, int f)
        : count(l), frames(f), coords(static_cast<size_t>(l) * f * 2, 0.0f),
          mask(static_cast<size_t>(f) * l, 1) {}

    float x(int l, int f) const { return coords[(static_cast<size_t>(l) * frames + f) * 2]; }
    float y(int l, int f) const { return coords[(static_cast<size_t>(l) * frames + f) * 2 + 1]; }
    void set(int l, int f, float px, float py) {
        coords[(static_cast<size_t>(l) * frames + f) * 2] = px;
        coords[(static_cast<size_t>(l) * frames + f) * 2 + 1] = py;
    }
    bool valid(int f, int l) const { return mask[static_cast<size_t>(f) * count + l] != 0; }
    void set_valid(int f, int l, bool v) {
        mask[static_cast<size_t>(f) * count + l] = v ? 1 : 0;
    }
};

/// Tracker output: per-frame positions and visibility flags, layout (f*count + l).
struct PointTracks {
    int frames = 0;
    int count = 0;
    std::vector<float> positions;  // F*L*2, (x, y)
    std::vector<uint8_t> visible;  // F*L

    PointTracks() = default;
    PointTracks(int f, int l)
        : frames(f), count(l), positions(static_cast<size_t>(f) * l * 2, 0.0f),
          visible(static_cast<size_t>(f) * l, 1) {}

    float x(int f, int l) const { return positions[(static_cast<size_t>(f) * count + l) * 2]; }
    float y(int f, int l) const { return positions[(static_cast<size_t>(f) * count + l) * 2 + 1]; }
    void set(int f, int l, float px, float py) {
        positions[(static_cast<size_t>(f) * count + l) * 2] = px;
        positions[(static_cast<size_t>(f) * count + l) * 2 + 1] = py;
    }
};

/// Spatial keep-mask at pixel resolution for sparsify.
struct RegionMask {
    int height = 0;
    int width = 0;
    std::vector<uint8_t> keep;  // H*W

    bool inside(int y, int x) const {
        if (y < 0 || y >= height || x < 0 || x >= width) return false;
        return keep[static_cast<size_t>(y) * width + x] != 0;
    }
};

/// One trajectory per source pixel of the reference view poses[0], displaced
/// frame by frame through the depth-induced translation field.
TrajectorySet extract_from_image(const geom::DepthMap& depth, const geom::Intrinsics& k,
                                 const std::vector<geom::Extrinsics>& poses);

/// Combines tracker motion with camera motion: samples the per-frame
/// translation field (bilinear) at each track position and adds it.
TrajectorySet extract_from_video(const PointTracks& tracks,
                                 const std::vector<geom::DepthMap>& depths,
                                 const geom::Intrinsics& k,
                                 const std::vector<geom::Extrinsics>& poses);

/// Keeps trajectories whose frame-0 coordinate lies on the stride grid and,
/// if given, inside the region. Survivor masks are copied verbatim.
TrajectorySet sparsify(const TrajectorySet& ts, int stride,
                       const std::optional<RegionMask>& region = std::nullopt);

/// Sparsifies to the latent grid density (stride = round(1/scale)), scales
/// coordinates, and re-evaluates masks against floor(bounds * scale).
TrajectorySet rescale_to_latent(const TrajectorySet& ts, double scale);

}  // namespace ta::traj
