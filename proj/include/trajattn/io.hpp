// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "trajattn/attn.hpp"
#include "trajattn/geom.hpp"
#include "trajattn/tensor.hpp"
#include "trajattn/trajgen.hpp"

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace ta::io {

/// Malformed or truncated file; `offset` is the byte position of the problem.
struct io_error : std::runtime_error {
    size_t offset;
    io_error(const std::string& msg, size_t off)
        : std::runtime_error(msg + " (at byte offset " + std::to_string(off) + ")"),
          offset(off) {}
};

struct PoseFile {
    geom::Intrinsics intrinsics;
    std::vector<geom::Extrinsics> frames;
};

// All binary formats are little-endian with a 4-byte magic:
//   TADM depth:      u32 height, u32 width, H*W f32 row-major
//   TATK tracks:     u32 F, u32 L, F*L x (f32 x, f32 y, u8 visible), frame-major
//   TATR trajectory: u32 L, u32 F, L*F x (f32 x, f32 y, u8 valid)
//   TAFV volume:     u32 F, H, W, C, then f32 data frame-major
//   TAAW weights:    u32 C, u32 heads, wq wk wv wo each C*C f32 row-major

geom::DepthMap read_depth(const std::string& path);
void write_depth(const std::string& path, const geom::DepthMap& d);

traj::PointTracks read_tracks(const std::string& path);
void write_tracks(const std::string& path, const traj::PointTracks& t);

traj::TrajectorySet read_trajectories(const std::string& path);
void write_trajectories(const std::string& path, const traj::TrajectorySet& ts);

Volume<float> read_volume(const std::string& path);
void write_volume(const std::string& path, const Volume<float>& v);

attn::Weights<float> read_weights(const std::string& path);
void write_weights(const std::string& path, const attn::Weights<float>& w);

PoseFile read_poses(const std::string& path);
void write_poses(const std::string& path, const PoseFile& p);

}  // namespace ta::io
