// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>
#include <vector>

namespace ta::geom {

/// Pinhole intrinsics in pixel units.
struct Intrinsics {
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.0;
    double cy = 0.0;

    Eigen::Matrix3d matrix() const {
        Eigen::Matrix3d k;
        k << fx, 0, cx, 0, fy, cy, 0, 0, 1;
        return k;
    }
};

/// World -> camera rigid transform, E = [R|t].
struct Extrinsics {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();

    Eigen::Matrix4d matrix() const {
        Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
        m.block<3, 3>(0, 0) = rotation;
        m.block<3, 1>(0, 3) = translation;
        return m;
    }

    Eigen::Vector3d apply(const Eigen::Vector3d& p) const {
        return rotation * p + translation;
    }

    Extrinsics inverse() const {
        Extrinsics inv;
        inv.rotation = rotation.transpose();
        inv.translation = -(rotation.transpose() * translation);
        return inv;
    }

    static Extrinsics identity() { return Extrinsics{}; }

    bool bitwise_equal(const Extrinsics& o) const {
        return rotation == o.rotation && translation == o.translation;
    }
};

/// Composition: (a * b).apply(p) == a.apply(b.apply(p)).
Extrinsics compose(const Extrinsics& a, const Extrinsics& b);

/// Checks fx, fy > 0.
void validate(const Intrinsics& k);

/// Checks rotation orthonormality (inf-norm of R^T R - I <= 1e-6, det > 0).
void validate(const Extrinsics& e);

struct DepthMap {
    int height = 0;
    int width = 0;
    std::vector<double> values;  // row-major, meters

    DepthMap() = default;
    DepthMap(int h, int w) : height(h), width(w), values(static_cast<size_t>(h) * w, 1.0) {}
    double at(int y, int x) const { return values[static_cast<size_t>(y) * width + x]; }
    double& at(int y, int x) { return values[static_cast<size_t>(y) * width + x]; }
};

/// Checks positive dims and strictly positive, finite depth values.
void validate(const DepthMap& d);

/// Per-pixel 2D displacement from a source view to a target view, one frame.
/// valid[i] = 0 marks pixels whose transformed depth fell below the
/// behind-camera threshold; their displacement entries are zero.
struct TranslationFrame {
    int height = 0;
    int width = 0;
    std::vector<double> vectors;  // H*W*2, (dx, dy)
    std::vector<uint8_t> valid;   // H*W

    TranslationFrame() = default;
    TranslationFrame(int h, int w)
        : height(h), width(w), vectors(static_cast<size_t>(h) * w * 2, 0.0),
          valid(static_cast<size_t>(h) * w, 1) {}

    double dx(int y, int x) const { return vectors[(static_cast<size_t>(y) * width + x) * 2]; }
    double dy(int y, int x) const { return vectors[(static_cast<size_t>(y) * width + x) * 2 + 1]; }
    bool ok(int y, int x) const { return valid[static_cast<size_t>(y) * width + x] != 0; }
};

using TranslationField = std::vector<TranslationFrame>;

/// Integer pixel grid coordinates, coords(y, x) = (x, y).
struct PixelGrid {
    int height = 0;
    int width = 0;
    std::vector<int> coords;  // H*W*2, (x, y)
};

PixelGrid make_pixel_grid(int height, int width);

constexpr double kBehindCameraEps = 1e-6;  // meters

/// Principal point centered, fx = fy = focal.
Intrinsics make_default_intrinsics(double width, double height, double focal);

/// Homogeneous E2 * E1^-1.
Extrinsics relative_transform(const Extrinsics& e1, const Extrinsics& e2);

/// Displacement field moving view-e1 pixels (at the given depth) into view e2.
/// Unprojects with K^-1, scales by depth, applies the relative transform,
/// reprojects with perspective division, subtracts the source pixel.
/// Exactly zero (all valid) when e1 and e2 are bitwise equal.
TranslationFrame pixel_translation(const DepthMap& depth, const Intrinsics& k,
                                   const Extrinsics& e1, const Extrinsics& e2);

/// Thread budget for per-row parallel loops; honors the TA_THREADS env var.
int thread_budget();

}  // namespace ta::geom
