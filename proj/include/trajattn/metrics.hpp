// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "trajattn/geom.hpp"

#include <vector>

namespace ta::metrics {

/// Camera poses in camera-to-world convention; the translation part is the
/// camera center.
struct PoseTrajectory {
    std::vector<geom::Extrinsics> poses;

    size_t size() const { return poses.size(); }
};

struct Alignment {
    geom::Extrinsics transform;  // maps est centers onto gt: x' = scale * R x + t
    double scale = 1.0;
};

struct RpeResult {
    double trans_m = 0.0;
    double rot_deg = 0.0;
};

/// Least-squares rigid (optionally similarity) alignment of estimated camera
/// centers onto ground truth.
Alignment rigid_align(const PoseTrajectory& est, const PoseTrajectory& gt, bool with_scale);

/// Absolute trajectory error: RMSE of center residuals after rigid alignment.
double ate(const PoseTrajectory& est, const PoseTrajectory& gt);

/// Relative pose error over step delta: RMSE of per-step relative-motion
/// discrepancies, translation in meters and rotation in degrees.
RpeResult rpe(const PoseTrajectory& est, const PoseTrajectory& gt, int delta = 1);

/// Rotation angle in degrees via the trace formula, clamped against round-off.
double rotation_angle_deg(const Eigen::Matrix3d& r);

}  // namespace ta::metrics
