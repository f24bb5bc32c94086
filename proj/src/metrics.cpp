// SPDX-License-Identifier: Apache-2.0

#include "trajattn/metrics.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ta::metrics {

namespace {

Eigen::Matrix3Xd centers_of(const PoseTrajectory& t) {
    Eigen::Matrix3Xd c(3, t.size());
    for (size_t i = 0; i < t.size(); ++i) {
        geom::validate(t.poses[i]);
        c.col(static_cast<Eigen::Index>(i)) = t.poses[i].translation;
    }
    return c;
}

}  // namespace

double rotation_angle_deg(const Eigen::Matrix3d& r) {
    const double arg = std::clamp((r.trace() - 1.0) / 2.0, -1.0, 1.0);
    return std::acos(arg) * 180.0 / M_PI;
}

Alignment rigid_align(const PoseTrajectory& est, const PoseTrajectory& gt, bool with_scale) {
    if (est.size() != gt.size()) {
        throw std::invalid_argument("rigid_align: trajectory lengths differ");
    }
    if (est.size() < 3) {
        throw std::invalid_argument("rigid_align: need at least 3 poses");
    }
    const Eigen::Matrix3Xd src = centers_of(est);
    const Eigen::Matrix3Xd dst = centers_of(gt);

    const Eigen::Vector3d mean = src.rowwise().mean();
    if ((src.colwise() - mean).cwiseAbs().maxCoeff() < 1e-12) {
        throw std::invalid_argument("rigid_align: degenerate input, all positions identical");
    }

    const Eigen::Matrix4d m = Eigen::umeyama(src, dst, with_scale);
    Alignment out;
    const Eigen::Matrix3d sr = m.block<3, 3>(0, 0);
    out.scale = with_scale ? std::cbrt(sr.determinant()) : 1.0;
    out.transform.rotation = sr / out.scale;
    out.transform.translation = m.block<3, 1>(0, 3);
    return out;
}

double ate(const PoseTrajectory& est, const PoseTrajectory& gt) {
    if (est.size() != gt.size()) {
        throw std::invalid_argument("ate: trajectory lengths differ");
    }
    const Alignment a = rigid_align(est, gt, /*with_scale=*/false);
    double acc = 0.0;
    for (size_t i = 0; i < est.size(); ++i) {
        const Eigen::Vector3d aligned =
            a.transform.rotation * est.poses[i].translation + a.transform.translation;
        acc += (aligned - gt.poses[i].translation).squaredNorm();
    }
    return std::sqrt(acc / static_cast<double>(est.size()));
}

RpeResult rpe(const PoseTrajectory& est, const PoseTrajectory& gt, int delta) {
    if (delta < 1) {
        throw std::invalid_argument("rpe: delta must be >= 1");
    }
    if (est.size() != gt.size()) {
        throw std::invalid_argument("rpe: trajectory lengths differ");
    }
    if (est.size() <= static_cast<size_t>(delta)) {
        throw std::invalid_argument("rpe: trajectory length must exceed delta");
    }

    double trans_acc = 0.0;
    double rot_acc = 0.0;
    const size_t n = est.size() - delta;
    for (size_t i = 0; i < n; ++i) {
        const geom::Extrinsics d_est =
            geom::compose(est.poses[i].inverse(), est.poses[i + delta]);
        const geom::Extrinsics d_gt =
            geom::compose(gt.poses[i].inverse(), gt.poses[i + delta]);
        const geom::Extrinsics err = geom::compose(d_gt.inverse(), d_est);
        trans_acc += err.translation.squaredNorm();
        const double ang = rotation_angle_deg(err.rotation);
        rot_acc += ang * ang;
    }
    return RpeResult{std::sqrt(trans_acc / static_cast<double>(n)),
                     std::sqrt(rot_acc / static_cast<double>(n))};
}

}  // namespace ta::metrics
