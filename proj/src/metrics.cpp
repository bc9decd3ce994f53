#include "socc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include "socc/errors.hpp"

namespace socc {

namespace {

constexpr double kSegmentLengths[] = {100, 200, 300, 400, 500, 600, 700, 800};

std::vector<double> cumulative_distances(const Trajectory& traj) {
    std::vector<double> dist(traj.size(), 0.0);
    for (std::size_t i = 1; i < traj.size(); ++i) {
        dist[i] = dist[i - 1] +
                  (traj.poses[i].translation - traj.poses[i - 1].translation).norm();
    }
    return dist;
}

/// First frame at least `len` meters of arc length after `first`, or -1.
std::ptrdiff_t frame_after_length(const std::vector<double>& dist, std::size_t first,
                                  double len) {
    for (std::size_t i = first; i < dist.size(); ++i) {
        if (dist[i] >= dist[first] + len) {
            return static_cast<std::ptrdiff_t>(i);
        }
    }
    return -1;
}

ErrorStats stats_of(const std::vector<double>& values) {
    ErrorStats out;
    if (values.empty()) {
        return out;
    }
    double sum = 0.0;
    double sq_sum = 0.0;
    for (double v : values) {
        sum += v;
        sq_sum += v * v;
        out.max = std::max(out.max, v);
    }
    const double n = static_cast<double>(values.size());
    out.mean = sum / n;
    out.rmse = std::sqrt(sq_sum / n);
    out.std = std::sqrt(std::max(0.0, sq_sum / n - out.mean * out.mean));
    return out;
}

}  // namespace

double path_length(const Trajectory& traj) {
    return traj.empty() ? 0.0 : cumulative_distances(traj).back();
}

RelativeErrors eval_rte_rre(const Trajectory& est, const Trajectory& gt) {
    if (est.size() != gt.size()) {
        throw TooShort("trajectory lengths differ");
    }
    if (gt.size() < 2) {
        throw TooShort("need at least two poses");
    }
    const std::vector<double> dist = cumulative_distances(gt);
    if (dist.back() < kSegmentLengths[0]) {
        throw TooShort("ground-truth path is shorter than 100 m");
    }

    double t_err_sum = 0.0;
    double r_err_sum = 0.0;
    std::size_t count = 0;
    for (std::size_t first = 0; first < gt.size(); ++first) {
        for (double len : kSegmentLengths) {
            const std::ptrdiff_t last = frame_after_length(dist, first, len);
            if (last < 0) {
                break;  // longer segments will not fit either
            }
            const Pose gt_rel = gt.poses[first].inverse() * gt.poses[last];
            const Pose est_rel = est.poses[first].inverse() * est.poses[last];
            const Pose error = gt_rel.inverse() * est_rel;
            t_err_sum += error.translation.norm() / len;
            r_err_sum += error.angle() / len;
            ++count;
        }
    }
    if (count == 0) {
        throw TooShort("no subsequence of 100 m fits the trajectory");
    }

    RelativeErrors out;
    out.rte_percent = 100.0 * t_err_sum / static_cast<double>(count);
    out.rre_deg_per_100m =
        100.0 * (180.0 / std::numbers::pi) * r_err_sum / static_cast<double>(count);
    return out;
}

Pose align_trajectories(const Trajectory& est, const Trajectory& gt) {
    if (est.size() != gt.size() || est.empty()) {
        throw TooShort("alignment needs equal-length, nonempty trajectories");
    }
    Eigen::Matrix3Xd src(3, est.size());
    Eigen::Matrix3Xd dst(3, gt.size());
    for (std::size_t i = 0; i < est.size(); ++i) {
        src.col(i) = est.poses[i].translation;
        dst.col(i) = gt.poses[i].translation;
    }
    const Eigen::Matrix4d m = Eigen::umeyama(src, dst, /*with_scaling=*/false);
    Pose out;
    out.rotation = m.block<3, 3>(0, 0);
    out.translation = m.block<3, 1>(0, 3);
    return out;
}

AbsoluteErrors eval_ape_rpe(const Trajectory& est, const Trajectory& gt, int rpe_delta) {
    if (est.size() != gt.size()) {
        throw TooShort("trajectory lengths differ");
    }
    if (est.size() < 2 || rpe_delta < 1 ||
        est.size() <= static_cast<std::size_t>(rpe_delta)) {
        throw TooShort("too few poses for APE/RPE");
    }

    const Pose alignment = align_trajectories(est, gt);
    std::vector<double> ape_errors(est.size());
    for (std::size_t i = 0; i < est.size(); ++i) {
        ape_errors[i] =
            (gt.poses[i].translation - (alignment * est.poses[i].translation)).norm();
    }

    const std::size_t pairs = est.size() - static_cast<std::size_t>(rpe_delta);
    std::vector<double> rpe_errors(pairs);
    for (std::size_t i = 0; i < pairs; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rpe_delta);
        const Pose gt_rel = gt.poses[i].inverse() * gt.poses[j];
        const Pose est_rel = est.poses[i].inverse() * est.poses[j];
        rpe_errors[i] = (gt_rel.inverse() * est_rel).translation.norm();
    }

    AbsoluteErrors out;
    out.ape = stats_of(ape_errors);
    out.rpe = stats_of(rpe_errors);
    return out;
}

}  // namespace socc
