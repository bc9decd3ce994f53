#pragma once

#include "socc/kitti_io.hpp"

namespace socc {

struct RelativeErrors {
    double rte_percent = 0.0;       // translational, % of subsequence length
    double rre_deg_per_100m = 0.0;  // rotational, degrees per 100 m
};

/// KITTI-protocol relative errors: for every start frame and every
/// subsequence length in {100, ..., 800} m of ground-truth arc length, the
/// relative-pose discrepancy normalized by the nominal length, averaged over
/// all pairs. Throws TooShort when the ground-truth path is under 100 m.
RelativeErrors eval_rte_rre(const Trajectory& est, const Trajectory& gt);

struct ErrorStats {
    double mean = 0.0;
    double max = 0.0;
    double rmse = 0.0;
    double std = 0.0;
};

struct AbsoluteErrors {
    ErrorStats ape;  // after rigid SE(3) alignment of est onto gt
    ErrorStats rpe;  // relative translational error over frame pairs
};

/// Full-trajectory translational APE (after closed-form rigid alignment, no
/// scale) and RPE over (i, i + rpe_delta) frame pairs. Throws TooShort when
/// fewer than two frames (or fewer than rpe_delta + 1) are available.
AbsoluteErrors eval_ape_rpe(const Trajectory& est, const Trajectory& gt, int rpe_delta = 1);

/// Rigid alignment est -> gt minimizing the summed squared translation error
/// (closed-form Umeyama, rotation + translation only).
Pose align_trajectories(const Trajectory& est, const Trajectory& gt);

/// Ground-truth arc length of the trajectory in meters.
double path_length(const Trajectory& traj);

}  // namespace socc
