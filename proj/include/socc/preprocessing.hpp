#pragma once

#include <deque>
#include <vector>

#include "socc/geometry.hpp"
#include "socc/scan.hpp"

namespace socc {

/// Semantics-aware downsampling parameters. class_factors[c] scales the
/// effective voxel size for class c; 0 removes the class entirely, missing
/// entries default to 1.
struct DownsampleConfig {
    std::vector<double> class_factors;
    double base_multiplier = 1.5;  // v_adapt = base_multiplier * map voxel size

    [[nodiscard]] double factor(std::uint16_t c) const {
        return c < class_factors.size() ? class_factors[c] : 1.0;
    }
};

/// Constant-velocity prediction: the last relative motion, reused.
Pose predict_delta(const Pose& T_prev2, const Pose& T_prev1);

/// Moves every timestamped point to the scan-end reference time under the
/// predicted intra-scan motion. A scan without timestamps, or an identity
/// prediction, is returned unchanged.
Scan deskew(const Scan& scan, const Pose& delta_pred);

/// Per-class voxel downsampling at v_c = factor(c) * v_adapt, keeping the
/// mean point (and mean timestamp) of every occupied voxel. Class buckets are
/// processed independently and merged in ascending class order.
Scan semantic_downsample(const Scan& scan, const DownsampleConfig& cfg, double v_adapt);

/// Class-blind variant: one voxel pass over all points; the output label is
/// the majority label of the voxel (ties to the lowest id).
Scan voxel_downsample(const Scan& scan, double v);

/// Adaptive correspondence threshold driven by the mismatch between the
/// motion-model prediction and the registered estimate.
struct ThresholdState {
    double tau_min = 0.3;          // meters, hard floor
    double sigma_multiplier = 3.0;
    std::size_t max_history = 512;
    std::deque<double> deviations;

    /// max(tau_min, sigma_multiplier * RMS(history)); tau_min while empty.
    [[nodiscard]] double current() const;
};

/// Records the prediction error of one frame and returns the refreshed state
/// together with the threshold for the next registration. The deviation is
/// the translation norm plus the chord length 2 * r_max * sin(angle / 2) of
/// the rotation error; values below tau_min / sigma_multiplier are treated as
/// noise and not recorded.
std::pair<ThresholdState, double> update_threshold(ThresholdState st, const Pose& delta_pred,
                                                   const Pose& delta_est, double r_max);

}  // namespace socc
