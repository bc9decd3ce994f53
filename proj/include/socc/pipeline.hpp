#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "socc/geometry.hpp"
#include "socc/occupancy_grid.hpp"
#include "socc/preprocessing.hpp"
#include "socc/registration.hpp"
#include "socc/scan.hpp"

namespace socc {

/// Feature switches for component studies. All on by default.
struct Ablations {
    bool use_cleaning_ray = true;         // raycasting-based free-space updates
    bool use_occ_weight = true;           // occupancy term of the weight
    bool use_sem_weight = true;           // semantic term of the weight
    bool use_semantic_downsample = true;  // per-class vs class-blind downsampling
    AnchorMode anchor_mode = AnchorMode::kFirstInserted;
};

struct ThresholdConfig {
    double tau_min = 0.3;
    double sigma_multiplier = 3.0;
};

struct PipelineConfig {
    MappingConfig mapping;
    DownsampleConfig downsample;
    RegistrationConfig registration;
    ThresholdConfig threshold;
    Ablations ablations;

    /// Effective downsampling voxel size.
    [[nodiscard]] double v_adapt() const {
        return downsample.base_multiplier * mapping.voxel_size;
    }

    /// Registration config with the ablation switches folded in.
    [[nodiscard]] RegistrationConfig effective_registration() const;

    void validate() const;
};

/// Flat `section.key = value` configuration file; `#` starts a comment.
/// Unknown keys raise ConfigError. Relative file paths are resolved against
/// the config file's directory.
PipelineConfig load_pipeline_config(const std::filesystem::path& file);

/// Applies one `key=value` override (same keys as the config file) on top of
/// an existing config.
void apply_config_override(PipelineConfig& cfg, const std::string& assignment);

/// Class-factor map file: `class_id factor name` lines.
std::vector<double> load_class_factors(const std::filesystem::path& file, int class_count);

/// Everything the odometry loop carries from frame to frame.
struct OdometryState {
    OccupancyGrid grid;
    std::vector<Pose> trajectory;
    ThresholdState threshold;
    int frame_index = 0;

    explicit OdometryState(const PipelineConfig& cfg)
        : grid(cfg.mapping),
          threshold{cfg.threshold.tau_min, cfg.threshold.sigma_multiplier} {}

    [[nodiscard]] const Pose& last_pose() const { return trajectory.back(); }
};

/// One full odometry step: predict, deskew, downsample, register, refresh the
/// adaptive threshold, integrate the full deskewed cloud at the estimate, and
/// prune the rolling map. Frame 0 is integrated at identity without
/// registration. Returns the estimated pose. Throws EmptyScan.
Pose process_scan(OdometryState& state, const Scan& raw, const PipelineConfig& cfg);

}  // namespace socc
