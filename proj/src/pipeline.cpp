#include "socc/pipeline.hpp"

#include "socc/errors.hpp"

namespace socc {

RegistrationConfig PipelineConfig::effective_registration() const {
    RegistrationConfig reg = registration;
    reg.use_occ_weight = ablations.use_occ_weight;
    reg.use_sem_weight = ablations.use_sem_weight;
    reg.anchor_mode = ablations.anchor_mode;
    return reg;
}

void PipelineConfig::validate() const {
    mapping.validate();
    if (downsample.base_multiplier <= 0.0) {
        throw ConfigError("downsample.base_multiplier must be positive");
    }
    for (double f : downsample.class_factors) {
        if (f < 0.0) throw ConfigError("class factors must be >= 0");
    }
    if (!(registration.tau_planar > 0.0 && registration.tau_planar <= 1.0 / 3.0)) {
        throw ConfigError("registration.tau_planar must lie in (0, 1/3]");
    }
    if (registration.min_points_for_plane < 3) {
        throw ConfigError("registration.min_points_for_plane must be at least 3");
    }
    if (registration.gamma < 0.0) throw ConfigError("registration.gamma must be >= 0");
    if (!(registration.w_lower >= 0.0 && registration.w_lower <= 1.0)) {
        throw ConfigError("registration.w_lower must lie in [0, 1]");
    }
    if (registration.max_iterations < 1) {
        throw ConfigError("registration.max_iterations must be positive");
    }
    if (registration.convergence_eps <= 0.0) {
        throw ConfigError("registration.convergence_eps must be positive");
    }
    if (threshold.tau_min <= 0.0) throw ConfigError("threshold.tau_min must be positive");
    if (threshold.sigma_multiplier <= 0.0) {
        throw ConfigError("threshold.sigma_multiplier must be positive");
    }
}

Pose process_scan(OdometryState& state, const Scan& raw, const PipelineConfig& cfg) {
    if (raw.empty()) {
        throw EmptyScan();
    }

    // Bootstrap: the first frame defines the map frame.
    if (state.trajectory.empty()) {
        const Pose identity;
        state.grid.integrate_scan(identity.translation, raw,
                                  cfg.ablations.use_cleaning_ray);
        state.grid.prune_beyond(identity.translation, cfg.mapping.max_range);
        state.trajectory.push_back(identity);
        state.frame_index = 1;
        return identity;
    }

    const std::size_t n = state.trajectory.size();
    const Pose delta_pred = n >= 2
                                ? predict_delta(state.trajectory[n - 2], state.trajectory[n - 1])
                                : Pose::Identity();

    const Scan deskewed = deskew(raw, delta_pred);
    const Scan downsampled = cfg.ablations.use_semantic_downsample
                                 ? semantic_downsample(deskewed, cfg.downsample, cfg.v_adapt())
                                 : voxel_downsample(deskewed, cfg.v_adapt());

    const Pose T_init = state.last_pose() * delta_pred;
    const double tau_corr = state.threshold.current();

    Pose T_est = T_init;
    if (!downsampled.empty()) {
        try {
            T_est = register_scan(downsampled, state.grid, T_init, tau_corr,
                                  cfg.effective_registration())
                        .pose;
        } catch (const NoCorrespondences&) {
            T_est = T_init;  // fall back to the motion-model prediction
        } catch (const DegenerateSystem&) {
            T_est = T_init;
        }
    }

    const Pose delta_est = state.last_pose().inverse() * T_est;
    auto [threshold_state, next_tau] =
        update_threshold(std::move(state.threshold), delta_pred, delta_est,
                         cfg.mapping.max_range);
    state.threshold = std::move(threshold_state);
    (void)next_tau;  // picked up from the state before the next registration

    state.grid.integrate_scan(T_est.translation, deskewed.transformed(T_est),
                              cfg.ablations.use_cleaning_ray);
    state.grid.prune_beyond(T_est.translation, cfg.mapping.max_range);

    state.trajectory.push_back(T_est);
    state.frame_index = static_cast<int>(state.trajectory.size());
    return T_est;
}

}  // namespace socc
