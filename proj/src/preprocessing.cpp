#include "socc/preprocessing.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "socc/occupancy_grid.hpp"

namespace socc {

Pose predict_delta(const Pose& T_prev2, const Pose& T_prev1) {
    return T_prev2.inverse() * T_prev1;
}

Scan deskew(const Scan& scan, const Pose& delta_pred) {
    if (!scan.has_timestamps()) {
        return scan;
    }
    const Twist xi = log_map(delta_pred);
    if (xi.vector().isZero(0.0)) {
        return scan;
    }
    Scan out = scan;
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(scan.size()); ++i) {
        // A point taken at relative time s sits at exp((s - 1) * xi) relative
        // to the scan-end frame.
        const Pose correction = exp_map(xi.scaled(scan.rel_times[i] - 1.0));
        out.positions[i] = correction * scan.positions[i];
    }
    return out;
}

namespace {

struct VoxelAccumulator {
    Eigen::Vector3d position_sum = Eigen::Vector3d::Zero();
    double time_sum = 0.0;
    std::size_t count = 0;
};

/// Mean-point voxelization of a list of point indices at voxel size v.
/// Output order is the first-touch order of the voxels, which only depends on
/// the input order.
void downsample_bucket(const Scan& scan, const std::vector<std::uint32_t>& indices,
                       double v, std::uint16_t out_label, Scan& out) {
    std::unordered_map<VoxelKey, VoxelAccumulator, VoxelKeyHash> cells;
    std::vector<VoxelKey> order;
    cells.reserve(indices.size());
    for (std::uint32_t i : indices) {
        auto [it, inserted] = cells.try_emplace(key_of(scan.positions[i], v));
        if (inserted) {
            order.push_back(it->first);
        }
        VoxelAccumulator& acc = it->second;
        acc.position_sum += scan.positions[i];
        if (scan.has_timestamps()) {
            acc.time_sum += scan.rel_times[i];
        }
        acc.count += 1;
    }
    for (const VoxelKey& key : order) {
        const VoxelAccumulator& acc = cells.find(key)->second;
        const double inv = 1.0 / static_cast<double>(acc.count);
        if (scan.has_timestamps()) {
            out.push_back(acc.position_sum * inv, out_label, acc.time_sum * inv);
        } else {
            out.push_back(acc.position_sum * inv, out_label);
        }
    }
}

}  // namespace

Scan semantic_downsample(const Scan& scan, const DownsampleConfig& cfg, double v_adapt) {
    // Partition by class; bucket order (ascending class id) fixes the output
    // ordering regardless of how the buckets are processed.
    std::vector<std::vector<std::uint32_t>> buckets;
    for (std::uint32_t i = 0; i < scan.size(); ++i) {
        const std::uint16_t c = scan.labels[i];
        if (c >= buckets.size()) {
            buckets.resize(c + 1);
        }
        buckets[c].push_back(i);
    }

    std::vector<Scan> partial(buckets.size());
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(buckets.size()); ++c) {
        if (buckets[c].empty()) {
            continue;
        }
        const double factor = cfg.factor(static_cast<std::uint16_t>(c));
        if (factor <= 0.0) {
            continue;  // removed class
        }
        downsample_bucket(scan, buckets[c], factor * v_adapt,
                          static_cast<std::uint16_t>(c), partial[c]);
    }

    Scan out;
    for (const Scan& part : partial) {
        out.positions.insert(out.positions.end(), part.positions.begin(),
                             part.positions.end());
        out.labels.insert(out.labels.end(), part.labels.begin(), part.labels.end());
        out.rel_times.insert(out.rel_times.end(), part.rel_times.begin(),
                             part.rel_times.end());
    }
    return out;
}

Scan voxel_downsample(const Scan& scan, double v) {
    struct Cell {
        VoxelAccumulator acc;
        std::unordered_map<std::uint16_t, std::size_t> label_counts;
    };
    std::unordered_map<VoxelKey, Cell, VoxelKeyHash> cells;
    std::vector<VoxelKey> order;
    for (std::uint32_t i = 0; i < scan.size(); ++i) {
        auto [it, inserted] = cells.try_emplace(key_of(scan.positions[i], v));
        if (inserted) {
            order.push_back(it->first);
        }
        Cell& cell = it->second;
        cell.acc.position_sum += scan.positions[i];
        if (scan.has_timestamps()) {
            cell.acc.time_sum += scan.rel_times[i];
        }
        cell.acc.count += 1;
        cell.label_counts[scan.labels[i]] += 1;
    }

    Scan out;
    for (const VoxelKey& key : order) {
        const Cell& cell = cells.find(key)->second;
        std::uint16_t best_label = kUnlabeled;
        std::size_t best_count = 0;
        for (const auto& [label, count] : cell.label_counts) {
            if (count > best_count || (count == best_count && label < best_label)) {
                best_label = label;
                best_count = count;
            }
        }
        const double inv = 1.0 / static_cast<double>(cell.acc.count);
        if (scan.has_timestamps()) {
            out.push_back(cell.acc.position_sum * inv, best_label, cell.acc.time_sum * inv);
        } else {
            out.push_back(cell.acc.position_sum * inv, best_label);
        }
    }
    return out;
}

double ThresholdState::current() const {
    if (deviations.empty()) {
        return tau_min;
    }
    double sq_sum = 0.0;
    for (double d : deviations) {
        sq_sum += d * d;
    }
    const double rms = std::sqrt(sq_sum / static_cast<double>(deviations.size()));
    return std::max(tau_min, sigma_multiplier * rms);
}

std::pair<ThresholdState, double> update_threshold(ThresholdState st, const Pose& delta_pred,
                                                   const Pose& delta_est, double r_max) {
    const Pose err = delta_pred.inverse() * delta_est;
    const double deviation =
        err.translation.norm() + 2.0 * r_max * std::sin(0.5 * err.angle());
    if (deviation >= st.tau_min / st.sigma_multiplier) {
        st.deviations.push_back(deviation);
        while (st.deviations.size() > st.max_history) {
            st.deviations.pop_front();
        }
    }
    const double tau_corr = st.current();
    return {std::move(st), tau_corr};
}

}  // namespace socc
