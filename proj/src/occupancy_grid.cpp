#include "socc/occupancy_grid.hpp"

#include <algorithm>
#include <cstddef>
#include <iomanip>
#include <limits>
#include <ostream>
#include <unordered_set>

#include <omp.h>

#include "socc/errors.hpp"

namespace socc {

double logit(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw DomainError("logit argument must lie in (0, 1)");
    }
    return std::log(p / (1.0 - p));
}

void MappingConfig::validate() const {
    auto check_hit = [](double p) {
        if (!(p > 0.5 && p < 1.0)) throw ConfigError("p_hit must lie in (0.5, 1)");
    };
    auto check_miss = [](double p) {
        if (!(p > 0.0 && p < 0.5)) throw ConfigError("p_miss must lie in (0, 0.5)");
    };
    check_hit(p_hit);
    check_miss(p_miss);
    check_miss(p_miss_static);
    check_miss(p_miss_moving);
    for (const auto& [c, p] : p_hit_class) check_hit(p);
    for (const auto& [c, p] : p_miss_class) check_miss(p);
    if (!(log_odds_min < 0.0 && log_odds_max > 0.0)) {
        throw ConfigError("log-odds clamp must straddle zero");
    }
    if (voxel_size <= 0.0) throw ConfigError("voxel_size must be positive");
    if (!(ema_alpha >= 0.0 && ema_alpha <= 1.0)) throw ConfigError("ema_alpha must lie in [0, 1]");
    if (class_count < 1) throw ConfigError("class_count must be at least 1");
    if (max_range <= 0.0) throw ConfigError("max_range must be positive");
}

void apply_hit(VoxelData& v, const Eigen::Vector3d& p, std::uint16_t point_class,
               const MappingConfig& cfg) {
    if (v.moments.count == 0) {
        v.anchor = p;
    }
    v.moments.add(p);
    v.log_odds = std::clamp(v.log_odds + logit(cfg.hit_probability(point_class)),
                            cfg.log_odds_min, cfg.log_odds_max);
}

void apply_miss(VoxelData& v, const MappingConfig& cfg) {
    v.log_odds = std::clamp(v.log_odds + logit(cfg.miss_probability(v.label)),
                            cfg.log_odds_min, cfg.log_odds_max);
}

void update_semantics(VoxelData& v, std::span<const std::uint16_t> hits_in_voxel,
                      double alpha, int class_count) {
    if (hits_in_voxel.empty()) {
        throw EmptyObservation();
    }
    std::vector<double> freq(static_cast<std::size_t>(class_count), 0.0);
    const double inv_n = 1.0 / static_cast<double>(hits_in_voxel.size());
    for (std::uint16_t c : hits_in_voxel) {
        freq[c < freq.size() ? c : 0] += inv_n;
    }

    if (v.class_probs.empty()) {
        v.class_probs = std::move(freq);  // brand-new voxel adopts the frequencies
    } else {
        v.class_probs.resize(freq.size(), 0.0);
        for (std::size_t k = 0; k < freq.size(); ++k) {
            v.class_probs[k] = alpha * v.class_probs[k] + (1.0 - alpha) * freq[k];
        }
    }

    double sum = 0.0;
    for (double p : v.class_probs) sum += p;
    if (std::abs(sum - 1.0) > 1e-12 && sum > 0.0) {
        for (double& p : v.class_probs) p /= sum;
    }

    v.label = static_cast<std::uint16_t>(
        std::max_element(v.class_probs.begin(), v.class_probs.end()) - v.class_probs.begin());
}

namespace {

/// Shared DDA core; calls visit(key) for every voxel strictly between the
/// origin's and the endpoint's voxel.
template <typename Visitor>
void raycast_core(const Eigen::Vector3d& origin, const Eigen::Vector3d& endpoint,
                  double s, Visitor&& visit) {
    VoxelKey k = key_of(origin, s);
    const VoxelKey k_end = key_of(endpoint, s);
    if (k == k_end) {
        return;
    }
    const Eigen::Vector3d d = endpoint - origin;

    std::int32_t* idx[3] = {&k.x, &k.y, &k.z};
    std::int32_t step[3];
    double t_max[3];
    double t_delta[3];
    const std::int32_t start[3] = {k.x, k.y, k.z};
    for (int a = 0; a < 3; ++a) {
        if (d[a] > 0.0) {
            step[a] = 1;
            t_max[a] = ((start[a] + 1) * s - origin[a]) / d[a];
            t_delta[a] = s / d[a];
        } else if (d[a] < 0.0) {
            step[a] = -1;
            t_max[a] = (start[a] * s - origin[a]) / d[a];
            t_delta[a] = -s / d[a];
        } else {
            step[a] = 0;
            t_max[a] = std::numeric_limits<double>::infinity();
            t_delta[a] = std::numeric_limits<double>::infinity();
        }
    }

    // Exact chain length; the loop always terminates even if rounding keeps
    // the traversal from landing exactly on the endpoint key.
    const std::int32_t end_coord[3] = {k_end.x, k_end.y, k_end.z};
    long remaining = std::abs(long(k_end.x) - k.x) + std::abs(long(k_end.y) - k.y) +
                     std::abs(long(k_end.z) - k.z);
    while (remaining-- > 0) {
        int a = 0;
        if (t_max[1] < t_max[a]) a = 1;
        if (t_max[2] < t_max[a]) a = 2;
        *idx[a] += step[a];
        t_max[a] += t_delta[a];
        if (k == k_end) {
            return;
        }
        if (step[a] != 0 && (*idx[a] - end_coord[a]) * step[a] > 0) {
            return;  // rounding overshot the endpoint column
        }
        visit(k);
    }
}

}  // namespace

std::vector<VoxelKey> raycast_keys(const Eigen::Vector3d& origin,
                                   const Eigen::Vector3d& endpoint, double voxel_size) {
    std::vector<VoxelKey> keys;
    raycast_core(origin, endpoint, voxel_size, [&](const VoxelKey& k) { keys.push_back(k); });
    return keys;
}

Eigen::Vector3d anchor_of(const VoxelData& v, const VoxelKey& key, double voxel_size,
                          AnchorMode mode) {
    switch (mode) {
        case AnchorMode::kRunningMean:
            return v.moments.mean;
        case AnchorMode::kVoxelCenter:
            return voxel_center(key, voxel_size);
        case AnchorMode::kFirstInserted:
        default:
            return v.anchor;
    }
}

const VoxelData* OccupancyGrid::find(const VoxelKey& key) const {
    auto it = cells_.find(key);
    return it == cells_.end() ? nullptr : &it->second;
}

void OccupancyGrid::integrate_scan(const Eigen::Vector3d& origin, const Scan& scan_world,
                                   bool free_space_updates) {
    const double s = config_.voxel_size;
    const double max_range_sq = config_.max_range * config_.max_range;

    // Group in-range hits by voxel, preserving scan order within each voxel
    // so the per-voxel update order is chronological.
    std::vector<VoxelKey> touch_order;
    std::unordered_map<VoxelKey, std::vector<std::uint32_t>, VoxelKeyHash> groups;
    std::vector<std::uint32_t> in_range;
    in_range.reserve(scan_world.size());
    for (std::uint32_t i = 0; i < scan_world.size(); ++i) {
        const Eigen::Vector3d& p = scan_world.positions[i];
        if ((p - origin).squaredNorm() > max_range_sq) {
            continue;
        }
        in_range.push_back(i);
        auto [it, inserted] = groups.try_emplace(key_of(p, s));
        if (inserted) {
            touch_order.push_back(it->first);
        }
        it->second.push_back(i);
    }

    std::vector<std::uint16_t> voxel_labels;
    for (const VoxelKey& key : touch_order) {
        VoxelData& v = cells_[key];
        const std::vector<std::uint32_t>& members = groups.find(key)->second;
        voxel_labels.clear();
        for (std::uint32_t i : members) {
            apply_hit(v, scan_world.positions[i], scan_world.labels[i], config_);
            voxel_labels.push_back(scan_world.labels[i]);
        }
        update_semantics(v, voxel_labels, config_.ema_alpha, config_.class_count);
    }

    if (!free_space_updates) {
        return;
    }

    // Free set: voxels traversed by any beam, deduplicated across the whole
    // scan. Built in parallel; the set content does not depend on merge
    // order, and the per-voxel miss updates below are independent.
    using KeySet = std::unordered_set<VoxelKey, VoxelKeyHash>;
    KeySet free_keys;
#pragma omp parallel
    {
        KeySet local;
#pragma omp for schedule(static) nowait
        for (std::ptrdiff_t n = 0; n < static_cast<std::ptrdiff_t>(in_range.size()); ++n) {
            raycast_core(origin, scan_world.positions[in_range[n]], s,
                         [&](const VoxelKey& k) { local.insert(k); });
        }
#pragma omp critical(socc_free_set_merge)
        free_keys.merge(local);
    }

    for (const VoxelKey& key : free_keys) {
        if (groups.contains(key)) {
            continue;  // hit voxels win over the cleaning ray within one scan
        }
        auto it = cells_.find(key);
        if (it != cells_.end()) {
            apply_miss(it->second, config_);
        }
    }
}

std::vector<std::pair<VoxelKey, const VoxelData*>> OccupancyGrid::occupied_in_radius(
    const Eigen::Vector3d& center, double radius) const {
    std::vector<std::pair<VoxelKey, const VoxelData*>> out;
    const double r_sq = radius * radius;
    for (const auto& [key, v] : cells_) {
        if (v.occupied() && (v.anchor - center).squaredNorm() <= r_sq) {
            out.emplace_back(key, &v);
        }
    }
    std::sort(out.begin(), out.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    return out;
}

void OccupancyGrid::prune_beyond(const Eigen::Vector3d& center, double max_range) {
    const double r_sq = max_range * max_range;
    std::erase_if(cells_, [&](const auto& cell) {
        return (cell.second.anchor - center).squaredNorm() > r_sq;
    });
}

void OccupancyGrid::dump(std::ostream& os) const {
    std::vector<const CellMap::value_type*> rows;
    rows.reserve(cells_.size());
    for (const auto& cell : cells_) {
        rows.push_back(&cell);
    }
    std::sort(rows.begin(), rows.end(),
              [](const auto* a, const auto* b) { return a->first < b->first; });

    os << std::setprecision(9);
    os << "# socc-grid v1 voxel_size=" << config_.voxel_size
       << " classes=" << config_.class_count << "\n";
    for (const auto* row : rows) {
        const auto& [key, v] = *row;
        const Eigen::Matrix3d cov = v.moments.covariance();
        os << key.x << ' ' << key.y << ' ' << key.z << ' ' << v.moments.count;
        for (int i = 0; i < 3; ++i) os << ' ' << v.moments.mean[i];
        os << ' ' << cov(0, 0) << ' ' << cov(0, 1) << ' ' << cov(0, 2)  //
           << ' ' << cov(1, 1) << ' ' << cov(1, 2) << ' ' << cov(2, 2);
        for (int i = 0; i < 3; ++i) os << ' ' << v.anchor[i];
        os << ' ' << v.log_odds << ' ' << v.label;
        for (int k = 0; k < config_.class_count; ++k) {
            const double p = k < static_cast<int>(v.class_probs.size())
                                 ? v.class_probs[k]
                                 : (k == 0 && v.class_probs.empty() ? 1.0 : 0.0);
            os << ' ' << p;
        }
        os << '\n';
    }
}

}  // namespace socc
