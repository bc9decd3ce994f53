#pragma once

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <Eigen/Core>

#include "socc/geometry.hpp"
#include "socc/scan.hpp"

namespace socc {

struct VoxelKey {
    std::int32_t x = 0;
    std::int32_t y = 0;
    std::int32_t z = 0;

    friend auto operator<=>(const VoxelKey&, const VoxelKey&) = default;
};

struct VoxelKeyHash {
    std::size_t operator()(const VoxelKey& k) const noexcept {
        // Teschner et al. spatial hash.
        return static_cast<std::size_t>(static_cast<std::uint32_t>(k.x) * 73856093u ^
                                        static_cast<std::uint32_t>(k.y) * 19349669u ^
                                        static_cast<std::uint32_t>(k.z) * 83492791u);
    }
};

inline VoxelKey key_of(const Eigen::Vector3d& p, double voxel_size) {
    return {static_cast<std::int32_t>(std::floor(p.x() / voxel_size)),
            static_cast<std::int32_t>(std::floor(p.y() / voxel_size)),
            static_cast<std::int32_t>(std::floor(p.z() / voxel_size))};
}

inline Eigen::Vector3d voxel_center(const VoxelKey& k, double voxel_size) {
    return {(k.x + 0.5) * voxel_size, (k.y + 0.5) * voxel_size, (k.z + 0.5) * voxel_size};
}

/// log(p / (1 - p)). Throws DomainError outside (0, 1).
double logit(double p);

inline double sigmoid(double l) { return 1.0 / (1.0 + std::exp(-l)); }

/// Mapping parameters. Hit/miss probabilities are per class: a global
/// default, category values for classes declared static or potentially
/// moving, and sparse per-class overrides on top. Class-dependent miss
/// probabilities let evidence for moving objects decay faster than for
/// static structure.
struct MappingConfig {
    double voxel_size = 0.5;    // meters
    double ema_alpha = 0.8;     // semantic EMA memory
    int class_count = 20;       // K + 1, class 0 = unlabeled
    double p_hit = 0.55;
    double p_miss = 0.49;
    double p_miss_static = 0.498;
    double p_miss_moving = 0.475;
    std::unordered_set<int> static_classes;
    std::unordered_set<int> moving_classes;
    std::unordered_map<int, double> p_hit_class;   // per-class overrides
    std::unordered_map<int, double> p_miss_class;
    double log_odds_min = -1.9924301646902063;  // logit(0.12)
    double log_odds_max = 3.4760986898352733;   // logit(0.97)
    double max_range = 100.0;  // meters

    [[nodiscard]] double hit_probability(std::uint16_t c) const {
        auto it = p_hit_class.find(c);
        return it == p_hit_class.end() ? p_hit : it->second;
    }
    [[nodiscard]] double miss_probability(std::uint16_t c) const {
        if (auto it = p_miss_class.find(c); it != p_miss_class.end()) return it->second;
        if (moving_classes.contains(c)) return p_miss_moving;
        if (static_classes.contains(c)) return p_miss_static;
        return p_miss;
    }

    /// Throws ConfigError when any probability or bound is inconsistent.
    void validate() const;
};

/// Per-voxel statistics: running moments, the immutable first-inserted anchor
/// point, occupancy log-odds, and the semantic class distribution.
struct VoxelData {
    Moments moments;
    Eigen::Vector3d anchor = Eigen::Vector3d::Zero();
    double log_odds = 0.0;
    std::vector<double> class_probs;  // empty until the first semantic update
    std::uint16_t label = kUnlabeled;

    [[nodiscard]] double occupancy() const { return sigmoid(log_odds); }
    [[nodiscard]] bool occupied() const { return log_odds >= 0.0; }
    [[nodiscard]] double label_probability() const {
        return class_probs.empty() ? 1.0 : class_probs[label];
    }
};

/// Point insertion: sets the anchor on first touch, updates the moments, and
/// adds the hit increment for the point's own class to the clamped log-odds.
void apply_hit(VoxelData& v, const Eigen::Vector3d& p, std::uint16_t point_class,
               const MappingConfig& cfg);

/// Free-space observation: adds the (negative) miss increment for the voxel's
/// current dominant label. Geometry and semantics are untouched.
void apply_miss(VoxelData& v, const MappingConfig& cfg);

/// Blends the empirical label frequencies of one scan's hits into the voxel
/// distribution with an exponential moving average; a brand-new voxel adopts
/// the frequencies directly. Throws EmptyObservation on an empty multiset.
void update_semantics(VoxelData& v, std::span<const std::uint16_t> hits_in_voxel,
                      double alpha, int class_count);

/// Exact voxel traversal (Amanatides-Woo DDA) of the voxels strictly between
/// the origin's voxel and the endpoint's voxel, both excluded, in ray order.
/// Boundary ties step one axis at a time in x, y, z priority.
std::vector<VoxelKey> raycast_keys(const Eigen::Vector3d& origin,
                                   const Eigen::Vector3d& endpoint, double voxel_size);

enum class AnchorMode { kFirstInserted, kRunningMean, kVoxelCenter };

/// Registration target point of a voxel under the configured anchor policy.
Eigen::Vector3d anchor_of(const VoxelData& v, const VoxelKey& key, double voxel_size,
                          AnchorMode mode);

/// Sparse semantic occupancy grid. Single writer; immutable between
/// mutations, so any number of threads may read concurrently.
class OccupancyGrid {
public:
    using CellMap = std::unordered_map<VoxelKey, VoxelData, VoxelKeyHash>;

    OccupancyGrid() = default;
    explicit OccupancyGrid(MappingConfig cfg) : config_(std::move(cfg)) {}

    [[nodiscard]] const MappingConfig& config() const { return config_; }
    [[nodiscard]] std::size_t size() const { return cells_.size(); }
    [[nodiscard]] bool empty() const { return cells_.empty(); }
    [[nodiscard]] const CellMap& cells() const { return cells_; }

    /// nullptr when the key was never touched by a hit.
    [[nodiscard]] const VoxelData* find(const VoxelKey& key) const;

    /// Fuses one scan already expressed in the map frame: per-voxel hits and
    /// one semantic update each, then (optionally) one deduplicated miss per
    /// traversed free voxel that already exists in the map. Points beyond
    /// max_range from the origin are skipped. Free observations never
    /// allocate voxels.
    void integrate_scan(const Eigen::Vector3d& origin, const Scan& scan_world,
                        bool free_space_updates = true);

    /// Stored voxels with occupancy >= 0.5 whose anchor lies within radius of
    /// center, sorted by key.
    [[nodiscard]] std::vector<std::pair<VoxelKey, const VoxelData*>> occupied_in_radius(
        const Eigen::Vector3d& center, double radius) const;

    /// Drops every cell whose anchor is farther than max_range from center.
    void prune_beyond(const Eigen::Vector3d& center, double max_range);

    /// Line-oriented text dump, one voxel per line, keys sorted.
    void dump(std::ostream& os) const;

private:
    MappingConfig config_;
    CellMap cells_;
};

}  // namespace socc
