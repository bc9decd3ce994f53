#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "socc/geometry.hpp"
#include "socc/occupancy_grid.hpp"
#include "socc/scan.hpp"

namespace socc {

struct RegistrationConfig {
    double tau_planar = 0.1;        // surface-variation threshold
    int min_points_for_plane = 5;   // voxels below this are never planar
    double gamma = 1.5;             // occupancy weight exponent
    double w_lower = 0.25;          // semantic weight for non-matching labels
    double gm_scale = 0.0;          // Geman-McClure scale c; <= 0 ties it to tau_corr
    int max_iterations = 100;
    double convergence_eps = 1e-6;  // twist norm
    bool mix_per_iteration = true;  // recompute the planar mix each iteration
    bool use_occ_weight = true;
    bool use_sem_weight = true;
    AnchorMode anchor_mode = AnchorMode::kFirstInserted;
};

enum class SurfaceKind : std::uint8_t { kPlanar, kNonPlanar };

struct VoxelClassification {
    SurfaceKind kind = SurfaceKind::kNonPlanar;
    std::optional<Eigen::Vector3d> normal;       // unit, sign-canonicalized; planar only
    std::optional<double> surface_variation;     // tau = l3 / (l1 + l2 + l3)
};

/// Planarity of a voxel from its covariance eigenvalues. Voxels with fewer
/// than min_points_for_plane points are non-planar regardless of geometry.
/// The normal is the eigenvector of the smallest eigenvalue with its first
/// nonzero component made positive.
VoxelClassification classify_voxel(const VoxelData& v, const RegistrationConfig& cfg);

struct Correspondence {
    Eigen::Vector3d source = Eigen::Vector3d::Zero();  // transformed scan point
    std::uint16_t source_class = kUnlabeled;
    Eigen::Vector3d target = Eigen::Vector3d::Zero();  // voxel anchor point
    Eigen::Vector3d normal = Eigen::Vector3d::Zero();  // valid iff planar
    SurfaceKind kind = SurfaceKind::kNonPlanar;
    double p_occ = 0.5;
    std::uint16_t voxel_label = kUnlabeled;
    double voxel_label_prob = 1.0;
    double w_gm = 1.0;
    double w_occ = 1.0;
    double w_sem = 1.0;
    double weight = 1.0;

    [[nodiscard]] Eigen::Vector3d residual() const { return source - target; }

    /// Scalar error fed to the robust kernel: the projected (point-to-plane)
    /// residual for planar pairs, the Euclidean norm otherwise.
    [[nodiscard]] double matching_error() const {
        return kind == SurfaceKind::kPlanar ? std::abs(normal.dot(source - target))
                                            : (source - target).norm();
    }
};

/// Frozen registration view of the grid: one entry per occupied voxel with
/// its anchor under the configured mode and its planarity classification.
/// Voxel geometry does not change during one registration, so this is built
/// once per scan and read concurrently afterwards.
class RegistrationMap {
public:
    struct Target {
        VoxelKey key;
        Eigen::Vector3d anchor;
        Eigen::Vector3d normal;  // valid iff planar
        bool planar = false;
        double p_occ = 0.5;
        std::uint16_t label = kUnlabeled;
        double label_prob = 1.0;
    };

    static RegistrationMap build(const OccupancyGrid& grid, const RegistrationConfig& cfg);

    [[nodiscard]] bool empty() const { return targets_.empty(); }
    [[nodiscard]] std::size_t size() const { return targets_.size(); }
    [[nodiscard]] const std::vector<Target>& targets() const { return targets_; }
    [[nodiscard]] double voxel_size() const { return voxel_size_; }

    /// Nearest anchor within tau of p, ties broken by the lowest voxel key.
    /// Expanding-shell search over the voxel index; equal to the brute-force
    /// scan over all targets by construction.
    [[nodiscard]] const Target* nearest(const Eigen::Vector3d& p, double tau) const;

private:
    double voxel_size_ = 0.5;
    std::vector<Target> targets_;  // sorted by key
    std::unordered_map<VoxelKey, std::uint32_t, VoxelKeyHash> index_;
};

/// One correspondence per scan point whose nearest occupied-voxel anchor lies
/// within tau_corr, in scan order. Parallel over points.
std::vector<Correspondence> find_correspondences(std::span<const Eigen::Vector3d> points,
                                                 std::span<const std::uint16_t> classes,
                                                 const RegistrationMap& map,
                                                 double tau_corr);

/// Geman-McClure IRLS weight (c^2 / (c^2 + r^2))^2, 1 at r = 0.
double gm_weight(double residual_norm, double c);

/// Occupancy confidence p_occ^gamma.
double occ_weight(double p_occ, double gamma);

/// Semantic consistency: w_lower + [labels match or either unlabeled] * (1 - w_lower) * p_vox.
double sem_weight(std::uint16_t c, std::uint16_t c_vox, double p_vox, double w_lower);

/// Fills w_gm/w_occ/w_sem and their product for every correspondence.
/// gm_scale_c is the effective robust-kernel scale for this solve.
void apply_weights(std::vector<Correspondence>& corrs, const RegistrationConfig& cfg,
                   double gm_scale_c);

/// Fraction of planar correspondences; 0 when there are none at all.
double planar_mix(std::size_t n_planar, std::size_t n_nonplanar);

struct NormalEquations {
    Matrix6d H = Matrix6d::Zero();
    Vector6d g = Vector6d::Zero();
    double cost = 0.0;
};

/// Weighted Gauss-Newton normal equations in the twist parameterization
/// (rotation first): planar pairs contribute one point-to-plane row, others
/// three point-to-point rows; planar terms are scaled by mix_alpha and
/// non-planar terms by 1 - mix_alpha. Fixed-order chunked reduction, so the
/// result is bit-identical for any thread count.
NormalEquations accumulate_system(std::span<const Correspondence> corrs, double mix_alpha);

/// accumulate_system plus the rank check: throws DegenerateSystem when the
/// smallest eigenvalue of H falls below 1e-12.
NormalEquations build_system(std::span<const Correspondence> corrs, double mix_alpha);

/// Cost of the fixed correspondence set after applying the increment to every
/// source point; used by the step-halving guard.
double evaluate_cost(std::span<const Correspondence> corrs, double mix_alpha,
                     const Pose& increment);

struct IterationStats {
    std::size_t n_planar = 0;
    std::size_t n_nonplanar = 0;
    double mix_alpha = 0.0;
    double cost = 0.0;
    std::size_t correspondence_count = 0;
    bool damped = false;  // degeneracy guard engaged on this solve
};

struct RegistrationResult {
    Pose pose;
    std::vector<IterationStats> iterations;
};

/// Iterative scan-to-map alignment: correspondence search against voxel
/// anchors, adaptive planar/non-planar residual mixing, triple weighting, and
/// left-multiplicative Gauss-Newton updates until the increment norm drops
/// below convergence_eps. Returns T_init untouched when the grid has no
/// occupied voxel. Throws NoCorrespondences when every point is beyond
/// tau_corr, and DegenerateSystem when even the damped system is rank
/// deficient.
RegistrationResult register_scan(const Scan& scan, const OccupancyGrid& grid,
                                 const Pose& T_init, double tau_corr,
                                 const RegistrationConfig& cfg);

}  // namespace socc
