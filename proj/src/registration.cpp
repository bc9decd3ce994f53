#include "socc/registration.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>

#include <Eigen/Dense>

#include "socc/errors.hpp"

namespace socc {

namespace {

constexpr double kEigenvalueFloor = 1e-12;   // DegenerateSystem threshold on H
constexpr std::size_t kReduceChunk = 256;    // fixed-order reduction granularity

Eigen::Vector3d canonicalized(Eigen::Vector3d n) {
    for (int i = 0; i < 3; ++i) {
        if (std::abs(n[i]) > 1e-12) {
            if (n[i] < 0.0) n = -n;
            break;
        }
    }
    return n;
}

double smallest_eigenvalue(const Matrix6d& h) {
    Eigen::SelfAdjointEigenSolver<Matrix6d> es(h, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

}  // namespace

VoxelClassification classify_voxel(const VoxelData& v, const RegistrationConfig& cfg) {
    VoxelClassification out;
    if (v.moments.count < static_cast<std::uint64_t>(cfg.min_points_for_plane)) {
        return out;
    }
    const Eig3 eig = eig3_symmetric(v.moments.covariance());
    const double sum = eig.eigenvalues.sum();
    if (sum < 1e-12) {
        return out;
    }
    const double tau = eig.eigenvalues[2] / sum;
    out.surface_variation = tau;
    if (tau < cfg.tau_planar) {
        out.kind = SurfaceKind::kPlanar;
        out.normal = canonicalized(eig.eigenvectors.col(2));
    }
    return out;
}

RegistrationMap RegistrationMap::build(const OccupancyGrid& grid,
                                       const RegistrationConfig& cfg) {
    RegistrationMap map;
    map.voxel_size_ = grid.config().voxel_size;

    std::vector<const OccupancyGrid::CellMap::value_type*> occupied;
    occupied.reserve(grid.size());
    for (const auto& cell : grid.cells()) {
        if (cell.second.occupied()) {
            occupied.push_back(&cell);
        }
    }
    std::sort(occupied.begin(), occupied.end(),
              [](const auto* a, const auto* b) { return a->first < b->first; });

    map.targets_.resize(occupied.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(occupied.size()); ++i) {
        const auto& [key, v] = *occupied[i];
        Target& t = map.targets_[i];
        t.key = key;
        t.anchor = anchor_of(v, key, map.voxel_size_, cfg.anchor_mode);
        const VoxelClassification cls = classify_voxel(v, cfg);
        t.planar = cls.kind == SurfaceKind::kPlanar;
        if (t.planar) {
            t.normal = *cls.normal;
        }
        t.p_occ = v.occupancy();
        t.label = v.label;
        t.label_prob = v.label_probability();
    }

    map.index_.reserve(map.targets_.size());
    for (std::uint32_t i = 0; i < map.targets_.size(); ++i) {
        map.index_.emplace(map.targets_[i].key, i);
    }
    return map;
}

const RegistrationMap::Target* RegistrationMap::nearest(const Eigen::Vector3d& p,
                                                        double tau) const {
    if (targets_.empty() || tau <= 0.0) {
        return nullptr;
    }
    const double s = voxel_size_;
    const VoxelKey center = key_of(p, s);
    const int max_shell = static_cast<int>(std::ceil(tau / s));

    const Target* best = nullptr;
    double best_d2 = std::numeric_limits<double>::infinity();
    auto consider = [&](const VoxelKey& k) {
        auto it = index_.find(k);
        if (it == index_.end()) return;
        const Target& t = targets_[it->second];
        const double d2 = (p - t.anchor).squaredNorm();
        if (d2 < best_d2 || (d2 == best_d2 && best != nullptr && t.key < best->key)) {
            best = &t;
            best_d2 = d2;
        }
    };

    for (int r = 0; r <= max_shell; ++r) {
        // Anything in shell r or beyond is at least (r - 1) * s away, so once
        // the best distance beats that strictly no later candidate can win.
        // Ties keep scanning, which preserves the lowest-key rule.
        if (best != nullptr && r >= 1) {
            const double reach = double(r - 1) * s;
            if (best_d2 < reach * reach) {
                break;
            }
        }
        for (int dx = -r; dx <= r; ++dx) {
            for (int dy = -r; dy <= r; ++dy) {
                for (int dz = -r; dz <= r; ++dz) {
                    if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != r) {
                        continue;  // interior already visited in earlier shells
                    }
                    consider({center.x + dx, center.y + dy, center.z + dz});
                }
            }
        }
    }
    if (best == nullptr || best_d2 > tau * tau) {
        return nullptr;
    }
    return best;
}

std::vector<Correspondence> find_correspondences(std::span<const Eigen::Vector3d> points,
                                                 std::span<const std::uint16_t> classes,
                                                 const RegistrationMap& map,
                                                 double tau_corr) {
    std::vector<const RegistrationMap::Target*> hit(points.size(), nullptr);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(points.size()); ++i) {
        hit[i] = map.nearest(points[i], tau_corr);
    }

    std::vector<Correspondence> corrs;
    corrs.reserve(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        const RegistrationMap::Target* t = hit[i];
        if (t == nullptr) {
            continue;
        }
        Correspondence c;
        c.source = points[i];
        c.source_class = i < classes.size() ? classes[i] : kUnlabeled;
        c.target = t->anchor;
        c.kind = t->planar ? SurfaceKind::kPlanar : SurfaceKind::kNonPlanar;
        if (t->planar) {
            c.normal = t->normal;
        }
        c.p_occ = t->p_occ;
        c.voxel_label = t->label;
        c.voxel_label_prob = t->label_prob;
        corrs.push_back(c);
    }
    return corrs;
}

double gm_weight(double residual_norm, double c) {
    const double c2 = c * c;
    const double w = c2 / (c2 + residual_norm * residual_norm);
    return w * w;
}

double occ_weight(double p_occ, double gamma) { return std::pow(p_occ, gamma); }

double sem_weight(std::uint16_t c, std::uint16_t c_vox, double p_vox, double w_lower) {
    const bool match = c == c_vox || c == kUnlabeled || c_vox == kUnlabeled;
    return w_lower + (match ? (1.0 - w_lower) * p_vox : 0.0);
}

void apply_weights(std::vector<Correspondence>& corrs, const RegistrationConfig& cfg,
                   double gm_scale_c) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(corrs.size()); ++i) {
        Correspondence& c = corrs[i];
        c.w_gm = gm_weight(c.matching_error(), gm_scale_c);
        c.w_occ = cfg.use_occ_weight ? occ_weight(c.p_occ, cfg.gamma) : 1.0;
        c.w_sem = cfg.use_sem_weight
                      ? sem_weight(c.source_class, c.voxel_label, c.voxel_label_prob,
                                   cfg.w_lower)
                      : 1.0;
        c.weight = c.w_gm * c.w_occ * c.w_sem;
    }
}

double planar_mix(std::size_t n_planar, std::size_t n_nonplanar) {
    const std::size_t total = n_planar + n_nonplanar;
    if (total == 0) {
        return 0.0;
    }
    return static_cast<double>(n_planar) / static_cast<double>(total);
}

namespace {

/// Contribution of one correspondence under the current increment estimate.
/// Sources are the already-transformed points, so the Jacobians are taken at
/// the identity increment.
void add_correspondence(const Correspondence& c, double lambda, NormalEquations& acc) {
    const double w = lambda * c.weight;
    if (c.kind == SurfaceKind::kPlanar) {
        const double e = c.normal.dot(c.source - c.target);
        Vector6d j;
        j.head<3>() = c.source.cross(c.normal);
        j.tail<3>() = c.normal;
        acc.H.noalias() += w * j * j.transpose();
        acc.g.noalias() -= w * j * e;
        acc.cost += w * e * e;
    } else {
        const Eigen::Vector3d e = c.source - c.target;
        Eigen::Matrix<double, 3, 6> j;
        j.block<3, 3>(0, 0) = -skew(c.source);
        j.block<3, 3>(0, 3) = Eigen::Matrix3d::Identity();
        acc.H.noalias() += w * j.transpose() * j;
        acc.g.noalias() -= w * j.transpose() * e;
        acc.cost += w * e.squaredNorm();
    }
}

}  // namespace

NormalEquations accumulate_system(std::span<const Correspondence> corrs, double mix_alpha) {
    const std::size_t n = corrs.size();
    const std::size_t n_chunks = (n + kReduceChunk - 1) / kReduceChunk;
    std::vector<NormalEquations> partial(n_chunks);

    // Chunk boundaries are fixed by the input size alone, and each chunk is
    // summed in index order, so the reduction is bit-stable across thread
    // counts.
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t chunk = 0; chunk < static_cast<std::ptrdiff_t>(n_chunks); ++chunk) {
        NormalEquations& acc = partial[chunk];
        const std::size_t begin = static_cast<std::size_t>(chunk) * kReduceChunk;
        const std::size_t end = std::min(begin + kReduceChunk, n);
        for (std::size_t i = begin; i < end; ++i) {
            const double lambda =
                corrs[i].kind == SurfaceKind::kPlanar ? mix_alpha : 1.0 - mix_alpha;
            add_correspondence(corrs[i], lambda, acc);
        }
    }

    NormalEquations out;
    for (const NormalEquations& p : partial) {
        out.H += p.H;
        out.g += p.g;
        out.cost += p.cost;
    }
    return out;
}

NormalEquations build_system(std::span<const Correspondence> corrs, double mix_alpha) {
    NormalEquations eq = accumulate_system(corrs, mix_alpha);
    if (smallest_eigenvalue(eq.H) < kEigenvalueFloor) {
        throw DegenerateSystem();
    }
    return eq;
}

double evaluate_cost(std::span<const Correspondence> corrs, double mix_alpha,
                     const Pose& increment) {
    const std::size_t n = corrs.size();
    const std::size_t n_chunks = (n + kReduceChunk - 1) / kReduceChunk;
    std::vector<double> partial(n_chunks, 0.0);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t chunk = 0; chunk < static_cast<std::ptrdiff_t>(n_chunks); ++chunk) {
        double acc = 0.0;
        const std::size_t begin = static_cast<std::size_t>(chunk) * kReduceChunk;
        const std::size_t end = std::min(begin + kReduceChunk, n);
        for (std::size_t i = begin; i < end; ++i) {
            const Correspondence& c = corrs[i];
            const Eigen::Vector3d s = increment * c.source;
            const double lambda =
                c.kind == SurfaceKind::kPlanar ? mix_alpha : 1.0 - mix_alpha;
            if (c.kind == SurfaceKind::kPlanar) {
                const double e = c.normal.dot(s - c.target);
                acc += lambda * c.weight * e * e;
            } else {
                acc += lambda * c.weight * (s - c.target).squaredNorm();
            }
        }
        partial[chunk] = acc;
    }
    double cost = 0.0;
    for (double p : partial) cost += p;
    return cost;
}

RegistrationResult register_scan(const Scan& scan, const OccupancyGrid& grid,
                                 const Pose& T_init, double tau_corr,
                                 const RegistrationConfig& cfg) {
    RegistrationResult result;
    result.pose = T_init;

    const RegistrationMap map = RegistrationMap::build(grid, cfg);
    if (map.empty()) {
        return result;
    }

    const double gm_c = cfg.gm_scale > 0.0 ? cfg.gm_scale : tau_corr;
    double frozen_mix = 0.0;
    bool mix_initialized = false;

    for (int iter = 0; iter < cfg.max_iterations; ++iter) {
        const Scan current = scan.transformed(result.pose);
        std::vector<Correspondence> corrs =
            find_correspondences(current.positions, current.labels, map, tau_corr);
        if (corrs.empty()) {
            throw NoCorrespondences();
        }

        IterationStats stats;
        stats.correspondence_count = corrs.size();
        for (const Correspondence& c : corrs) {
            (c.kind == SurfaceKind::kPlanar ? stats.n_planar : stats.n_nonplanar)++;
        }
        if (cfg.mix_per_iteration || !mix_initialized) {
            frozen_mix = planar_mix(stats.n_planar, stats.n_nonplanar);
            mix_initialized = true;
        }
        stats.mix_alpha = frozen_mix;

        apply_weights(corrs, cfg, gm_c);
        NormalEquations eq = accumulate_system(corrs, frozen_mix);
        stats.cost = eq.cost;

        if (smallest_eigenvalue(eq.H) < kEigenvalueFloor) {
            // Levenberg damping; corridor-style degeneracy must degrade
            // gracefully instead of aborting the whole frame.
            const double mu = 1e-6 * eq.H.trace() / 6.0;
            eq.H += mu * Matrix6d::Identity();
            stats.damped = true;
            if (smallest_eigenvalue(eq.H) < kEigenvalueFloor) {
                throw DegenerateSystem();
            }
        }

        const Vector6d xi = eq.H.ldlt().solve(eq.g);

        // Step-halving guard on the fixed-correspondence subproblem.
        double step = 1.0;
        Pose increment = exp_map(Twist::FromVector(step * xi));
        double new_cost = evaluate_cost(corrs, frozen_mix, increment);
        int halvings = 0;
        while (new_cost > eq.cost && halvings < 8) {
            step *= 0.5;
            ++halvings;
            increment = exp_map(Twist::FromVector(step * xi));
            new_cost = evaluate_cost(corrs, frozen_mix, increment);
        }
        if (new_cost > eq.cost) {
            result.iterations.push_back(stats);
            break;  // no descent step available; stay at the current estimate
        }

        result.pose = increment * result.pose;
        result.iterations.push_back(stats);
        if ((step * xi).norm() < cfg.convergence_eps) {
            break;
        }
    }
    return result;
}

}  // namespace socc
