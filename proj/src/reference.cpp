#include "socc/reference.hpp"

#include <algorithm>
#include <limits>
#include <unordered_set>

#include <Eigen/Geometry>

namespace socc::ref {

std::vector<Correspondence> find_correspondences_brute(
    std::span<const Eigen::Vector3d> points, std::span<const std::uint16_t> classes,
    const RegistrationMap& map, double tau_corr) {
    std::vector<Correspondence> corrs;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const RegistrationMap::Target* best = nullptr;
        double best_d2 = std::numeric_limits<double>::infinity();
        for (const RegistrationMap::Target& t : map.targets()) {
            const double d2 = (points[i] - t.anchor).squaredNorm();
            if (d2 < best_d2 || (d2 == best_d2 && best != nullptr && t.key < best->key)) {
                best = &t;
                best_d2 = d2;
            }
        }
        if (best == nullptr || best_d2 > tau_corr * tau_corr) {
            continue;
        }
        Correspondence c;
        c.source = points[i];
        c.source_class = i < classes.size() ? classes[i] : kUnlabeled;
        c.target = best->anchor;
        c.kind = best->planar ? SurfaceKind::kPlanar : SurfaceKind::kNonPlanar;
        if (best->planar) {
            c.normal = best->normal;
        }
        c.p_occ = best->p_occ;
        c.voxel_label = best->label;
        c.voxel_label_prob = best->label_prob;
        corrs.push_back(c);
    }
    return corrs;
}

NormalEquations accumulate_system_serial(std::span<const Correspondence> corrs,
                                         double mix_alpha) {
    NormalEquations acc;
    for (const Correspondence& c : corrs) {
        const double lambda = c.kind == SurfaceKind::kPlanar ? mix_alpha : 1.0 - mix_alpha;
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
    return acc;
}

std::vector<VoxelKey> free_voxels_serial(const Eigen::Vector3d& origin,
                                         std::span<const Eigen::Vector3d> endpoints,
                                         double voxel_size, double max_range) {
    std::unordered_set<VoxelKey, VoxelKeyHash> seen;
    const double max_range_sq = max_range * max_range;
    for (const Eigen::Vector3d& endpoint : endpoints) {
        if ((endpoint - origin).squaredNorm() > max_range_sq) {
            continue;
        }
        for (const VoxelKey& key : raycast_keys(origin, endpoint, voxel_size)) {
            seen.insert(key);
        }
    }
    std::vector<VoxelKey> keys(seen.begin(), seen.end());
    std::sort(keys.begin(), keys.end());
    return keys;
}

}  // namespace socc::ref
