#pragma once

#include <span>
#include <vector>

#include "socc/registration.hpp"

namespace socc::ref {

/// Serial brute-force twins of the parallel kernels. They are the ground
/// truth the fast paths are tested against and the baseline the benchmark
/// compares with; keep them simple, not fast.

/// O(N * M) scan over every occupied target for each point; same tie rule
/// (lowest voxel key) and threshold semantics as the shell search.
std::vector<Correspondence> find_correspondences_brute(
    std::span<const Eigen::Vector3d> points, std::span<const std::uint16_t> classes,
    const RegistrationMap& map, double tau_corr);

/// Straight in-order accumulation of the normal equations, no chunking.
NormalEquations accumulate_system_serial(std::span<const Correspondence> corrs,
                                         double mix_alpha);

/// Serial free-space collection for one scan: the deduplicated set of voxels
/// crossed between the origin and each in-range endpoint.
std::vector<VoxelKey> free_voxels_serial(const Eigen::Vector3d& origin,
                                         std::span<const Eigen::Vector3d> endpoints,
                                         double voxel_size, double max_range);

}  // namespace socc::ref
