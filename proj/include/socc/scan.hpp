#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "socc/geometry.hpp"

namespace socc {

/// Class id 0 is reserved for "unlabeled".
inline constexpr std::uint16_t kUnlabeled = 0;

/// One LiDAR frame. Labels always hold one entry per point (0 when no
/// semantics are available). rel_times is either empty or holds one value in
/// [0, 1] per point, normalized over the sweep.
struct Scan {
    std::vector<Eigen::Vector3d> positions;
    std::vector<std::uint16_t> labels;
    std::vector<double> rel_times;

    [[nodiscard]] std::size_t size() const { return positions.size(); }
    [[nodiscard]] bool empty() const { return positions.empty(); }
    [[nodiscard]] bool has_timestamps() const { return !rel_times.empty(); }

    void push_back(const Eigen::Vector3d& p, std::uint16_t label = kUnlabeled) {
        positions.push_back(p);
        labels.push_back(label);
    }

    void push_back(const Eigen::Vector3d& p, std::uint16_t label, double rel_time) {
        positions.push_back(p);
        labels.push_back(label);
        rel_times.push_back(rel_time);
    }

    /// Copy with every position mapped through T; labels and timestamps kept.
    [[nodiscard]] Scan transformed(const Pose& T) const;
};

}  // namespace socc
