#pragma once

#include <cstdint>
#include <filesystem>
#include <unordered_map>
#include <vector>

#include "socc/geometry.hpp"
#include "socc/scan.hpp"

namespace socc {

struct Trajectory {
    std::vector<Pose> poses;
    std::vector<double> timestamps;  // optional, seconds

    [[nodiscard]] std::size_t size() const { return poses.size(); }
    [[nodiscard]] bool empty() const { return poses.empty(); }
};

/// Raw label id -> class id table. Without an explicit table, ids below
/// class_count pass through and everything else collapses to unlabeled.
struct LabelMap {
    std::unordered_map<std::uint16_t, std::uint16_t> table;
    int class_count = 20;

    [[nodiscard]] std::uint16_t remap(std::uint16_t raw) const {
        if (!table.empty()) {
            auto it = table.find(raw);
            return it == table.end() ? kUnlabeled : it->second;
        }
        return static_cast<int>(raw) < class_count ? raw : kUnlabeled;
    }
};

/// `raw_id class_id [name]` lines, `#` comments.
LabelMap load_label_map(const std::filesystem::path& file, int class_count);

/// Consecutive little-endian float32 (x, y, z, intensity) records; intensity
/// is discarded. Throws MalformedFile when the size is not a multiple of 16.
Scan read_point_cloud_bin(const std::filesystem::path& path);

/// One little-endian uint32 per point; the class id is the low 16 bits run
/// through the label map. Throws CountMismatch when the record count differs
/// from point_count.
std::vector<std::uint16_t> read_labels(const std::filesystem::path& path,
                                       std::size_t point_count, const LabelMap& map = {});

/// One pose per line: the 12 row-major entries of the top 3x4 block, space
/// separated, 9 significant digits.
void write_trajectory_kitti(const Trajectory& traj, const std::filesystem::path& path);
Trajectory read_trajectory_kitti(const std::filesystem::path& path);

/// Sorted *.ext files of a directory (the frame order convention).
std::vector<std::filesystem::path> list_files(const std::filesystem::path& dir,
                                              const std::string& extension);

}  // namespace socc
