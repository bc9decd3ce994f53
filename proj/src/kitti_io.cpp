#include "socc/kitti_io.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "socc/errors.hpp"

namespace socc {

namespace {

std::vector<char> read_all(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    in.seekg(0, std::ios::end);
    const std::streamoff size = in.tellg();
    in.seekg(0, std::ios::beg);
    std::vector<char> buffer(static_cast<std::size_t>(size));
    if (size > 0 && !in.read(buffer.data(), size)) {
        throw IoError("short read on " + path.string());
    }
    return buffer;
}

}  // namespace

LabelMap load_label_map(const std::filesystem::path& file, int class_count) {
    std::ifstream in(file);
    if (!in) {
        throw IoError("cannot open label map " + file.string());
    }
    LabelMap map;
    map.class_count = class_count;
    std::string line;
    while (std::getline(in, line)) {
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        std::istringstream ss(line);
        long raw = 0;
        long mapped = 0;
        if (ss >> raw >> mapped) {
            map.table[static_cast<std::uint16_t>(raw)] = static_cast<std::uint16_t>(mapped);
        }
    }
    return map;
}

Scan read_point_cloud_bin(const std::filesystem::path& path) {
    const std::vector<char> buffer = read_all(path);
    if (buffer.size() % 16 != 0) {
        throw MalformedFile(path.string() + ": size is not a multiple of 16 bytes");
    }
    const std::size_t n = buffer.size() / 16;
    Scan scan;
    scan.positions.resize(n);
    scan.labels.assign(n, kUnlabeled);
    for (std::size_t i = 0; i < n; ++i) {
        float xyz[3];
        std::memcpy(xyz, buffer.data() + 16 * i, sizeof(xyz));
        scan.positions[i] = Eigen::Vector3d(xyz[0], xyz[1], xyz[2]);
    }
    return scan;
}

std::vector<std::uint16_t> read_labels(const std::filesystem::path& path,
                                       std::size_t point_count, const LabelMap& map) {
    const std::vector<char> buffer = read_all(path);
    if (buffer.size() != 4 * point_count) {
        throw CountMismatch(path.string() + ": expected " + std::to_string(point_count) +
                            " labels, file holds " + std::to_string(buffer.size() / 4));
    }
    std::vector<std::uint16_t> labels(point_count);
    for (std::size_t i = 0; i < point_count; ++i) {
        std::uint32_t record = 0;
        std::memcpy(&record, buffer.data() + 4 * i, sizeof(record));
        labels[i] = map.remap(static_cast<std::uint16_t>(record & 0xFFFFu));
    }
    return labels;
}

void write_trajectory_kitti(const Trajectory& traj, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    out << std::setprecision(9);
    for (const Pose& pose : traj.poses) {
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) {
                out << pose.rotation(r, c) << ' ';
            }
            out << pose.translation[r] << (r == 2 ? '\n' : ' ');
        }
    }
    if (!out) {
        throw IoError("write failed on " + path.string());
    }
}

Trajectory read_trajectory_kitti(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    Trajectory traj;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        std::istringstream ss(line);
        double m[12];
        for (double& value : m) {
            if (!(ss >> value)) {
                throw MalformedFile(path.string() + ":" + std::to_string(line_no) +
                                    ": expected 12 pose entries");
            }
        }
        Pose pose;
        pose.rotation << m[0], m[1], m[2], m[4], m[5], m[6], m[8], m[9], m[10];
        pose.translation = Eigen::Vector3d(m[3], m[7], m[11]);
        traj.poses.push_back(pose);
    }
    return traj;
}

std::vector<std::filesystem::path> list_files(const std::filesystem::path& dir,
                                              const std::string& extension) {
    if (!std::filesystem::is_directory(dir)) {
        throw IoError(dir.string() + " is not a directory");
    }
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == extension) {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    return files;
}

}  // namespace socc
