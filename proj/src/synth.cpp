#include "socc/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <sstream>

#include <Eigen/Geometry>

#include "socc/errors.hpp"
#include "socc/kitti_io.hpp"

namespace socc {

namespace {

constexpr double kRayEps = 1e-9;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

double to_unit(std::uint64_t x) { return static_cast<double>(x >> 11) * 0x1.0p-53; }

/// Counter-based truncated normal draw: deterministic per (seed, frame, beam,
/// column) no matter how rendering is scheduled.
double truncated_gaussian(std::uint64_t seed, std::uint64_t frame, std::uint64_t beam,
                          std::uint64_t col) {
    const std::uint64_t base = splitmix64(seed ^ splitmix64(frame ^ splitmix64((beam << 32) | col)));
    const double u1 = std::max(to_unit(base), 1e-16);
    const double u2 = to_unit(splitmix64(base));
    const double g = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    return std::clamp(g, -3.0, 3.0);
}

/// Orthonormal in-plane axes derived deterministically from the normal.
void plane_axes(const Eigen::Vector3d& n, Eigen::Vector3d& u, Eigen::Vector3d& v) {
    int least = 0;
    for (int i = 1; i < 3; ++i) {
        if (std::abs(n[i]) < std::abs(n[least])) least = i;
    }
    u = n.cross(Eigen::Vector3d::Unit(least)).normalized();
    v = n.cross(u);
}

std::optional<double> intersect_plane(const Primitive& prim, const Eigen::Vector3d& center,
                                      const Eigen::Vector3d& o, const Eigen::Vector3d& d) {
    const double denom = prim.normal.dot(d);
    if (std::abs(denom) < 1e-12) {
        return std::nullopt;
    }
    const double t = prim.normal.dot(center - o) / denom;
    if (t <= kRayEps) {
        return std::nullopt;
    }
    if (prim.half_u > 0.0 || prim.half_v > 0.0) {
        Eigen::Vector3d u, v;
        plane_axes(prim.normal, u, v);
        const Eigen::Vector3d rel = o + t * d - center;
        if (prim.half_u > 0.0 && std::abs(rel.dot(u)) > prim.half_u) return std::nullopt;
        if (prim.half_v > 0.0 && std::abs(rel.dot(v)) > prim.half_v) return std::nullopt;
    }
    return t;
}

std::optional<double> intersect_box(const Primitive& prim, const Eigen::Vector3d& center,
                                    const Eigen::Vector3d& o, const Eigen::Vector3d& d) {
    double t_enter = -std::numeric_limits<double>::infinity();
    double t_exit = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
        const double lo = center[a] - prim.half_extents[a];
        const double hi = center[a] + prim.half_extents[a];
        if (std::abs(d[a]) < 1e-15) {
            if (o[a] < lo || o[a] > hi) return std::nullopt;
            continue;
        }
        double t0 = (lo - o[a]) / d[a];
        double t1 = (hi - o[a]) / d[a];
        if (t0 > t1) std::swap(t0, t1);
        t_enter = std::max(t_enter, t0);
        t_exit = std::min(t_exit, t1);
    }
    if (t_enter > t_exit || t_enter <= kRayEps) {
        return std::nullopt;
    }
    return t_enter;
}

std::optional<double> intersect_cylinder(const Primitive& prim, const Eigen::Vector3d& center,
                                         const Eigen::Vector3d& o, const Eigen::Vector3d& d) {
    const Eigen::Vector2d oc(o.x() - center.x(), o.y() - center.y());
    const Eigen::Vector2d dd(d.x(), d.y());
    const double a = dd.squaredNorm();
    if (a < 1e-15) {
        return std::nullopt;
    }
    const double b = 2.0 * oc.dot(dd);
    const double c = oc.squaredNorm() - prim.radius * prim.radius;
    const double disc = b * b - 4.0 * a * c;
    if (disc < 0.0) {
        return std::nullopt;
    }
    const double sq = std::sqrt(disc);
    for (double t : {(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)}) {
        if (t <= kRayEps) continue;
        if (std::abs(o.z() + t * d.z() - center.z()) <= prim.half_height) {
            return t;
        }
    }
    return std::nullopt;
}

Eigen::Vector3d posed_center(const Primitive& prim, int frame) {
    return prim.center + static_cast<double>(frame) * prim.motion;
}

std::optional<double> intersect(const Primitive& prim, int frame, const Eigen::Vector3d& o,
                                const Eigen::Vector3d& d) {
    const Eigen::Vector3d center = posed_center(prim, frame);
    switch (prim.type) {
        case Primitive::Type::kPlane:
            return intersect_plane(prim, center, o, d);
        case Primitive::Type::kBox:
            return intersect_box(prim, center, o, d);
        case Primitive::Type::kCylinder:
            return intersect_cylinder(prim, center, o, d);
    }
    return std::nullopt;
}

}  // namespace

double surface_distance(const Primitive& prim, int frame, const Eigen::Vector3d& p_world) {
    const Eigen::Vector3d center = posed_center(prim, frame);
    switch (prim.type) {
        case Primitive::Type::kPlane:
            return std::abs(prim.normal.dot(p_world - center));
        case Primitive::Type::kBox: {
            const Eigen::Vector3d q =
                (p_world - center).cwiseAbs() - prim.half_extents;
            const double outside = q.cwiseMax(0.0).norm();
            const double inside = std::min(q.maxCoeff(), 0.0);
            return std::abs(outside + inside);
        }
        case Primitive::Type::kCylinder: {
            const double radial =
                std::hypot(p_world.x() - center.x(), p_world.y() - center.y());
            return std::abs(radial - prim.radius);
        }
    }
    return 0.0;
}

std::pair<Scan, Pose> render_scene(const SceneSpec& spec, int frame) {
    if (frame < 0 || static_cast<std::size_t>(frame) >= spec.trajectory.size()) {
        throw Error("frame index out of range");
    }
    const Pose gt = spec.trajectory[frame];

    Twist sweep_twist;  // zero: static exposure
    if (spec.sweep && frame > 0) {
        sweep_twist = log_map(spec.trajectory[frame - 1].inverse() * gt);
    }

    const SensorModel& sensor = spec.sensor;
    const int n_cols = std::max(1, static_cast<int>(std::lround(360.0 / sensor.horizontal_res_deg)));
    const int n_rows = std::max(1, sensor.beams);
    const double el_min = -0.5 * sensor.vertical_fov_deg * std::numbers::pi / 180.0;
    const double el_step = n_rows > 1
                               ? sensor.vertical_fov_deg * std::numbers::pi / 180.0 /
                                     static_cast<double>(n_rows - 1)
                               : 0.0;

    std::vector<Scan> columns(n_cols);
#pragma omp parallel for schedule(static)
    for (int col = 0; col < n_cols; ++col) {
        const double rel_time =
            n_cols > 1 ? static_cast<double>(col) / static_cast<double>(n_cols - 1) : 1.0;
        const double az = -std::numbers::pi +
                          col * (2.0 * std::numbers::pi / static_cast<double>(n_cols));
        // Pose of the sensor when this column fires, referenced to scan end.
        const Pose column_pose = gt * exp_map(sweep_twist.scaled(rel_time - 1.0));
        Scan& out = columns[col];
        for (int row = 0; row < n_rows; ++row) {
            const double el = el_min + row * el_step;
            const Eigen::Vector3d dir_sensor(std::cos(el) * std::cos(az),
                                             std::cos(el) * std::sin(az), std::sin(el));
            const Eigen::Vector3d o = column_pose.translation;
            const Eigen::Vector3d d = column_pose.rotation * dir_sensor;

            double best_t = std::numeric_limits<double>::infinity();
            std::uint16_t best_label = kUnlabeled;
            for (const Primitive& prim : spec.primitives) {
                if (const auto t = intersect(prim, frame, o, d); t && *t < best_t) {
                    best_t = *t;
                    best_label = prim.label;
                }
            }
            if (!std::isfinite(best_t) || best_t > sensor.max_range) {
                continue;
            }
            double range = best_t;
            if (spec.noise_sigma > 0.0) {
                range += spec.noise_sigma *
                         truncated_gaussian(spec.seed, static_cast<std::uint64_t>(frame),
                                            static_cast<std::uint64_t>(row),
                                            static_cast<std::uint64_t>(col));
            }
            out.push_back(range * dir_sensor, best_label, rel_time);
        }
    }

    Scan scan;
    for (const Scan& column : columns) {
        scan.positions.insert(scan.positions.end(), column.positions.begin(),
                              column.positions.end());
        scan.labels.insert(scan.labels.end(), column.labels.begin(), column.labels.end());
        scan.rel_times.insert(scan.rel_times.end(), column.rel_times.begin(),
                              column.rel_times.end());
    }
    return {std::move(scan), gt};
}

namespace {

Pose pose_from_xyz_ypr(double x, double y, double z, double yaw_deg, double pitch_deg,
                       double roll_deg) {
    const double d2r = std::numbers::pi / 180.0;
    Pose pose;
    pose.translation = Eigen::Vector3d(x, y, z);
    pose.rotation = (Eigen::AngleAxisd(yaw_deg * d2r, Eigen::Vector3d::UnitZ()) *
                     Eigen::AngleAxisd(pitch_deg * d2r, Eigen::Vector3d::UnitY()) *
                     Eigen::AngleAxisd(roll_deg * d2r, Eigen::Vector3d::UnitX()))
                        .toRotationMatrix();
    return pose;
}

double expect_number(std::istringstream& ss, const std::string& context) {
    double v = 0.0;
    if (!(ss >> v)) {
        throw MalformedFile("scene spec: missing number in " + context);
    }
    return v;
}

/// key=value tokens trailing a primitive line: class=<k> and motion=<dx> dy dz.
void parse_primitive_tail(std::istringstream& ss, Primitive& prim) {
    std::string token;
    while (ss >> token) {
        if (token.rfind("class=", 0) == 0) {
            prim.label = static_cast<std::uint16_t>(std::stoi(token.substr(6)));
        } else if (token.rfind("motion=", 0) == 0) {
            prim.motion.x() = std::stod(token.substr(7));
            prim.motion.y() = expect_number(ss, "motion");
            prim.motion.z() = expect_number(ss, "motion");
        } else {
            throw MalformedFile("scene spec: unknown primitive attribute '" + token + "'");
        }
    }
}

}  // namespace

SceneSpec load_scene_spec(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) {
        throw IoError("cannot open scene spec " + file.string());
    }
    SceneSpec spec;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        std::istringstream ss(line);
        std::string head;
        if (!(ss >> head)) {
            continue;
        }
        try {
            if (head == "sensor") {
                std::string token;
                while (ss >> token) {
                    const auto eq = token.find('=');
                    if (eq == std::string::npos) {
                        throw MalformedFile("sensor attributes must be key=value");
                    }
                    const std::string key = token.substr(0, eq);
                    const double value = std::stod(token.substr(eq + 1));
                    if (key == "beams") {
                        spec.sensor.beams = static_cast<int>(value);
                    } else if (key == "vfov") {
                        spec.sensor.vertical_fov_deg = value;
                    } else if (key == "hres") {
                        spec.sensor.horizontal_res_deg = value;
                    } else if (key == "max_range") {
                        spec.sensor.max_range = value;
                    } else if (key == "sweep") {
                        spec.sweep = value != 0.0;
                    } else {
                        throw MalformedFile("unknown sensor attribute '" + key + "'");
                    }
                }
            } else if (head == "noise") {
                std::string token;
                while (ss >> token) {
                    const auto eq = token.find('=');
                    if (eq == std::string::npos) {
                        throw MalformedFile("noise attributes must be key=value");
                    }
                    const std::string key = token.substr(0, eq);
                    if (key == "sigma") {
                        spec.noise_sigma = std::stod(token.substr(eq + 1));
                    } else if (key == "seed") {
                        spec.seed = std::stoull(token.substr(eq + 1));
                    } else {
                        throw MalformedFile("unknown noise attribute '" + key + "'");
                    }
                }
            } else if (head == "primitive") {
                std::string type;
                if (!(ss >> type)) {
                    throw MalformedFile("primitive line without type");
                }
                Primitive prim;
                prim.center.x() = expect_number(ss, type);
                prim.center.y() = expect_number(ss, type);
                prim.center.z() = expect_number(ss, type);
                if (type == "plane") {
                    prim.type = Primitive::Type::kPlane;
                    prim.normal.x() = expect_number(ss, type);
                    prim.normal.y() = expect_number(ss, type);
                    prim.normal.z() = expect_number(ss, type);
                    prim.normal.normalize();
                    prim.half_u = expect_number(ss, type);
                    prim.half_v = expect_number(ss, type);
                } else if (type == "box") {
                    prim.type = Primitive::Type::kBox;
                    prim.half_extents.x() = expect_number(ss, type);
                    prim.half_extents.y() = expect_number(ss, type);
                    prim.half_extents.z() = expect_number(ss, type);
                } else if (type == "cylinder") {
                    prim.type = Primitive::Type::kCylinder;
                    prim.radius = expect_number(ss, type);
                    prim.half_height = expect_number(ss, type);
                } else {
                    throw MalformedFile("unknown primitive type '" + type + "'");
                }
                parse_primitive_tail(ss, prim);
                spec.primitives.push_back(prim);
            } else if (head == "pose") {
                const double x = expect_number(ss, head);
                const double y = expect_number(ss, head);
                const double z = expect_number(ss, head);
                double yaw = 0.0, pitch = 0.0, roll = 0.0;
                if (ss >> yaw) {
                    ss >> pitch;
                    ss >> roll;
                }
                spec.trajectory.push_back(pose_from_xyz_ypr(x, y, z, yaw, pitch, roll));
            } else {
                throw MalformedFile("unknown scene directive '" + head + "'");
            }
        } catch (const std::invalid_argument&) {
            throw MalformedFile(file.string() + ":" + std::to_string(line_no) +
                                ": malformed number");
        }
    }
    if (spec.trajectory.empty()) {
        throw MalformedFile(file.string() + ": scene spec has no pose lines");
    }
    return spec;
}

void write_synthetic_dataset(const SceneSpec& spec, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    Trajectory gt;
    for (int frame = 0; frame < static_cast<int>(spec.frame_count()); ++frame) {
        auto [scan, pose] = render_scene(spec, frame);
        gt.poses.push_back(pose);

        std::ostringstream stem;
        stem << std::setw(6) << std::setfill('0') << frame;

        std::ofstream bin(dir / (stem.str() + ".bin"), std::ios::binary);
        std::ofstream lab(dir / (stem.str() + ".label"), std::ios::binary);
        if (!bin || !lab) {
            throw IoError("cannot create output files in " + dir.string());
        }
        for (std::size_t i = 0; i < scan.size(); ++i) {
            const float record[4] = {static_cast<float>(scan.positions[i].x()),
                                     static_cast<float>(scan.positions[i].y()),
                                     static_cast<float>(scan.positions[i].z()), 0.0f};
            bin.write(reinterpret_cast<const char*>(record), sizeof(record));
            const std::uint32_t label = scan.labels[i];
            lab.write(reinterpret_cast<const char*>(&label), sizeof(label));
        }
    }
    write_trajectory_kitti(gt, dir / "gt_poses.txt");
}

}  // namespace socc
