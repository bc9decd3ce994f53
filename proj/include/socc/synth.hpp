#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "socc/geometry.hpp"
#include "socc/scan.hpp"

namespace socc {

/// Analytic scene primitive. Planes are rectangles spanned around the center
/// (non-positive half extents mean unbounded), boxes are axis-aligned, and
/// cylinders are z-aligned lateral surfaces. motion is a rigid per-frame
/// translation for dynamic objects.
struct Primitive {
    enum class Type { kPlane, kBox, kCylinder };
    Type type = Type::kPlane;
    Eigen::Vector3d center = Eigen::Vector3d::Zero();
    Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();       // plane
    double half_u = 0.0;
    double half_v = 0.0;
    Eigen::Vector3d half_extents = Eigen::Vector3d::Zero();  // box
    double radius = 0.0;                                     // cylinder
    double half_height = 0.0;
    std::uint16_t label = kUnlabeled;
    Eigen::Vector3d motion = Eigen::Vector3d::Zero();
};

struct SensorModel {
    int beams = 32;                   // vertical channels
    double vertical_fov_deg = 30.0;   // symmetric around the horizon
    double horizontal_res_deg = 1.0;  // azimuth step
    double max_range = 50.0;          // meters
};

struct SceneSpec {
    std::vector<Primitive> primitives;
    SensorModel sensor;
    std::vector<Pose> trajectory;  // ground truth, one pose per frame
    double noise_sigma = 0.0;      // meters along the ray, truncated at 3 sigma
    std::uint64_t seed = 0;
    bool sweep = false;  // simulate intra-scan motion from the previous pose

    [[nodiscard]] std::size_t frame_count() const { return trajectory.size(); }
};

/// Renders one frame: beams cast from the ground-truth pose (interpolated
/// over the sweep when enabled), nearest-hit ranges with truncated Gaussian
/// noise, per-point primitive labels and azimuthal relative timestamps.
/// Points are in the sensor frame. Fully occluded frames come back empty.
std::pair<Scan, Pose> render_scene(const SceneSpec& spec, int frame);

/// Distance from a point to the surface of the primitive as posed at the
/// given frame (the render oracle).
double surface_distance(const Primitive& prim, int frame, const Eigen::Vector3d& p_world);

/// Text scene description: `sensor`, `noise`, `primitive`, and `pose` lines.
SceneSpec load_scene_spec(const std::filesystem::path& file);

/// Renders all frames of the spec into <dir>/NNNNNN.bin + .label plus the
/// ground-truth trajectory as <dir>/gt_poses.txt.
void write_synthetic_dataset(const SceneSpec& spec, const std::filesystem::path& dir);

}  // namespace socc
