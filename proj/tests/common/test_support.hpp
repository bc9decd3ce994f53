#pragma once

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Geometry>

#include "socc/geometry.hpp"
#include "socc/occupancy_grid.hpp"
#include "socc/pipeline.hpp"
#include "socc/scan.hpp"
#include "socc/synth.hpp"

namespace socc::test {

inline Eigen::Vector3d random_vector(std::mt19937_64& g, double lo, double hi) {
    std::uniform_real_distribution<double> dist(lo, hi);
    return {dist(g), dist(g), dist(g)};
}

/// Uniform random rotation from a normalized 4-Gaussian quaternion.
inline Eigen::Matrix3d random_rotation(std::mt19937_64& g) {
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::Quaterniond q(n(g), n(g), n(g), n(g));
    q.normalize();
    return q.toRotationMatrix();
}

/// Rotation of at most max_angle radians around a random axis.
inline Eigen::Matrix3d random_small_rotation(std::mt19937_64& g, double max_angle) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::Vector3d axis = random_vector(g, -1.0, 1.0);
    while (axis.norm() < 1e-6) {
        axis = random_vector(g, -1.0, 1.0);
    }
    return Eigen::AngleAxisd(max_angle * u(g), axis.normalized()).toRotationMatrix();
}

inline Pose random_pose(std::mt19937_64& g, double trans_range = 5.0) {
    return {random_rotation(g), random_vector(g, -trans_range, trans_range)};
}

inline Twist random_twist(std::mt19937_64& g, double max_rot = 3.0, double max_trans = 5.0) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Eigen::Vector3d axis = random_vector(g, -1.0, 1.0).normalized();
    return {max_rot * u(g) * axis, random_vector(g, -max_trans, max_trans)};
}

/// Flat rectangular patch sampled on a regular grid; the workhorse for
/// constructing maps whose surfaces are known analytically.
struct Panel {
    Eigen::Vector3d center;
    Eigen::Vector3d normal;  // unit
    double half_u = 1.5;
    double half_v = 1.5;
    std::uint16_t label = 1;
};

inline void panel_axes(const Eigen::Vector3d& n, Eigen::Vector3d& u, Eigen::Vector3d& v) {
    int least = 0;
    for (int i = 1; i < 3; ++i) {
        if (std::abs(n[i]) < std::abs(n[least])) least = i;
    }
    u = n.cross(Eigen::Vector3d::Unit(least)).normalized();
    v = n.cross(u);
}

/// Grid sampling of the panels with a fixed in-plane phase offset; different
/// offsets give distinct but exactly coplanar point sets.
inline Scan sample_panels(const std::vector<Panel>& panels, double spacing,
                          double phase_u = 0.0, double phase_v = 0.0) {
    Scan scan;
    for (const Panel& panel : panels) {
        Eigen::Vector3d u, v;
        panel_axes(panel.normal, u, v);
        for (double a = -panel.half_u + phase_u; a <= panel.half_u; a += spacing) {
            for (double b = -panel.half_v + phase_v; b <= panel.half_v; b += spacing) {
                scan.push_back(panel.center + a * u + b * v, panel.label);
            }
        }
    }
    return scan;
}

/// Map built from one dense pass over the panels (hits only).
inline OccupancyGrid panel_grid(const std::vector<Panel>& panels, MappingConfig cfg,
                                double spacing = 0.11) {
    OccupancyGrid grid(cfg);
    grid.integrate_scan(Eigen::Vector3d::Zero(), sample_panels(panels, spacing),
                        /*free_space_updates=*/false);
    return grid;
}

/// Eight well-separated panels with varied normals; every voxel is planar and
/// the pose is fully constrained.
inline std::vector<Panel> structured_panels() {
    const double s = std::sqrt(0.5);
    return {
        {{6.0, 0.0, 2.0}, {-1.0, 0.0, 0.0}, 1.5, 1.5, 1},
        {{-6.0, 0.0, 2.0}, {1.0, 0.0, 0.0}, 1.5, 1.5, 1},
        {{0.0, 6.0, 2.0}, {0.0, -1.0, 0.0}, 1.5, 1.5, 2},
        {{0.0, -6.0, 2.0}, {0.0, 1.0, 0.0}, 1.5, 1.5, 2},
        {{0.0, 0.0, -2.0}, {0.0, 0.0, 1.0}, 2.0, 2.0, 3},
        {{0.0, 0.0, 6.0}, {0.0, 0.0, -1.0}, 2.0, 2.0, 3},
        {{4.0, -4.0, 2.0}, {-s, 0.0, s}, 1.2, 1.2, 4},
        {{-4.0, 4.0, 2.0}, {0.0, s, -s}, 1.2, 1.2, 4},
    };
}

/// Textured room: floor, four walls, and a few interior obstacles. The
/// sensor travels along +x through the middle.
inline SceneSpec room_scene(int frames, double step, double noise_sigma, bool sweep,
                            std::uint64_t seed = 7) {
    SceneSpec spec;
    spec.noise_sigma = noise_sigma;
    spec.seed = seed;
    spec.sweep = sweep;
    spec.sensor = {24, 40.0, 1.5, 60.0};

    const double length = std::max(20.0, step * frames + 20.0);
    const double half_len = 0.5 * length;
    const double cx = 0.5 * step * (frames - 1);
    auto plane = [&](Eigen::Vector3d c, Eigen::Vector3d n, double hu, double hv,
                     std::uint16_t label) {
        Primitive p;
        p.type = Primitive::Type::kPlane;
        p.center = std::move(c);
        p.normal = std::move(n);
        p.half_u = hu;
        p.half_v = hv;
        p.label = label;
        return p;
    };
    spec.primitives.push_back(plane({cx, 0, 0}, {0, 0, 1}, half_len + 5, 6, 9));   // floor
    spec.primitives.push_back(plane({cx, 5, 1.75}, {0, -1, 0}, 1.75, half_len + 5, 13));
    spec.primitives.push_back(plane({cx, -5, 1.75}, {0, 1, 0}, 1.75, half_len + 5, 13));
    spec.primitives.push_back(plane({cx + half_len + 4, 0, 1.75}, {-1, 0, 0}, 1.75, 6, 13));
    spec.primitives.push_back(plane({cx - half_len - 4, 0, 1.75}, {1, 0, 0}, 1.75, 6, 13));
    // interior texture
    for (int i = 0; i < 6; ++i) {
        Primitive box;
        box.type = Primitive::Type::kBox;
        const double x = cx - half_len + 3.0 + i * (length / 6.0);
        box.center = {x, (i % 2 == 0) ? 2.5 : -2.5, 0.6};
        box.half_extents = {0.4, 0.4, 0.6};
        box.label = 13;
        spec.primitives.push_back(box);
        Primitive cyl;
        cyl.type = Primitive::Type::kCylinder;
        cyl.center = {x + 1.5, (i % 2 == 0) ? -3.2 : 3.2, 1.0};
        cyl.radius = 0.25;
        cyl.half_height = 1.0;
        cyl.label = 16;
        spec.primitives.push_back(cyl);
    }
    for (int f = 0; f < frames; ++f) {
        Pose pose;
        pose.translation = {step * f, 0.0, 1.3};
        spec.trajectory.push_back(pose);
    }
    return spec;
}

/// Long corridor: two side walls and a floor, optionally textured with
/// periodic pillars that constrain the longitudinal direction.
inline SceneSpec corridor_scene(int frames, double step, bool pillars, double noise_sigma,
                                bool sweep, std::uint64_t seed = 11) {
    SceneSpec spec;
    spec.noise_sigma = noise_sigma;
    spec.seed = seed;
    spec.sweep = sweep;
    spec.sensor = {24, 35.0, 1.5, 30.0};

    const double path = step * (frames - 1);
    const double x0 = -10.0;
    const double x1 = path + 30.0;
    const double cx = 0.5 * (x0 + x1);
    const double half_len = 0.5 * (x1 - x0);

    auto plane = [&](Eigen::Vector3d c, Eigen::Vector3d n, double hu, double hv,
                     std::uint16_t label) {
        Primitive p;
        p.type = Primitive::Type::kPlane;
        p.center = std::move(c);
        p.normal = std::move(n);
        p.half_u = hu;
        p.half_v = hv;
        p.label = label;
        return p;
    };
    spec.primitives.push_back(plane({cx, 0, 0}, {0, 0, 1}, half_len, 2.0, 9));
    spec.primitives.push_back(plane({cx, 2.0, 1.5}, {0, -1, 0}, 1.5, half_len, 13));
    spec.primitives.push_back(plane({cx, -2.0, 1.5}, {0, 1, 0}, 1.5, half_len, 13));
    if (pillars) {
        for (double x = x0 + 2.0; x < x1; x += 4.0) {
            for (double side : {-1.0, 1.0}) {
                Primitive box;
                box.type = Primitive::Type::kBox;
                box.center = {x, side * 1.65, 1.0};
                box.half_extents = {0.18, 0.18, 1.0};
                box.label = 18;
                spec.primitives.push_back(box);
            }
        }
    }
    for (int f = 0; f < frames; ++f) {
        Pose pose;
        pose.translation = {step * f, 0.0, 1.2};
        spec.trajectory.push_back(pose);
    }
    return spec;
}

/// Endpoint translation error against ground truth.
inline double endpoint_drift(const std::vector<Pose>& est, const std::vector<Pose>& gt) {
    return (est.back().translation - gt.back().translation).norm();
}

}  // namespace socc::test
