#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "common/test_support.hpp"
#include "socc/errors.hpp"
#include "socc/reference.hpp"
#include "socc/registration.hpp"

using namespace socc;

namespace {

VoxelData voxel_from_points(const std::vector<Eigen::Vector3d>& points) {
    VoxelData v;
    for (const Eigen::Vector3d& p : points) {
        v.moments.add(p);
    }
    return v;
}

Correspondence random_correspondence(std::mt19937_64& g, bool planar) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Correspondence c;
    c.source = test::random_vector(g, -5.0, 5.0);
    c.target = c.source + test::random_vector(g, -0.3, 0.3);
    c.kind = planar ? SurfaceKind::kPlanar : SurfaceKind::kNonPlanar;
    if (planar) {
        c.normal = test::random_vector(g, -1.0, 1.0).normalized();
    }
    c.weight = 0.2 + 0.8 * u(g);
    return c;
}

}  // namespace

TEST_CASE("points on a plane classify as planar with the plane normal") {
    std::vector<Eigen::Vector3d> pts;
    for (int i = 0; i < 10; ++i) {
        pts.emplace_back(0.05 * i, 0.04 * ((i * 7) % 10), 0.0);
    }
    const VoxelData v = voxel_from_points(pts);
    const VoxelClassification cls = classify_voxel(v, RegistrationConfig{});
    CHECK(cls.kind == SurfaceKind::kPlanar);
    REQUIRE(cls.surface_variation.has_value());
    CHECK(std::abs(*cls.surface_variation) < 1e-12);
    REQUIRE(cls.normal.has_value());
    CHECK(std::abs(std::abs(cls.normal->z()) - 1.0) < 1e-9);
    CHECK(cls.normal->z() > 0.0);  // sign-canonicalized
}

TEST_CASE("voxels below the point minimum are never planar") {
    std::vector<Eigen::Vector3d> pts = {
        {0.0, 0.0, 0.0}, {0.1, 0.0, 0.0}, {0.0, 0.1, 0.0}, {0.1, 0.1, 0.0}};
    const VoxelData v = voxel_from_points(pts);
    const VoxelClassification cls = classify_voxel(v, RegistrationConfig{});
    CHECK(cls.kind == SurfaceKind::kNonPlanar);
    CHECK_FALSE(cls.surface_variation.has_value());
}

TEST_CASE("isotropic samples sit near the 1/3 ceiling and are non-planar") {
    std::mt19937_64 g(100);
    std::normal_distribution<double> n(0.0, 1.0);
    VoxelData v;
    for (int i = 0; i < 10000; ++i) {
        v.moments.add({n(g), n(g), n(g)});
    }
    const VoxelClassification cls = classify_voxel(v, RegistrationConfig{});
    CHECK(cls.kind == SurfaceKind::kNonPlanar);
    REQUIRE(cls.surface_variation.has_value());
    CHECK(std::abs(*cls.surface_variation - 1.0 / 3.0) < 0.02);
}

TEST_CASE("surface variation is rigid-rotation invariant") {
    std::mt19937_64 g(41);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<Eigen::Vector3d> pts;
        for (int i = 0; i < 200; ++i) {
            // flat-ish pancake: planar but not degenerate
            pts.emplace_back(n(g), 0.7 * n(g), 0.02 * n(g));
        }
        const Eigen::Matrix3d r = test::random_rotation(g);
        std::vector<Eigen::Vector3d> rotated;
        for (const auto& p : pts) rotated.push_back(r * p);

        const RegistrationConfig cfg;
        const VoxelClassification a = classify_voxel(voxel_from_points(pts), cfg);
        const VoxelClassification b = classify_voxel(voxel_from_points(rotated), cfg);
        REQUIRE(a.surface_variation.has_value());
        REQUIRE(b.surface_variation.has_value());
        CHECK(std::abs(*a.surface_variation - *b.surface_variation) < 1e-9);
        REQUIRE(a.normal.has_value());
        REQUIRE(b.normal.has_value());
        const Eigen::Vector3d mapped = r * *a.normal;
        CHECK(std::min((mapped - *b.normal).norm(), (mapped + *b.normal).norm()) < 1e-6);
    }
}

TEST_CASE("Geman-McClure weight values") {
    CHECK(gm_weight(0.0, 0.5) == 1.0);
    CHECK(gm_weight(0.5, 0.5) == doctest::Approx(0.25));
    CHECK(gm_weight(1.0, 0.5) == doctest::Approx(0.04));
    double prev = 1.0;
    for (double r = 0.05; r < 3.0; r += 0.05) {
        const double w = gm_weight(r, 0.5);
        CHECK(w < prev);
        CHECK(w > 0.0);
        prev = w;
    }
}

TEST_CASE("occupancy weight values") {
    CHECK(occ_weight(1.0, 1.5) == 1.0);
    CHECK(occ_weight(0.73, 0.0) == 1.0);
    CHECK(occ_weight(0.5, 1.5) == doctest::Approx(0.353553).epsilon(1e-5));
}

TEST_CASE("semantic weight values") {
    CHECK(sem_weight(3, 3, 1.0, 0.25) == doctest::Approx(1.0));
    CHECK(sem_weight(3, 4, 0.9, 0.25) == doctest::Approx(0.25));
    CHECK(sem_weight(0, 4, 0.6, 0.25) == doctest::Approx(0.70));
    CHECK(sem_weight(4, 0, 0.6, 0.25) == doctest::Approx(0.70));
}

TEST_CASE("mix weight is the planar fraction") {
    CHECK(planar_mix(0, 0) == 0.0);
    CHECK(planar_mix(10, 0) == 1.0);
    CHECK(planar_mix(0, 7) == 0.0);
    CHECK(planar_mix(3, 1) == doctest::Approx(0.75));
}

TEST_CASE("semantics-free configuration reduces to the robust kernel alone") {
    std::mt19937_64 g(6);
    std::vector<Correspondence> corrs;
    for (int i = 0; i < 50; ++i) {
        Correspondence c = random_correspondence(g, i % 2 == 0);
        c.source_class = kUnlabeled;
        c.voxel_label = kUnlabeled;
        c.p_occ = 0.5 + 0.5 * static_cast<double>(g() % 100) / 100.0;
        corrs.push_back(c);
    }
    RegistrationConfig cfg;
    cfg.gamma = 0.0;
    cfg.w_lower = 1.0;
    apply_weights(corrs, cfg, 0.5);
    for (const Correspondence& c : corrs) {
        CHECK(c.weight == c.w_gm);
        CHECK(c.w_occ == 1.0);
        CHECK(c.w_sem == 1.0);
    }
}

TEST_CASE("combined weight stays in (0, 1] and is recomposable") {
    std::mt19937_64 g(61);
    std::vector<Correspondence> corrs;
    for (int i = 0; i < 200; ++i) {
        Correspondence c = random_correspondence(g, i % 3 == 0);
        c.source_class = static_cast<std::uint16_t>(g() % 4);
        c.voxel_label = static_cast<std::uint16_t>(g() % 4);
        c.voxel_label_prob = static_cast<double>(g() % 100) / 100.0;
        c.p_occ = 0.5 + 0.5 * static_cast<double>(g() % 100) / 100.0;
        corrs.push_back(c);
    }
    apply_weights(corrs, RegistrationConfig{}, 0.7);
    for (const Correspondence& c : corrs) {
        CHECK(c.weight > 0.0);
        CHECK(c.weight <= 1.0);
        CHECK(std::abs(c.weight - c.w_gm * c.w_occ * c.w_sem) < 1e-12);
    }
}

TEST_CASE("correspondence search on an empty grid finds nothing") {
    OccupancyGrid grid(MappingConfig{});
    const RegistrationMap map = RegistrationMap::build(grid, RegistrationConfig{});
    const Eigen::Vector3d p(0.0, 0.0, 0.0);
    const std::uint16_t c = 0;
    CHECK(find_correspondences({&p, 1}, {&c, 1}, map, 1.0).empty());
}

TEST_CASE("threshold boundary keeps and drops correctly") {
    OccupancyGrid grid(MappingConfig{});
    Scan seed;
    seed.push_back({0.2, 0.2, 0.2}, 1);
    grid.integrate_scan(Eigen::Vector3d::Zero(), seed, false);
    const RegistrationMap map = RegistrationMap::build(grid, RegistrationConfig{});
    const Eigen::Vector3d anchor(0.2, 0.2, 0.2);
    const double tau = 0.7;

    const Eigen::Vector3d near = anchor + Eigen::Vector3d(tau - 1e-9, 0.0, 0.0);
    const Eigen::Vector3d far = anchor + Eigen::Vector3d(tau + 1e-9, 0.0, 0.0);
    const std::uint16_t cls = 0;
    CHECK(find_correspondences({&near, 1}, {&cls, 1}, map, tau).size() == 1);
    CHECK(find_correspondences({&far, 1}, {&cls, 1}, map, tau).empty());
}

TEST_CASE("shell search equals the brute-force oracle") {
    std::mt19937_64 g(77);
    for (int instance = 0; instance < 10; ++instance) {
        OccupancyGrid grid(MappingConfig{});
        Scan cloud;
        const int voxels = 100 + static_cast<int>(g() % 400);
        for (int i = 0; i < voxels; ++i) {
            cloud.push_back(test::random_vector(g, -7.0, 7.0),
                            static_cast<std::uint16_t>(g() % 5));
        }
        grid.integrate_scan(Eigen::Vector3d::Zero(), cloud, false);
        const RegistrationMap map = RegistrationMap::build(grid, RegistrationConfig{});

        std::vector<Eigen::Vector3d> queries;
        std::vector<std::uint16_t> classes;
        for (int i = 0; i < 200; ++i) {
            queries.push_back(test::random_vector(g, -8.0, 8.0));
            classes.push_back(static_cast<std::uint16_t>(g() % 5));
        }
        for (double tau : {0.4, 1.1, 2.7}) {
            const auto fast = find_correspondences(queries, classes, map, tau);
            const auto brute = ref::find_correspondences_brute(queries, classes, map, tau);
            REQUIRE(fast.size() == brute.size());
            for (std::size_t i = 0; i < fast.size(); ++i) {
                CHECK(fast[i].source == brute[i].source);
                CHECK(fast[i].target == brute[i].target);
                CHECK(fast[i].kind == brute[i].kind);
                CHECK(fast[i].p_occ == brute[i].p_occ);
                CHECK(fast[i].voxel_label == brute[i].voxel_label);
            }
        }
    }
}

TEST_CASE("zero residuals give a zero gradient and zero cost") {
    std::mt19937_64 g(8);
    std::vector<Correspondence> corrs;
    for (int i = 0; i < 30; ++i) {
        Correspondence c = random_correspondence(g, i % 2 == 0);
        c.target = c.source;
        corrs.push_back(c);
    }
    const NormalEquations eq = accumulate_system(corrs, 0.5);
    CHECK(eq.g.norm() < 1e-12);
    CHECK(eq.cost == 0.0);
}

TEST_CASE("a single point-to-point residual costs its squared norm") {
    Correspondence c;
    c.source = Eigen::Vector3d(1.0, 2.0, 3.0) + Eigen::Vector3d(0.25, 0.0, 0.0);
    c.target = {1.0, 2.0, 3.0};
    c.kind = SurfaceKind::kNonPlanar;
    c.weight = 1.0;
    const NormalEquations eq = accumulate_system({&c, 1}, 0.0);
    CHECK(eq.cost == doctest::Approx(0.25 * 0.25).epsilon(1e-12));
}

TEST_CASE("analytic Jacobians match central finite differences") {
    std::mt19937_64 g(3);
    const double h = 1e-6;
    for (int trial = 0; trial < 1000; ++trial) {
        const bool planar = trial % 2 == 0;
        const Correspondence c = random_correspondence(g, planar);

        // analytic rows
        Eigen::Matrix<double, 3, 6> j_pt;
        Vector6d j_pl;
        if (planar) {
            j_pl.head<3>() = c.source.cross(c.normal);
            j_pl.tail<3>() = c.normal;
        } else {
            j_pt.block<3, 3>(0, 0) = -skew(c.source);
            j_pt.block<3, 3>(0, 3) = Eigen::Matrix3d::Identity();
        }

        for (int k = 0; k < 6; ++k) {
            Vector6d xi = Vector6d::Zero();
            xi[k] = h;
            const Eigen::Vector3d plus = exp_map(Twist::FromVector(xi)) * c.source;
            xi[k] = -h;
            const Eigen::Vector3d minus = exp_map(Twist::FromVector(xi)) * c.source;
            if (planar) {
                const double fd =
                    (c.normal.dot(plus - c.target) - c.normal.dot(minus - c.target)) /
                    (2.0 * h);
                CHECK(std::abs(fd - j_pl[k]) / std::max(1.0, std::abs(j_pl[k])) < 1e-5);
            } else {
                const Eigen::Vector3d fd = (plus - minus) / (2.0 * h);
                for (int row = 0; row < 3; ++row) {
                    CHECK(std::abs(fd[row] - j_pt(row, k)) /
                              std::max(1.0, std::abs(j_pt(row, k))) <
                          1e-5);
                }
            }
        }
    }
}

TEST_CASE("an untextured corridor raises DegenerateSystem") {
    std::mt19937_64 g(13);
    std::uniform_real_distribution<double> u(-8.0, 8.0);
    std::vector<Correspondence> corrs;
    for (int i = 0; i < 200; ++i) {
        Correspondence c;
        const int which = static_cast<int>(g() % 3);
        const double x = u(g);
        if (which == 0) {  // floor
            c.source = {x, 0.4 * u(g), 0.0};
            c.normal = {0.0, 0.0, 1.0};
        } else {  // side walls
            c.source = {x, which == 1 ? 2.0 : -2.0, 0.2 * u(g) + 1.5};
            c.normal = {0.0, which == 1 ? -1.0 : 1.0, 0.0};
        }
        c.target = c.source;
        c.kind = SurfaceKind::kPlanar;
        corrs.push_back(c);
    }
    CHECK_THROWS_AS(build_system(corrs, 1.0), DegenerateSystem);
}

TEST_CASE("registering an aligned scan is a fixed point") {
    const auto panels = test::structured_panels();
    const OccupancyGrid grid = test::panel_grid(panels, MappingConfig{});
    Scan scan = test::sample_panels(panels, 0.17, 0.03, 0.05);

    const RegistrationResult res =
        register_scan(scan, grid, Pose::Identity(), 1.0, RegistrationConfig{});
    CHECK(res.iterations.size() <= 2);
    CHECK(res.pose.translation.norm() < 1e-9);
    CHECK(res.pose.angle() < 1e-9);
}

TEST_CASE("registration recovers random rigid perturbations exactly") {
    const auto panels = test::structured_panels();
    const OccupancyGrid grid = test::panel_grid(panels, MappingConfig{});
    const Scan scan_world = test::sample_panels(panels, 0.17, 0.03, 0.05);

    std::mt19937_64 g(2025);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
        Pose truth;
        truth.rotation = test::random_small_rotation(g, 3.0 * std::numbers::pi / 180.0);
        truth.translation = 0.3 * test::random_vector(g, -1.0, 1.0).normalized() *
                            std::abs(u(g));
        const Scan scan_sensor = scan_world.transformed(truth.inverse());

        const RegistrationResult res =
            register_scan(scan_sensor, grid, Pose::Identity(), 1.0, RegistrationConfig{});
        const Pose err = res.pose.inverse() * truth;
        CHECK(err.translation.norm() < 1e-3);
        CHECK(err.angle() < 0.01 * std::numbers::pi / 180.0);
    }
}

TEST_CASE("a pillar-free corridor converges laterally under damping") {
    // Extents are voxel-aligned so every occupied voxel holds a full planar
    // patch; nothing in the scene constrains the corridor direction.
    std::vector<test::Panel> panels = {
        {{0.0, 0.0, 0.0}, {0.0, 0.0, 1.0}, 2.0, 8.0, 9},    // floor
        {{0.0, 2.0, 1.5}, {0.0, -1.0, 0.0}, 1.5, 8.0, 13},  // walls
        {{0.0, -2.0, 1.5}, {0.0, 1.0, 0.0}, 1.5, 8.0, 13},
    };
    OccupancyGrid grid(MappingConfig{});
    grid.integrate_scan(Eigen::Vector3d::Zero(),
                        test::sample_panels(panels, 0.1, 0.05, 0.05), false);
    const Scan scan_world = test::sample_panels(panels, 0.19, 0.04, 0.02);

    Pose truth;
    truth.translation = {0.0, 0.08, -0.06};
    truth.rotation =
        Eigen::AngleAxisd(0.01, Eigen::Vector3d(0.3, 1.0, 0.5).normalized()).toRotationMatrix();
    const Scan scan_sensor = scan_world.transformed(truth.inverse());

    const RegistrationResult res =
        register_scan(scan_sensor, grid, Pose::Identity(), 1.0, RegistrationConfig{});

    bool damped = false;
    for (const IterationStats& it : res.iterations) {
        damped = damped || it.damped;
        CHECK(it.mix_alpha == 1.0);  // all-planar scene
    }
    CHECK(damped);

    const Pose err = res.pose.inverse() * truth;
    CHECK(std::abs(err.translation.y()) < 1e-5);
    CHECK(std::abs(err.translation.z()) < 1e-5);
    CHECK(err.angle() < 1e-4);
}

TEST_CASE("register_scan reports NoCorrespondences beyond the threshold") {
    OccupancyGrid grid(MappingConfig{});
    Scan seed;
    seed.push_back({20.0, 0.0, 0.0}, 1);
    grid.integrate_scan({19.0, 0.0, 0.0}, seed, false);

    Scan scan;
    scan.push_back({0.0, 0.0, 0.0}, 0);
    CHECK_THROWS_AS(
        register_scan(scan, grid, Pose::Identity(), 0.5, RegistrationConfig{}),
        NoCorrespondences);
}

TEST_CASE("an empty grid returns the initial guess with no iterations") {
    OccupancyGrid grid(MappingConfig{});
    Scan scan;
    scan.push_back({1.0, 0.0, 0.0}, 0);
    Pose init;
    init.translation = {4.0, 5.0, 6.0};
    const RegistrationResult res =
        register_scan(scan, grid, init, 1.0, RegistrationConfig{});
    CHECK(res.iterations.empty());
    CHECK((res.pose.translation - init.translation).norm() == 0.0);
}
