#pragma once

#include <Eigen/Core>

#include <cstdint>

namespace socc {

using Vector6d = Eigen::Matrix<double, 6, 1>;
using Matrix6d = Eigen::Matrix<double, 6, 6>;

Eigen::Matrix3d skew(const Eigen::Vector3d& w);

/// Rigid transform in SE(3). Composition re-orthonormalizes the rotation
/// whenever accumulated drift exceeds 1e-9, so arbitrarily long pose chains
/// stay on the manifold.
struct Pose {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();

    static Pose Identity() { return {}; }

    [[nodiscard]] Pose inverse() const;

    /// Composition this ∘ rhs, drift-checked.
    [[nodiscard]] Pose operator*(const Pose& rhs) const;

    [[nodiscard]] Eigen::Vector3d operator*(const Eigen::Vector3d& p) const {
        return rotation * p + translation;
    }

    /// Rotation angle in [0, pi].
    [[nodiscard]] double angle() const;

    [[nodiscard]] bool is_identity() const {
        return rotation.isIdentity(0.0) && translation.isZero(0.0);
    }
};

/// 6-dof local parameterization of a pose increment.
struct Twist {
    Eigen::Vector3d rot = Eigen::Vector3d::Zero();    // radians
    Eigen::Vector3d trans = Eigen::Vector3d::Zero();  // meters

    [[nodiscard]] Vector6d vector() const {
        Vector6d v;
        v << rot, trans;
        return v;
    }
    static Twist FromVector(const Vector6d& v) { return {v.head<3>(), v.tail<3>()}; }

    [[nodiscard]] double norm() const { return vector().norm(); }

    [[nodiscard]] Twist scaled(double s) const { return {s * rot, s * trans}; }
};

/// SE(3) exponential: Rodrigues rotation plus left-Jacobian translation,
/// with a second-order Taylor fallback below 1e-8 rotation angle.
Pose exp_map(const Twist& xi);

/// Inverse of exp_map. Throws AngleNearPi for rotation angles >= pi - 1e-6.
Twist log_map(const Pose& T);

/// Incremental first and second moments of a 3D point sample. The scatter is
/// the unnormalized sum of outer products of deviations from the mean, which
/// merges exactly and denormalizes cheaply.
struct Moments {
    std::uint64_t count = 0;
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    Eigen::Matrix3d scatter = Eigen::Matrix3d::Zero();

    /// Welford single-pass update.
    void add(const Eigen::Vector3d& p);

    /// Symmetrized scatter / count. Zero matrix while empty.
    [[nodiscard]] Eigen::Matrix3d covariance() const;
};

struct Eig3 {
    Eigen::Vector3d eigenvalues;   // sorted descending
    Eigen::Matrix3d eigenvectors;  // columns, orthonormal, matching order
};

/// Symmetric 3x3 eigendecomposition: closed-form solve with an iterative
/// fallback when the direct path loses accuracy. Caller symmetrizes.
Eig3 eig3_symmetric(const Eigen::Matrix3d& m);

}  // namespace socc
