#include "socc/geometry.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>

#include "socc/errors.hpp"

namespace socc {

namespace {

constexpr double kSmallAngle = 1e-8;

Eigen::Matrix3d orthonormalized(const Eigen::Matrix3d& r) {
    return Eigen::Quaterniond(r).normalized().toRotationMatrix();
}

double rotation_drift(const Eigen::Matrix3d& r) {
    return (r * r.transpose() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
}

/// Left Jacobian of SO(3).
Eigen::Matrix3d so3_left_jacobian(const Eigen::Vector3d& w) {
    const double theta = w.norm();
    const Eigen::Matrix3d wx = skew(w);
    double b;  // (1 - cos t) / t^2
    double c;  // (t - sin t) / t^3
    if (theta < kSmallAngle) {
        const double t2 = theta * theta;
        b = 0.5 - t2 / 24.0;
        c = 1.0 / 6.0 - t2 / 120.0;
    } else {
        const double s = std::sin(0.5 * theta);
        b = 2.0 * s * s / (theta * theta);
        c = (theta - std::sin(theta)) / (theta * theta * theta);
    }
    return Eigen::Matrix3d::Identity() + b * wx + c * wx * wx;
}

Eigen::Matrix3d so3_left_jacobian_inverse(const Eigen::Vector3d& w) {
    const double theta = w.norm();
    const Eigen::Matrix3d wx = skew(w);
    double c;
    if (theta < 1e-4) {
        const double t2 = theta * theta;
        c = 1.0 / 12.0 + t2 / 720.0;
    } else {
        c = 1.0 / (theta * theta) -
            (1.0 + std::cos(theta)) / (2.0 * theta * std::sin(theta));
    }
    return Eigen::Matrix3d::Identity() - 0.5 * wx + c * wx * wx;
}

}  // namespace

Eigen::Matrix3d skew(const Eigen::Vector3d& w) {
    Eigen::Matrix3d m;
    m << 0.0, -w.z(), w.y(),  //
        w.z(), 0.0, -w.x(),   //
        -w.y(), w.x(), 0.0;
    return m;
}

Pose Pose::inverse() const {
    Pose out;
    out.rotation = rotation.transpose();
    out.translation = -(out.rotation * translation);
    return out;
}

Pose Pose::operator*(const Pose& rhs) const {
    Pose out;
    out.rotation = rotation * rhs.rotation;
    out.translation = rotation * rhs.translation + translation;
    if (rotation_drift(out.rotation) > 1e-9) {
        out.rotation = orthonormalized(out.rotation);
    }
    return out;
}

double Pose::angle() const {
    const double c = std::clamp(0.5 * (rotation.trace() - 1.0), -1.0, 1.0);
    return std::acos(c);
}

Pose exp_map(const Twist& xi) {
    const double theta = xi.rot.norm();
    const Eigen::Matrix3d wx = skew(xi.rot);
    double a;  // sin t / t
    double b;  // (1 - cos t) / t^2
    if (theta < kSmallAngle) {
        const double t2 = theta * theta;
        a = 1.0 - t2 / 6.0;
        b = 0.5 - t2 / 24.0;
    } else {
        const double s = std::sin(0.5 * theta);
        a = std::sin(theta) / theta;
        b = 2.0 * s * s / (theta * theta);
    }
    Pose out;
    out.rotation = Eigen::Matrix3d::Identity() + a * wx + b * wx * wx;
    out.translation = so3_left_jacobian(xi.rot) * xi.trans;
    return out;
}

Twist log_map(const Pose& T) {
    // atan2 of (sin, cos) recovered from the matrix is accurate at all angles
    // where the axis is well defined.
    const Eigen::Matrix3d& r = T.rotation;
    Eigen::Vector3d axis_vec(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
    const double sin_theta = 0.5 * axis_vec.norm();
    const double cos_theta = std::clamp(0.5 * (r.trace() - 1.0), -1.0, 1.0);
    const double theta = std::atan2(sin_theta, cos_theta);
    if (theta >= M_PI - 1e-6) {
        throw AngleNearPi();
    }

    Twist xi;
    if (theta < kSmallAngle) {
        xi.rot = 0.5 * axis_vec;
    } else {
        xi.rot = (0.5 * theta / sin_theta) * axis_vec;
    }
    xi.trans = so3_left_jacobian_inverse(xi.rot) * T.translation;
    return xi;
}

void Moments::add(const Eigen::Vector3d& p) {
    count += 1;
    const Eigen::Vector3d delta = p - mean;
    mean += delta / static_cast<double>(count);
    scatter += delta * (p - mean).transpose();
}

Eigen::Matrix3d Moments::covariance() const {
    if (count == 0) {
        return Eigen::Matrix3d::Zero();
    }
    return 0.5 * (scatter + scatter.transpose()) / static_cast<double>(count);
}

Eig3 eig3_symmetric(const Eigen::Matrix3d& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver;
    solver.computeDirect(m);

    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    const Eigen::Matrix3d residual =
        m * solver.eigenvectors() - solver.eigenvectors() * solver.eigenvalues().asDiagonal();
    if (residual.cwiseAbs().maxCoeff() > 1e-9 * scale) {
        solver.compute(m);  // iterative refinement path
    }

    // Eigen sorts ascending; the classification convention is descending.
    Eig3 out;
    for (int i = 0; i < 3; ++i) {
        out.eigenvalues[i] = solver.eigenvalues()[2 - i];
        out.eigenvectors.col(i) = solver.eigenvectors().col(2 - i);
    }
    return out;
}

}  // namespace socc
