#pragma once

#include <Eigen/Dense>

namespace ccplan {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

constexpr double kPi = 3.14159265358979323846;

/// Rigid transform in R^d (d = 2 or 3): x -> rotation * x + translation.
struct RigidPose {
    Mat rotation;     // d x d orthonormal, det +1
    Vec translation;  // d

    static RigidPose identity(int dim);

    int dim() const { return static_cast<int>(translation.size()); }

    Vec apply(const Vec& p) const { return rotation * p + translation; }

    /// this ∘ other: first apply `other`, then this.
    RigidPose compose(const RigidPose& other) const {
        return {rotation * other.rotation, rotation * other.translation + translation};
    }

    RigidPose inverse() const {
        Mat rt = rotation.transpose();
        return {rt, -(rt * translation)};
    }
};

/// Wrap an angle to (-pi, pi].
double wrap_angle(double a);

/// 2x2 rotation matrix.
Eigen::Matrix2d rot2(double angle);

/// Rotation matrix about a unit axis (Rodrigues).
Eigen::Matrix3d axis_angle_matrix(const Eigen::Vector3d& axis, double angle);

/// Rotation vector (axis * angle) of a rotation matrix, angle in [0, pi].
Eigen::Vector3d rotation_log(const Eigen::Matrix3d& R);

/// Inverse of the left Jacobian of SO(3): maps world angular velocity to the
/// time derivative of the rotation vector phi.
Eigen::Matrix3d so3_left_jacobian_inverse(const Eigen::Vector3d& phi);

/// Distance from point p to segment [a, b], plus the clamped parameter t of
/// the closest point a + t (b - a).
double point_segment_distance(const Vec& p, const Vec& a, const Vec& b, double* t_out = nullptr);

/// Signed distance from point p to a capsule (segment [a, b] swept by a
/// sphere of `radius`). Negative iff p is inside the capsule.
double capsule_point_distance(const Vec& p, const Vec& a, const Vec& b, double radius);

}  // namespace ccplan
