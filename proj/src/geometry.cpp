#include "ccplan/geometry.hpp"

#include <cmath>

namespace ccplan {

RigidPose RigidPose::identity(int dim) {
    return {Mat::Identity(dim, dim), Vec::Zero(dim)};
}

double wrap_angle(double a) {
    a = std::fmod(a + kPi, 2.0 * kPi);
    if (a <= 0.0) a += 2.0 * kPi;
    return a - kPi;
}

Eigen::Matrix2d rot2(double angle) {
    const double c = std::cos(angle), s = std::sin(angle);
    Eigen::Matrix2d r;
    r << c, -s, s, c;
    return r;
}

Eigen::Matrix3d axis_angle_matrix(const Eigen::Vector3d& axis, double angle) {
    Eigen::Matrix3d k;
    k << 0, -axis.z(), axis.y(), axis.z(), 0, -axis.x(), -axis.y(), axis.x(), 0;
    return Eigen::Matrix3d::Identity() + std::sin(angle) * k + (1.0 - std::cos(angle)) * k * k;
}

Eigen::Vector3d rotation_log(const Eigen::Matrix3d& R) {
    const double tr = R.trace();
    const double cos_theta = std::clamp(0.5 * (tr - 1.0), -1.0, 1.0);
    const double theta = std::acos(cos_theta);
    Eigen::Vector3d w(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
    if (theta < 1e-10) return 0.5 * w;  // first-order
    if (theta > kPi - 1e-6) {
        // Near pi the off-diagonal difference vanishes; recover the axis from
        // the symmetric part instead.
        Eigen::Matrix3d s = 0.5 * (R + Eigen::Matrix3d::Identity());
        Eigen::Vector3d axis;
        int k = 0;
        s.diagonal().maxCoeff(&k);
        axis = s.col(k) / std::sqrt(std::max(s(k, k), 1e-12));
        axis.normalize();
        // Fix the sign using the skew part when it is not exactly zero.
        if (axis.dot(w) < 0.0) axis = -axis;
        return theta * axis;
    }
    return (theta / (2.0 * std::sin(theta))) * w;
}

Eigen::Matrix3d so3_left_jacobian_inverse(const Eigen::Vector3d& phi) {
    const double theta = phi.norm();
    Eigen::Matrix3d k;
    k << 0, -phi.z(), phi.y(), phi.z(), 0, -phi.x(), -phi.y(), phi.x(), 0;
    if (theta < 1e-6) {
        return Eigen::Matrix3d::Identity() - 0.5 * k + (1.0 / 12.0) * k * k;
    }
    const double c = 1.0 / (theta * theta) -
                     (1.0 + std::cos(theta)) / (2.0 * theta * std::sin(theta));
    return Eigen::Matrix3d::Identity() - 0.5 * k + c * k * k;
}

double point_segment_distance(const Vec& p, const Vec& a, const Vec& b, double* t_out) {
    const Vec ab = b - a;
    const double len2 = ab.squaredNorm();
    double t = 0.0;
    if (len2 > 0.0) t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
    if (t_out) *t_out = t;
    return (p - (a + t * ab)).norm();
}

double capsule_point_distance(const Vec& p, const Vec& a, const Vec& b, double radius) {
    return point_segment_distance(p, a, b) - radius;
}

}  // namespace ccplan
