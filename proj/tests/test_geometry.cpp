#include <doctest.h>

#include "ccplan/geometry.hpp"
#include "ccplan/rng.hpp"
#include "oracles.hpp"

using namespace ccplan;

TEST_CASE("point-segment distance basics") {
    Vec a(2), b(2), p(2);
    a << 0, 0;
    b << 1, 0;
    p << 0.5, 0.3;
    CHECK(point_segment_distance(p, a, b) == doctest::Approx(0.3));
    p << -0.4, 0.0;
    CHECK(point_segment_distance(p, a, b) == doctest::Approx(0.4));
    p << 1.3, 0.4;
    CHECK(point_segment_distance(p, a, b) == doctest::Approx(0.5));
    // Degenerate segment.
    CHECK(point_segment_distance(p, a, a) == doctest::Approx(p.norm()));
}

TEST_CASE("capsule distance matches dense sampling on random instances") {
    Rng rng(7);
    for (int trial = 0; trial < 25; ++trial) {
        const int d = trial % 2 == 0 ? 2 : 3;
        Vec a(d), b(d), x(d);
        for (int i = 0; i < d; ++i) {
            a[i] = rng.uniform(-1, 1);
            b[i] = rng.uniform(-1, 1);
            x[i] = rng.uniform(-2, 2);
        }
        const double radius = rng.uniform(0.01, 0.3);
        const double got = capsule_point_distance(x, a, b, radius);
        const double want = oracles::dense_capsule_distance(x, a, b, radius);
        CHECK(got == doctest::Approx(want).epsilon(0).scale(0).epsilon(1e-9).scale(1));
        CHECK(std::abs(got - want) <= 1e-4);
    }
}

TEST_CASE("rotation log/exp round trip") {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        Eigen::Vector3d axis(rng.normal(), rng.normal(), rng.normal());
        axis.normalize();
        const double angle = rng.uniform(-3.0, 3.0);
        const Eigen::Matrix3d R = axis_angle_matrix(axis, angle);
        const Eigen::Vector3d phi = rotation_log(R);
        const Eigen::Matrix3d R2 =
            phi.norm() < 1e-12 ? Eigen::Matrix3d::Identity()
                               : axis_angle_matrix(phi.normalized(), phi.norm());
        CHECK((R - R2).norm() < 1e-8);
    }
}

TEST_CASE("left Jacobian inverse maps angular velocity to rotvec rate") {
    Rng rng(11);
    const double h = 1e-7;
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::Vector3d axis(rng.normal(), rng.normal(), rng.normal());
        axis.normalize();
        const double angle = rng.uniform(0.1, 2.5);
        const Eigen::Matrix3d R = axis_angle_matrix(axis, angle);
        Eigen::Vector3d omega(rng.normal(), rng.normal(), rng.normal());
        // Perturb by a small world-frame rotation omega * h.
        const Eigen::Matrix3d Rp = axis_angle_matrix(omega.normalized(), omega.norm() * h) * R;
        const Eigen::Vector3d dphi_fd = (rotation_log(Rp) - rotation_log(R)) / h;
        const Eigen::Vector3d dphi = so3_left_jacobian_inverse(rotation_log(R)) * omega;
        CHECK((dphi - dphi_fd).norm() < 1e-5 * std::max(1.0, dphi.norm()));
    }
}

TEST_CASE("wrap_angle lands in (-pi, pi]") {
    CHECK(wrap_angle(kPi) == doctest::Approx(kPi));
    CHECK(wrap_angle(-kPi) == doctest::Approx(kPi));
    CHECK(wrap_angle(3 * kPi / 2) == doctest::Approx(-kPi / 2));
    CHECK(wrap_angle(0.25) == doctest::Approx(0.25));
    CHECK(wrap_angle(7.0) == doctest::Approx(7.0 - 2 * kPi));
}
