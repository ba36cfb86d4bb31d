#include <doctest.h>

#include <filesystem>

#include "ccplan/chain.hpp"
#include "ccplan/rng.hpp"
#include "oracles.hpp"

using namespace ccplan;

namespace {

KinematicChain two_link_unit() {
    KinematicChain c;
    c.dim = 2;
    for (int i = 0; i < 2; ++i) {
        LinkGeometry l;
        l.parent = i - 1;
        l.offset = Vec::Zero(2);
        if (i > 0) l.offset[0] = 1.0;
        l.length = 1.0;
        l.radius = 0.05;
        c.links.push_back(l);
    }
    c.lower = Vec::Constant(2, -kPi);
    c.upper = Vec::Constant(2, kPi);
    c.base = RigidPose::identity(2);
    return c;
}

}  // namespace

TEST_CASE("straight two-link chain reaches (2, 0)") {
    const auto chain = two_link_unit();
    Vec q = Vec::Zero(2);
    const auto fk = forward_kinematics(chain, q);
    CHECK(fk.ee.translation[0] == doctest::Approx(2.0));
    CHECK(fk.ee.translation[1] == doctest::Approx(0.0));
}

TEST_CASE("first joint at pi/2 lifts the chain to (0, 2)") {
    const auto chain = two_link_unit();
    Vec q(2);
    q << kPi / 2, 0.0;
    const auto fk = forward_kinematics(chain, q);
    CHECK(fk.ee.translation[0] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(fk.ee.translation[1] == doctest::Approx(2.0));
}

TEST_CASE("FK matches an independent homogeneous-matrix product") {
    Rng rng(19);
    const auto chain = default_planar_chain();
    for (int trial = 0; trial < 30; ++trial) {
        Vec q(3);
        for (int i = 0; i < 3; ++i) q[i] = rng.uniform(-kPi, kPi);
        const auto fk = forward_kinematics(chain, q);
        const Eigen::Matrix3d T = oracles::homogeneous_fk_2d(chain, q);
        CHECK((fk.ee.translation - T.topRightCorner<2, 1>()).norm() < 1e-12);
        CHECK((fk.ee.rotation - T.topLeftCorner<2, 2>()).norm() < 1e-12);
    }
    const auto spatial = default_spatial_chain();
    for (int trial = 0; trial < 30; ++trial) {
        Vec q(3);
        for (int i = 0; i < 3; ++i) q[i] = rng.uniform(-kPi, kPi);
        const auto fk = forward_kinematics(spatial, q);
        const Eigen::Matrix4d T = oracles::homogeneous_fk_3d(spatial, q);
        CHECK((fk.ee.translation - T.topRightCorner<3, 1>()).norm() < 1e-12);
        CHECK((fk.ee.rotation - T.topLeftCorner<3, 3>()).norm() < 1e-12);
    }
}

TEST_CASE("FK is deterministic bit for bit") {
    const auto chain = default_planar_chain();
    Vec q(3);
    q << 0.3, -1.1, 2.2;
    const auto a = forward_kinematics(chain, q);
    const auto b = forward_kinematics(chain, q);
    CHECK(a.ee.translation[0] == b.ee.translation[0]);
    CHECK(a.ee.translation[1] == b.ee.translation[1]);
    CHECK((a.ee.rotation.array() == b.ee.rotation.array()).all());
}

TEST_CASE("one-link Jacobian column is (0, L, 1)") {
    KinematicChain c;
    LinkGeometry l;
    l.parent = -1;
    l.offset = Vec::Zero(2);
    l.length = 0.7;
    l.radius = 0.05;
    c.dim = 2;
    c.links.push_back(l);
    c.lower = Vec::Constant(1, -kPi);
    c.upper = Vec::Constant(1, kPi);
    c.base = RigidPose::identity(2);
    const Mat J = jacobian(c, Vec::Zero(1));
    CHECK(J(0, 0) == doctest::Approx(0.0));
    CHECK(J(1, 0) == doctest::Approx(0.7));
    CHECK(J(2, 0) == doctest::Approx(1.0));
}

TEST_CASE("Jacobian matches finite differences of the pose vector") {
    Rng rng(23);
    for (const bool spatial : {false, true}) {
        const auto chain = spatial ? default_spatial_chain() : default_planar_chain();
        int checked = 0;
        for (int trial = 0; trial < 140 && checked < 100; ++trial) {
            Vec q(3);
            for (int i = 0; i < 3; ++i) q[i] = rng.uniform(-2.5, 2.5);
            // Keep away from the rotvec branch cut where the parameterization
            // itself is discontinuous.
            if (spatial && ee_pose_vector(chain, q).tail<3>().norm() > 2.8) continue;
            const Mat J = jacobian(chain, q);
            const Mat J_fd = oracles::fd_jacobian(
                [&](const Vec& qq) { return ee_pose_vector(chain, qq); }, q, 1e-6);
            const double rel = (J - J_fd).norm() / std::max(1.0, J.norm());
            CHECK(rel < 1e-5);
            ++checked;
        }
        CHECK(checked >= 100);
    }
}

TEST_CASE("collinear configuration is rank deficient and raises nothing") {
    const auto chain = default_planar_chain();
    const Mat J = jacobian(chain, Vec::Zero(3));
    Eigen::JacobiSVD<Mat> svd(J);
    int rank = 0;
    for (int i = 0; i < svd.singularValues().size(); ++i) {
        if (svd.singularValues()[i] > 1e-9) ++rank;
    }
    CHECK(rank < chain.pose_dim());
}

TEST_CASE("link point distances: axis point and offset sphere") {
    const auto chain = default_planar_chain();
    const Vec q = Vec::Zero(3);
    Vec on_axis(2);
    on_axis << 0.25, 0.0;  // middle of link 0
    const Vec d0 = link_point_distances(chain, q, on_axis);
    CHECK(d0[0] == doctest::Approx(-0.05));
    Vec offset(2);
    offset << 0.25, 0.10;  // radius + 0.05 away from the axis
    const Vec d1 = link_point_distances(chain, q, offset);
    CHECK(d1[0] == doctest::Approx(0.05));
}

TEST_CASE("link point distances match dense segment sampling") {
    Rng rng(31);
    const auto chain = default_planar_chain();
    for (int trial = 0; trial < 10; ++trial) {
        Vec q(3), x(2);
        for (int i = 0; i < 3; ++i) q[i] = rng.uniform(-kPi, kPi);
        x << rng.uniform(-1.3, 1.3), rng.uniform(-1.3, 1.3);
        const Vec d = link_point_distances(chain, q, x);
        const auto segs = link_segments(chain, forward_kinematics(chain, q));
        for (int k = 0; k < 3; ++k) {
            const double want = oracles::dense_capsule_distance(x, segs[k].a, segs[k].b,
                                                                segs[k].radius);
            CHECK(std::abs(d[k] - want) <= 1e-4);
        }
    }
}

TEST_CASE("distance oracle is invariant under joint rigid transforms") {
    Rng rng(37);
    for (int trial = 0; trial < 20; ++trial) {
        auto chain = default_planar_chain();
        Vec q(3), x(2);
        for (int i = 0; i < 3; ++i) q[i] = rng.uniform(-kPi, kPi);
        x << rng.uniform(-1, 1), rng.uniform(-1, 1);
        const Vec base_d = link_point_distances(chain, q, x);

        const double ang = rng.uniform(-kPi, kPi);
        Vec shift(2);
        shift << rng.uniform(-2, 2), rng.uniform(-2, 2);
        RigidPose xform{rot2(ang), shift};
        chain.base = xform.compose(chain.base);
        const Vec moved_d = link_point_distances(chain, q, xform.apply(x));
        CHECK((base_d - moved_d).lpNorm<Eigen::Infinity>() < 1e-12);
    }
}

TEST_CASE("signed distance is 1-Lipschitz in the query point") {
    Rng rng(41);
    const auto chain = default_planar_chain();
    for (int trial = 0; trial < 200; ++trial) {
        Vec q(3), x(2), y(2);
        for (int i = 0; i < 3; ++i) q[i] = rng.uniform(-kPi, kPi);
        for (int i = 0; i < 2; ++i) {
            x[i] = rng.uniform(-1.5, 1.5);
            y[i] = rng.uniform(-1.5, 1.5);
        }
        const Vec dx = link_point_distances(chain, q, x);
        const Vec dy = link_point_distances(chain, q, y);
        CHECK((dx - dy).lpNorm<Eigen::Infinity>() <= (x - y).norm() + 1e-12);
    }
}

TEST_CASE("analytic distance gradients match finite differences") {
    Rng rng(43);
    const auto chain = default_planar_chain();
    for (int trial = 0; trial < 40; ++trial) {
        Vec q(3), x(2);
        for (int i = 0; i < 3; ++i) q[i] = rng.uniform(-kPi, kPi);
        x << rng.uniform(-1.2, 1.2), rng.uniform(-1.2, 1.2);
        if (link_point_distances(chain, q, x).minCoeff() < 0.01) continue;  // stay off kinks
        const Mat G = link_point_distance_gradients(chain, q, x);
        const Mat G_fd = oracles::fd_jacobian(
            [&](const Vec& qq) { return link_point_distances(chain, qq, x); }, q, 1e-6);
        CHECK((G - G_fd).lpNorm<Eigen::Infinity>() < 1e-5);
    }
}

TEST_CASE("chain JSON round trip") {
    const auto chain = default_planar_chain();
    const auto path = std::filesystem::temp_directory_path() / "ccplan_chain_test.json";
    save_chain(chain, path.string());
    const auto loaded = load_chain(path.string());
    CHECK(loaded.dim == chain.dim);
    CHECK(loaded.joints() == chain.joints());
    CHECK(loaded.links[1].length == doctest::Approx(0.4));
    CHECK(loaded.links[2].radius == doctest::Approx(0.05));
    Vec q(3);
    q << 0.4, -0.9, 1.7;
    CHECK((ee_pose_vector(loaded, q) - ee_pose_vector(chain, q)).norm() < 1e-12);
    std::filesystem::remove(path);
}

TEST_CASE("dimension mismatch raises") {
    const auto chain = default_planar_chain();
    CHECK_THROWS_AS(forward_kinematics(chain, Vec::Zero(2)), std::invalid_argument);
    CHECK_THROWS_AS(link_point_distances(chain, Vec::Zero(3), Vec::Zero(3)), std::invalid_argument);
}
