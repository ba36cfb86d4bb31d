#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <stdexcept>

#include "ccplan/scene.hpp"

using namespace ccplan;

namespace {

Scene small_scene() {
    Scene s;
    s.bounds.lo = Vec::Constant(2, -1.4);
    s.bounds.hi = Vec::Constant(2, 1.4);
    EnvironmentPoint a;
    a.center = Vec::Zero(2);
    a.center << 0.6, 0.2;
    a.radius = 0.03;
    a.sigma = 0.02;
    a.object = 0;
    EnvironmentPoint b;
    b.center = Vec::Zero(2);
    b.center << -0.4, -0.15;
    b.radius = 0.04;
    b.sigma = 0.0;
    s.points = {a, b};
    return s;
}

}  // namespace

TEST_CASE("realization with zero sigma is the identity") {
    Scene s = small_scene();
    for (auto& pt : s.points) pt.sigma = 0.0;
    Rng rng(1);
    const Scene r = sample_scene_realization(s, rng);
    for (std::size_t i = 0; i < s.points.size(); ++i) {
        CHECK((r.points[i].center - s.points[i].center).norm() == 0.0);
        CHECK(r.points[i].radius == s.points[i].radius);
    }
}

TEST_CASE("realization statistics match the generating Gaussian") {
    const Scene s = small_scene();
    Rng rng(99);
    const int draws = 100000;
    Vec sum = Vec::Zero(2), sum_sq = Vec::Zero(2);
    for (int i = 0; i < draws; ++i) {
        const Scene r = sample_scene_realization(s, rng);
        const Vec delta = r.points[0].center - s.points[0].center;
        sum += delta;
        sum_sq += delta.cwiseProduct(delta);
        // Noise-free geometry must never move.
        CHECK((r.points[1].center - s.points[1].center).norm() == 0.0);
    }
    const Vec mean = sum / draws;
    for (int axis = 0; axis < 2; ++axis) {
        const double std_dev = std::sqrt(sum_sq[axis] / draws - mean[axis] * mean[axis]);
        CHECK(std::abs(std_dev - 0.02) < 0.01 * 0.02);                // within 1%
        CHECK(std::abs(mean[axis]) < 3.0 * 0.02 / std::sqrt(draws));  // CLT bound
    }
}

TEST_CASE("zero perturbation reproduces the nominal scene") {
    const auto chain = default_planar_chain();
    Rng rng(7);
    SceneGenConfig sc;
    const Scene nominal = default_tabletop_scene(chain, sc, rng);
    PerturbationSpec spec;
    spec.object_jitter = 0.0;
    spec.object_rot_deg = 0.0;
    spec.base_jitter = 0.0;
    spec.base_rot_deg = 0.0;
    spec.seed = 3;
    const auto problems = generate_problems(chain, nominal, spec, 3);
    for (const auto& p : problems) {
        REQUIRE(p.scene.points.size() == nominal.points.size());
        for (std::size_t i = 0; i < nominal.points.size(); ++i) {
            CHECK((p.scene.points[i].center - nominal.points[i].center).norm() < 1e-12);
        }
        CHECK(!config_in_collision(chain, p.q_start, p.scene));
    }
}

TEST_CASE("paper-protocol perturbation yields distinct scenes and problems") {
    const auto chain = default_planar_chain();
    Rng rng(11);
    SceneGenConfig sc;
    const Scene nominal = default_tabletop_scene(chain, sc, rng);
    PerturbationSpec spec;  // defaults carry the perturbation protocol values
    CHECK(spec.object_jitter == doctest::Approx(0.025));
    CHECK(spec.object_rot_deg == doctest::Approx(15.0));
    CHECK(spec.base_jitter == doctest::Approx(0.10));
    CHECK(spec.base_rot_deg == doctest::Approx(90.0));
    spec.seed = 21;
    const auto problems = generate_problems(chain, nominal, spec, 50);
    CHECK(problems.size() == 50);
    int distinct = 0;
    for (std::size_t i = 1; i < problems.size(); ++i) {
        if ((problems[i].scene.points[0].center - problems[0].scene.points[0].center).norm() >
            1e-9) {
            ++distinct;
        }
    }
    CHECK(distinct == 49);
    for (const auto& p : problems) {
        CHECK(scene_clearance(chain, p.q_start, p.scene) >= 0.0);
    }
}

TEST_CASE("problem generation is deterministic under a fixed seed") {
    const auto chain = default_planar_chain();
    Rng rng(13);
    SceneGenConfig sc;
    const Scene nominal = default_tabletop_scene(chain, sc, rng);
    PerturbationSpec spec;
    spec.seed = 77;
    const auto a = generate_problems(chain, nominal, spec, 5);
    const auto b = generate_problems(chain, nominal, spec, 5);
    for (int i = 0; i < 5; ++i) {
        CHECK((a[i].q_start - b[i].q_start).norm() == 0.0);
        CHECK((a[i].goal.position - b[i].goal.position).norm() == 0.0);
        for (std::size_t k = 0; k < a[i].scene.points.size(); ++k) {
            CHECK((a[i].scene.points[k].center - b[i].scene.points[k].center).norm() == 0.0);
        }
    }
}

TEST_CASE("table support stays noise-free through generation") {
    const auto chain = default_planar_chain();
    Rng rng(15);
    SceneGenConfig sc;
    const Scene nominal = default_tabletop_scene(chain, sc, rng);
    bool has_table = false, has_clutter = false;
    for (const auto& pt : nominal.points) {
        if (pt.object < 0) {
            CHECK(pt.sigma == 0.0);
            has_table = true;
        } else {
            CHECK(pt.sigma == doctest::Approx(sc.sensor_sigma));
            CHECK(pt.radius >= sc.sphere_radius_lo);
            CHECK(pt.radius <= sc.sphere_radius_hi);
            has_clutter = true;
        }
        CHECK(nominal.bounds.contains(pt.center));
    }
    CHECK(has_table);
    CHECK(has_clutter);
}

TEST_CASE("scene and problem files round trip") {
    const auto chain = default_planar_chain();
    Rng rng(17);
    SceneGenConfig sc;
    const Scene nominal = default_tabletop_scene(chain, sc, rng);
    const auto dir = std::filesystem::temp_directory_path();
    const auto scene_path = (dir / "ccplan_scene_test.json").string();
    save_scene(nominal, scene_path);
    const Scene loaded = load_scene(scene_path);
    REQUIRE(loaded.points.size() == nominal.points.size());
    CHECK((loaded.points[3].center - nominal.points[3].center).norm() < 1e-15);

    PerturbationSpec spec;
    spec.seed = 5;
    const auto problems = generate_problems(chain, nominal, spec, 1);
    const auto prob_path = (dir / "ccplan_problem_test.json").string();
    save_problem(problems[0], prob_path);
    const ProblemInstance lp = load_problem(prob_path);
    CHECK((lp.q_start - problems[0].q_start).norm() < 1e-15);
    CHECK((lp.goal.position - problems[0].goal.position).norm() < 1e-15);
    CHECK(lp.goal.position_tol == doctest::Approx(0.02));
    CHECK(lp.goal.angle_tol == doctest::Approx(0.1));
    std::filesystem::remove(scene_path);
    std::filesystem::remove(prob_path);
}

TEST_CASE("inflation scales only noisy radii") {
    const Scene s = small_scene();
    const Scene inflated = inflate_scene(s, 0.4);
    CHECK(inflated.points[0].radius == doctest::Approx(0.03 * 1.4));
    CHECK(inflated.points[1].radius == doctest::Approx(0.04));
    CHECK_THROWS_AS(inflate_scene(s, -0.1), std::invalid_argument);
}
