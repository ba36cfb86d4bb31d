#include <doctest.h>

#include <filesystem>

#include "ccplan/qp.hpp"
#include "ccplan/rng.hpp"
#include "oracles.hpp"

using namespace ccplan;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

QPProblem simple_1d() {
    // min x^2 s.t. x >= 1.
    QPProblem p;
    p.P = Mat::Identity(1, 1);
    p.q = Vec::Zero(1);
    p.E = Mat(0, 1);
    p.e = Vec(0);
    p.A = Mat(1, 1);
    p.A << -1.0;
    p.b = Vec(1);
    p.b << -1.0;
    return p;
}

QPProblem random_qp(Rng& rng, int n, int mi, int me) {
    QPProblem p;
    Mat M(n, n);
    for (int i = 0; i < M.size(); ++i) M.data()[i] = rng.normal();
    p.P = M.transpose() * M + 0.5 * Mat::Identity(n, n);
    p.q = Vec(n);
    for (int i = 0; i < n; ++i) p.q[i] = rng.normal();
    p.A = Mat(mi, n);
    for (int i = 0; i < p.A.size(); ++i) p.A.data()[i] = rng.normal();
    p.b = Vec(mi);
    for (int i = 0; i < mi; ++i) p.b[i] = rng.uniform(0.1, 1.0);  // x = 0 strictly feasible
    p.E = Mat(me, n);
    for (int i = 0; i < p.E.size(); ++i) p.E.data()[i] = rng.normal();
    p.e = Vec::Zero(me);  // x = 0 satisfies the equalities
    return p;
}

}  // namespace

TEST_CASE("hand KKT: min x^2 subject to x >= 1") {
    const auto r = solve_qp(simple_1d());
    REQUIRE(r.status == SolveStatus::Optimal);
    CHECK(r.x[0] == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(r.objective == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(r.max_violation <= 1e-6);
}

TEST_CASE("box projection: min ||x - c||^2 over the unit box") {
    Rng rng(5);
    const int n = 6;
    QPProblem p;
    p.P = Mat::Identity(n, n);
    Vec c(n);
    for (int i = 0; i < n; ++i) c[i] = rng.uniform(-1.5, 2.5);
    p.q = -2.0 * c;
    p.E = Mat(0, n);
    p.e = Vec(0);
    p.A = Mat(0, n);
    p.b = Vec(0);
    p.lb = Vec::Zero(n);
    p.ub = Vec::Ones(n);
    const auto r = solve_qp(p);
    REQUIRE(r.status == SolveStatus::Optimal);
    for (int i = 0; i < n; ++i) {
        CHECK(r.x[i] == doctest::Approx(std::clamp(c[i], 0.0, 1.0)).epsilon(1e-6));
    }
}

TEST_CASE("random QPs match the active-set enumeration oracle") {
    Rng rng(17);
    int solved = 0;
    for (int trial = 0; trial < 60; ++trial) {
        const QPProblem p = random_qp(rng, 10, 5, trial % 3 == 0 ? 2 : 0);
        Vec x_ref;
        double obj_ref = 0.0;
        if (!oracles::enumerate_qp(p, &x_ref, &obj_ref)) continue;
        const auto r = solve_qp(p);
        REQUIRE(r.status == SolveStatus::Optimal);
        CHECK(std::abs(r.objective - obj_ref) <= 1e-5 * std::max(1.0, std::abs(obj_ref)));
        CHECK(r.max_violation <= 1e-6);
        ++solved;
    }
    CHECK(solved >= 55);
}

TEST_CASE("infeasible problem is detected") {
    QPProblem p;
    p.P = Mat::Identity(1, 1);
    p.q = Vec::Zero(1);
    p.E = Mat(0, 1);
    p.e = Vec(0);
    p.A = Mat(2, 1);
    p.A << 1.0, -1.0;
    p.b = Vec(2);
    p.b << -1.0, -1.0;  // x <= -1 and x >= 1
    const auto r = solve_qp(p);
    CHECK(r.status == SolveStatus::Infeasible);
}

TEST_CASE("unconstrained problem solves in closed form") {
    QPProblem p;
    p.P = 2.0 * Mat::Identity(2, 2);
    p.q = Vec(2);
    p.q << -4.0, 8.0;
    p.E = Mat(0, 2);
    p.e = Vec(0);
    p.A = Mat(0, 2);
    p.b = Vec(0);
    const auto r = solve_qp(p);
    REQUIRE(r.status == SolveStatus::Optimal);
    CHECK(r.x[0] == doctest::Approx(1.0));
    CHECK(r.x[1] == doctest::Approx(-2.0));
}

TEST_CASE("solver is deterministic bit for bit") {
    Rng rng(23);
    const QPProblem p = random_qp(rng, 8, 4, 1);
    const auto a = solve_qp(p);
    const auto b = solve_qp(p);
    REQUIRE(a.status == b.status);
    CHECK(a.objective == b.objective);
    CHECK((a.x.array() == b.x.array()).all());
}

TEST_CASE("problem dump/load round trip") {
    Rng rng(29);
    QPProblem p = random_qp(rng, 4, 3, 1);
    p.lb = Vec::Constant(4, -2.0);
    p.ub = Vec::Constant(4, kInf);
    const auto path = std::filesystem::temp_directory_path() / "ccplan_qp_test.json";
    p.save(path.string());
    const QPProblem q = QPProblem::load(path.string());
    CHECK((p.P - q.P).norm() == 0.0);
    CHECK((p.b - q.b).norm() == 0.0);
    CHECK(q.ub[0] == kInf);
    const auto ra = solve_qp(p);
    const auto rb = solve_qp(q);
    CHECK(ra.objective == doctest::Approx(rb.objective).epsilon(1e-12));
    std::filesystem::remove(path);
}
