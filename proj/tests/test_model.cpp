#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "ccplan/model.hpp"
#include "oracles.hpp"

using namespace ccplan;

namespace {

ModelConfig tiny_config() {
    ModelConfig cfg;
    cfg.n = 3;
    cfg.d = 2;
    cfg.K = 3;
    cfg.hidden = {8, 8};
    cfg.finalize();
    return cfg;
}

}  // namespace

TEST_CASE("encoding layout and length") {
    ModelConfig cfg;
    cfg.n = 3;
    cfg.d = 2;
    cfg.K = 3;
    cfg.finalize();
    const Vec e0 = encode(cfg, Vec::Zero(3), Vec::Zero(2));
    REQUIRE(e0.size() == 15);
    CHECK(e0.head(10).norm() == 0.0);          // raw + sines are zero
    CHECK((e0.tail(5).array() == 1.0).all());  // cosines are one

    ModelConfig wide;
    wide.n = 8;
    wide.d = 3;
    wide.K = 11;
    wide.finalize();
    CHECK(wide.input_dim() == 33);
    CHECK(encode(wide, Vec::Ones(8), Vec::Ones(3)).size() == 33);
}

TEST_CASE("sigma respects the softplus floor") {
    const ModelConfig cfg = tiny_config();
    Rng rng(3);
    ModelParams params = ModelParams::init(cfg, rng);
    params.b_sigma = Vec::Constant(3, -200.0);  // drive softplus to zero
    const auto pred = forward(params, cfg, Vec::Zero(3), Vec::Zero(2));
    for (int k = 0; k < 3; ++k) {
        CHECK(pred.sigma[k] >= 1e-4);
        CHECK(pred.sigma[k] == doctest::Approx(1e-4));
    }
}

TEST_CASE("grad_mu_q matches central finite differences") {
    const ModelConfig cfg = tiny_config();
    Rng rng(7);
    const ModelParams params = ModelParams::init(cfg, rng);
    int checked = 0;
    for (int trial = 0; trial < 100; ++trial) {
        Vec q(3), x(2);
        for (int i = 0; i < 3; ++i) q[i] = rng.uniform(-2.0, 2.0);
        for (int i = 0; i < 2; ++i) x[i] = rng.uniform(-1.0, 1.0);
        const auto pred = forward(params, cfg, q, x, true);
        REQUIRE(pred.has_grad);
        const Mat fd = oracles::fd_jacobian(
            [&](const Vec& qq) { return forward(params, cfg, qq, x).mu; }, q, 1e-5);
        const double rel =
            (pred.grad_mu_q - fd).lpNorm<Eigen::Infinity>() /
            std::max(1.0, pred.grad_mu_q.lpNorm<Eigen::Infinity>());
        CHECK(rel <= 1e-4);
        ++checked;
    }
    CHECK(checked == 100);
}

TEST_CASE("NLL closed form") {
    DistancePrediction pred;
    pred.mu = Vec::Zero(1);
    pred.sigma = Vec::Ones(1);
    Vec d(1);
    d << 1.0;
    CHECK(nll_loss(pred, d) == doctest::Approx(0.5 + 0.5 * std::log(2.0 * kPi)));

    // Zero residual, unit sigma: K/2 log 2pi.
    DistancePrediction flat;
    flat.mu = Vec::Constant(3, 0.7);
    flat.sigma = Vec::Ones(3);
    CHECK(nll_loss(flat, flat.mu) == doctest::Approx(1.5 * std::log(2.0 * kPi)));
}

TEST_CASE("NLL matches an independent Gaussian density") {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        DistancePrediction pred;
        pred.mu = Vec(1);
        pred.sigma = Vec(1);
        pred.mu[0] = rng.uniform(-1, 1);
        pred.sigma[0] = rng.uniform(0.05, 2.0);
        Vec d(1);
        d[0] = rng.uniform(-2, 2);
        const double z = (d[0] - pred.mu[0]) / pred.sigma[0];
        const double density =
            std::exp(-0.5 * z * z) / (pred.sigma[0] * std::sqrt(2.0 * kPi));
        CHECK(nll_loss(pred, d) == doctest::Approx(-std::log(density)).epsilon(1e-10));
    }
}

TEST_CASE("displayed KL expression: 0.5 per link at mu=prior, sigma=prior=1") {
    ModelConfig cfg = tiny_config();
    cfg.prior_mu = Vec::Zero(3);
    cfg.prior_sigma = Vec::Ones(3);
    DistancePrediction pred;
    pred.mu = Vec::Zero(3);
    pred.sigma = Vec::Ones(3);
    CHECK(kl_loss(pred, cfg) == doctest::Approx(1.5));  // 0.5 per link
    CHECK(gaussian_kl_paper(0.0, 1.0, 0.0, 1.0) == doctest::Approx(0.5));
}

TEST_CASE("exact KL vanishes for identical Gaussians and matches quadrature") {
    CHECK(gaussian_kl_exact(0.3, 0.7, 0.3, 0.7) == doctest::Approx(0.0).epsilon(1e-14));
    Rng rng(13);
    for (int trial = 0; trial < 100; ++trial) {
        const double mu = rng.uniform(-1, 1), s = rng.uniform(0.2, 2.0);
        const double mp = rng.uniform(-1, 1), sp = rng.uniform(0.2, 2.0);
        const double exact = gaussian_kl_exact(mu, s, mp, sp);
        const double quad = oracles::quadrature_gaussian_kl(mu, s, mp, sp);
        CHECK(std::abs(exact - quad) <= 1e-6);
    }
}

TEST_CASE("paper and exact KL differ by the dropped constant") {
    Rng rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        const double mu = rng.uniform(-1, 1), s = rng.uniform(0.2, 2.0);
        const double mp = rng.uniform(-1, 1), sp = rng.uniform(0.2, 2.0);
        const double diff = gaussian_kl_exact(mu, s, mp, sp) - gaussian_kl_paper(mu, s, mp, sp);
        CHECK(diff == doctest::Approx(std::log(sp) - 0.5).epsilon(1e-12));
    }
}

TEST_CASE("checkpoint round trip preserves parameters at float32") {
    const ModelConfig cfg = tiny_config();
    Rng rng(19);
    const ModelParams params = ModelParams::init(cfg, rng);
    const auto path = (std::filesystem::temp_directory_path() / "ccplan_model_test.bin").string();
    save_model(cfg, params, path);
    auto [cfg2, params2] = load_model(path);
    CHECK(cfg2.n == cfg.n);
    CHECK(cfg2.hidden == cfg.hidden);
    CHECK(cfg2.kl_weight == doctest::Approx(cfg.kl_weight));
    Vec q(3), x(2);
    q << 0.3, -0.5, 1.1;
    x << 0.2, -0.4;
    const auto a = forward(params, cfg, q, x);
    const auto b = forward(params2, cfg2, q, x);
    CHECK((a.mu - b.mu).lpNorm<Eigen::Infinity>() < 1e-5);  // float32 storage
    CHECK((a.sigma - b.sigma).lpNorm<Eigen::Infinity>() < 1e-5);
    std::filesystem::remove(path);
}

TEST_CASE("non-finite parameters raise on evaluation") {
    const ModelConfig cfg = tiny_config();
    Rng rng(23);
    ModelParams params = ModelParams::init(cfg, rng);
    params.W[0](0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(forward(params, cfg, Vec::Zero(3), Vec::Zero(2)), std::runtime_error);
}
