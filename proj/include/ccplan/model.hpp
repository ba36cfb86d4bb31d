#pragma once

#include <string>
#include <vector>

#include "ccplan/chain.hpp"
#include "ccplan/geometry.hpp"
#include "ccplan/rng.hpp"

namespace ccplan {

/// Architecture and loss configuration of the stochastic distance model.
struct ModelConfig {
    int n = 3;  // joints
    int d = 2;  // workspace dimension
    int K = 3;  // links
    std::vector<int> hidden = {64, 64, 64, 64};
    Vec prior_mu;             // per link, defaults to 0.5 m
    Vec prior_sigma;          // per link, defaults to 0.5 m
    double kl_weight = 1e-3;
    double sigma_floor = 1e-4;  // m, added after softplus
    bool exact_kl = false;      // false: displayed closed form that drops constants

    int input_dim() const { return 3 * (n + d); }
    void finalize();  // fills prior defaults, validates
};

/// Paper-fidelity architecture: four 256-wide layers.
ModelConfig paper_model_config(int n, int d, int K);

/// Dense parameters: shared core plus mean and (pre-softplus) std heads.
/// Also used as a gradient container, one slot per tensor.
struct ModelParams {
    std::vector<Mat> W;  // core weights, hidden[i] x fan_in
    std::vector<Vec> b;
    Mat W_mu;            // K x width
    Vec b_mu;
    Mat W_sigma;
    Vec b_sigma;

    static ModelParams init(const ModelConfig& cfg, Rng& rng);  // He-normal
    static ModelParams zeros_like(const ModelParams& other);
    std::size_t count() const;

    /// Visit every scalar parameter in a fixed order.
    template <typename F>
    void for_each(F&& f) {
        for (auto& w : W)
            for (int i = 0; i < w.size(); ++i) f(w.data()[i]);
        for (auto& v : b)
            for (int i = 0; i < v.size(); ++i) f(v.data()[i]);
        for (int i = 0; i < W_mu.size(); ++i) f(W_mu.data()[i]);
        for (int i = 0; i < b_mu.size(); ++i) f(b_mu.data()[i]);
        for (int i = 0; i < W_sigma.size(); ++i) f(W_sigma.data()[i]);
        for (int i = 0; i < b_sigma.size(); ++i) f(b_sigma.data()[i]);
    }
};

/// Per-link Gaussian distance parameters for one (q, x) query.
struct DistancePrediction {
    Vec mu;         // K, meters
    Vec sigma;      // K, meters, >= sigma_floor
    Mat grad_mu_q;  // K x n, present iff has_grad
    bool has_grad = false;
};

/// Input encoding: [q; x; sin(q); sin(x); cos(q); cos(x)].
Vec encode(const ModelConfig& cfg, const Vec& q, const Vec& x);

/// Network evaluation; grad_mu_q is the exact derivative of mu w.r.t. q
/// through the encoding. Throws std::runtime_error on non-finite activations.
DistancePrediction forward(const ModelParams& params, const ModelConfig& cfg, const Vec& q,
                           const Vec& x, bool want_grad_q = false);

/// Gaussian negative log likelihood of the draws under the prediction:
/// sum_k [log sigma_k + (d_k - mu_k)^2 / (2 sigma_k^2)] + K/2 log(2 pi).
double nll_loss(const DistancePrediction& pred, const Vec& noisy_d);

/// KL(pred || prior) summed over links; form selected by cfg.exact_kl.
double kl_loss(const DistancePrediction& pred, const ModelConfig& cfg);

/// Scalar KL helpers between N(mu, sigma^2) and N(mu_p, sigma_p^2).
double gaussian_kl_exact(double mu, double sigma, double mu_p, double sigma_p);
/// Displayed approximation: (sigma^2 + (mu_p - mu)^2) / (2 sigma_p^2) - log sigma.
double gaussian_kl_paper(double mu, double sigma, double mu_p, double sigma_p);

void save_model(const ModelConfig& cfg, const ModelParams& params, const std::string& path);
std::pair<ModelConfig, ModelParams> load_model(const std::string& path);

}  // namespace ccplan
