#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "ccplan/dataset.hpp"
#include "ccplan/model.hpp"

namespace ccplan {

struct TrainHyper {
    int epochs = 200;
    double lr = 1e-3;
    int batch = 256;
    std::uint64_t seed = 0;
};

/// Paper-fidelity schedule: 500 epochs, lr 1e-4, batch 512.
TrainHyper paper_train_hyper();

struct EpochStats {
    int epoch = 0;
    double nll = 0.0;
    double kl = 0.0;
    double total = 0.0;
};

struct TrainResult {
    ModelParams params;
    std::vector<EpochStats> trace;
};

struct TrainingError : std::runtime_error {
    int epoch;
    TrainingError(const std::string& what, int epoch_) : std::runtime_error(what), epoch(epoch_) {}
};

/// Pre-encoded training tensors. NLL only needs per-(sample, link) draw mean
/// and mean square, so draws are reduced once up front.
struct TrainingTensors {
    Mat X;        // N x input_dim
    Mat draw_mean;  // N x K
    Mat draw_sq;    // N x K, mean of squared draws
    int rows() const { return static_cast<int>(X.rows()); }

    static TrainingTensors from_dataset(const Dataset& ds, const ModelConfig& cfg);
};

/// Mean loss over the given rows plus parameter gradients via analytic
/// backpropagation. Exposed so tests can check gradients independently.
struct LossAndGrads {
    double nll = 0.0;   // mean per-sample NLL (itself a mean over draws)
    double kl = 0.0;    // mean per-sample KL
    double total = 0.0; // nll + kl_weight * kl
    ModelParams grads;
};
LossAndGrads training_loss_and_grads(const ModelParams& params, const ModelConfig& cfg,
                                     const TrainingTensors& data, const std::vector<int>& rows);
double training_loss(const ModelParams& params, const ModelConfig& cfg,
                     const TrainingTensors& data, const std::vector<int>& rows);

/// Adam minimization of mean(nll) + kl_weight * mean(kl). Deterministic given
/// hyper.seed. Throws TrainingError naming the epoch if the loss diverges.
TrainResult train_model(const Dataset& ds, const ModelConfig& cfg, const TrainHyper& hyper);

void save_loss_trace(const std::vector<EpochStats>& trace, const std::string& path);

/// Held-out accuracy of a trained model: mean absolute error of mu against
/// the exact distance and of sigma against the generating noise std, per
/// link, measured at the waypoints of `paths` random discretized paths with
/// one random workspace point each (plus the standardized-residual variance
/// used as the calibration gate).
struct ModelAccuracy {
    Vec mu_mae;     // K
    Vec sigma_mae;  // K
    double standardized_residual_var = 0.0;
    int evaluations = 0;
};
ModelAccuracy evaluate_model_accuracy(const KinematicChain& chain, const ModelConfig& cfg,
                                      const ModelParams& params, const Aabb& bounds,
                                      double true_sigma, int paths, Rng& rng,
                                      double waypoint_spacing = 0.05);

}  // namespace ccplan
