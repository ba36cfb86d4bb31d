#include "ccplan/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace ccplan {

TrainHyper paper_train_hyper() {
    TrainHyper h;
    h.epochs = 500;
    h.lr = 1e-4;
    h.batch = 512;
    return h;
}

TrainingTensors TrainingTensors::from_dataset(const Dataset& ds, const ModelConfig& cfg) {
    if (ds.samples.empty()) throw std::invalid_argument("training: dataset is empty");
    if (ds.n != cfg.n || ds.d != cfg.d || ds.K != cfg.K)
        throw std::invalid_argument("training: dataset/config shape mismatch");
    TrainingTensors t;
    const int N = static_cast<int>(ds.samples.size());
    t.X.resize(N, cfg.input_dim());
    t.draw_mean.resize(N, cfg.K);
    t.draw_sq.resize(N, cfg.K);
    for (int i = 0; i < N; ++i) {
        const auto& s = ds.samples[i];
        t.X.row(i) = encode(cfg, s.q, s.x).transpose();
        for (int k = 0; k < cfg.K; ++k) {
            const auto col = s.noisy.col(k);
            t.draw_mean(i, k) = col.mean();
            t.draw_sq(i, k) = col.array().square().mean();
        }
    }
    return t;
}

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;

struct BatchWork {
    Mat X;            // B x in
    Mat m, q2;        // B x K
    std::vector<Mat> H;  // activations per layer, B x width
    Mat mu, s_raw, sigma;
};

void gather(const TrainingTensors& data, const std::vector<int>& rows, int lo, int hi, BatchWork& w) {
    const int B = hi - lo;
    w.X.resize(B, data.X.cols());
    w.m.resize(B, data.draw_mean.cols());
    w.q2.resize(B, data.draw_sq.cols());
    for (int i = 0; i < B; ++i) {
        const int r = rows[lo + i];
        w.X.row(i) = data.X.row(r);
        w.m.row(i) = data.draw_mean.row(r);
        w.q2.row(i) = data.draw_sq.row(r);
    }
}

// Forward pass over a batch; fills w.H, w.mu, w.s_raw, w.sigma.
void batch_forward(const ModelParams& p, const ModelConfig& cfg, BatchWork& w) {
    const Mat* in = &w.X;
    w.H.resize(p.W.size());
    for (std::size_t l = 0; l < p.W.size(); ++l) {
        w.H[l] = ((*in) * p.W[l].transpose()).rowwise() + p.b[l].transpose();
        w.H[l] = w.H[l].cwiseMax(0.0);
        in = &w.H[l];
    }
    const Mat& h = *in;
    w.mu = (h * p.W_mu.transpose()).rowwise() + p.b_mu.transpose();
    w.s_raw = (h * p.W_sigma.transpose()).rowwise() + p.b_sigma.transpose();
    w.sigma.resize(w.s_raw.rows(), w.s_raw.cols());
    for (int i = 0; i < w.s_raw.size(); ++i) {
        const double s = w.s_raw.data()[i];
        const double sp = s > 30.0 ? s : (s < -30.0 ? std::exp(s) : std::log1p(std::exp(s)));
        w.sigma.data()[i] = sp + cfg.sigma_floor;
    }
}

struct BatchLoss {
    double nll = 0.0, kl = 0.0;
};

// Mean losses over the batch plus dL/dmu and dL/dsigma (including kl_weight).
BatchLoss batch_loss(const ModelConfig& cfg, const BatchWork& w, Mat* g_mu, Mat* g_sigma) {
    const int B = static_cast<int>(w.mu.rows()), K = cfg.K;
    BatchLoss out;
    if (g_mu) {
        g_mu->setZero(B, K);
        g_sigma->setZero(B, K);
    }
    for (int i = 0; i < B; ++i) {
        for (int k = 0; k < K; ++k) {
            const double mu = w.mu(i, k), sg = w.sigma(i, k);
            const double msq = w.q2(i, k) - 2.0 * w.m(i, k) * mu + mu * mu;
            out.nll += std::log(sg) + msq / (2.0 * sg * sg) + kHalfLog2Pi;
            const double pm = cfg.prior_mu[k], ps = cfg.prior_sigma[k];
            out.kl += cfg.exact_kl ? gaussian_kl_exact(mu, sg, pm, ps)
                                   : gaussian_kl_paper(mu, sg, pm, ps);
            if (g_mu) {
                double dmu = (mu - w.m(i, k)) / (sg * sg);
                double dsg = 1.0 / sg - msq / (sg * sg * sg);
                dmu += cfg.kl_weight * (mu - pm) / (ps * ps);
                dsg += cfg.kl_weight * (sg / (ps * ps) - 1.0 / sg);
                (*g_mu)(i, k) = dmu / B;
                (*g_sigma)(i, k) = dsg / B;
            }
        }
    }
    out.nll /= B;
    out.kl /= B;
    return out;
}

// Backward pass from head gradients into parameter gradients.
void batch_backward(const ModelParams& p, const BatchWork& w, const Mat& g_mu, const Mat& g_sigma_in,
                    ModelParams& grads) {
    // Through the softplus of the std head.
    Mat g_s(g_sigma_in.rows(), g_sigma_in.cols());
    for (int i = 0; i < g_s.size(); ++i) {
        g_s.data()[i] = g_sigma_in.data()[i] / (1.0 + std::exp(-w.s_raw.data()[i]));
    }
    const Mat& h_last = w.H.back();
    grads.W_mu.noalias() += g_mu.transpose() * h_last;
    grads.b_mu.noalias() += g_mu.colwise().sum().transpose();
    grads.W_sigma.noalias() += g_s.transpose() * h_last;
    grads.b_sigma.noalias() += g_s.colwise().sum().transpose();

    Mat g_h = g_mu * p.W_mu + g_s * p.W_sigma;
    for (int l = static_cast<int>(p.W.size()) - 1; l >= 0; --l) {
        // ReLU mask: H[l] > 0.
        Mat g_z = (w.H[l].array() > 0.0).select(g_h, 0.0);
        const Mat& input = l == 0 ? w.X : w.H[l - 1];
        grads.W[l].noalias() += g_z.transpose() * input;
        grads.b[l].noalias() += g_z.colwise().sum().transpose();
        if (l > 0) g_h = g_z * p.W[l];
    }
}

}  // namespace

LossAndGrads training_loss_and_grads(const ModelParams& params, const ModelConfig& cfg,
                                     const TrainingTensors& data, const std::vector<int>& rows) {
    BatchWork w;
    gather(data, rows, 0, static_cast<int>(rows.size()), w);
    batch_forward(params, cfg, w);
    Mat g_mu, g_sigma;
    const BatchLoss loss = batch_loss(cfg, w, &g_mu, &g_sigma);
    LossAndGrads out;
    out.nll = loss.nll;
    out.kl = loss.kl;
    out.total = loss.nll + cfg.kl_weight * loss.kl;
    out.grads = ModelParams::zeros_like(params);
    batch_backward(params, w, g_mu, g_sigma, out.grads);
    return out;
}

double training_loss(const ModelParams& params, const ModelConfig& cfg,
                     const TrainingTensors& data, const std::vector<int>& rows) {
    BatchWork w;
    gather(data, rows, 0, static_cast<int>(rows.size()), w);
    batch_forward(params, cfg, w);
    const BatchLoss loss = batch_loss(cfg, w, nullptr, nullptr);
    return loss.nll + cfg.kl_weight * loss.kl;
}

namespace {

struct AdamState {
    ModelParams m, v;
    int t = 0;
};

void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state, double lr) {
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    ++state.t;
    const double c1 = 1.0 - std::pow(b1, state.t);
    const double c2 = 1.0 - std::pow(b2, state.t);
    auto update = [&](Mat& th, const Mat& g, Mat& m, Mat& v) {
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
        th -= lr * (m / c1).cwiseQuotient(((v / c2).cwiseSqrt().array() + eps).matrix());
    };
    auto update_v = [&](Vec& th, const Vec& g, Vec& m, Vec& v) {
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
        th -= lr * (m / c1).cwiseQuotient(((v / c2).cwiseSqrt().array() + eps).matrix());
    };
    for (std::size_t l = 0; l < params.W.size(); ++l) {
        update(params.W[l], grads.W[l], state.m.W[l], state.v.W[l]);
        update_v(params.b[l], grads.b[l], state.m.b[l], state.v.b[l]);
    }
    update(params.W_mu, grads.W_mu, state.m.W_mu, state.v.W_mu);
    update_v(params.b_mu, grads.b_mu, state.m.b_mu, state.v.b_mu);
    update(params.W_sigma, grads.W_sigma, state.m.W_sigma, state.v.W_sigma);
    update_v(params.b_sigma, grads.b_sigma, state.m.b_sigma, state.v.b_sigma);
}

}  // namespace

TrainResult train_model(const Dataset& ds, const ModelConfig& cfg, const TrainHyper& hyper) {
    const TrainingTensors data = TrainingTensors::from_dataset(ds, cfg);
    const int N = data.rows();
    Rng rng(hyper.seed);
    TrainResult result;
    result.params = ModelParams::init(cfg, rng);
    // Start the mean head at the per-link target mean so far-away distance
    // scales do not have to be reached through slow bias travel.
    result.params.b_mu = data.draw_mean.colwise().mean().transpose();

    AdamState adam;
    adam.m = ModelParams::zeros_like(result.params);
    adam.v = ModelParams::zeros_like(result.params);

    std::vector<int> order(N);
    std::iota(order.begin(), order.end(), 0);

    BatchWork w;
    Mat g_mu, g_sigma;
    for (int epoch = 1; epoch <= hyper.epochs; ++epoch) {
        // Fisher-Yates shuffle driven by the project Rng.
        for (int i = N - 1; i > 0; --i) {
            std::swap(order[i], order[static_cast<int>(rng.uniform_int(i + 1))]);
        }
        EpochStats stats;
        stats.epoch = epoch;
        for (int lo = 0; lo < N; lo += hyper.batch) {
            const int hi = std::min(N, lo + hyper.batch);
            gather(data, order, lo, hi, w);
            batch_forward(result.params, cfg, w);
            const BatchLoss loss = batch_loss(cfg, w, &g_mu, &g_sigma);
            ModelParams grads = ModelParams::zeros_like(result.params);
            batch_backward(result.params, w, g_mu, g_sigma, grads);
            adam_step(result.params, grads, adam, hyper.lr);
            stats.nll += loss.nll * (hi - lo);
            stats.kl += loss.kl * (hi - lo);
        }
        stats.nll /= N;
        stats.kl /= N;
        stats.total = stats.nll + cfg.kl_weight * stats.kl;
        if (!std::isfinite(stats.total)) {
            throw TrainingError("training diverged at epoch " + std::to_string(epoch), epoch);
        }
        result.trace.push_back(stats);
    }
    return result;
}

void save_loss_trace(const std::vector<EpochStats>& trace, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write loss trace: " + path);
    out << "epoch,nll,kl,total\n";
    for (const auto& s : trace) {
        out << s.epoch << "," << s.nll << "," << s.kl << "," << s.total << "\n";
    }
}

ModelAccuracy evaluate_model_accuracy(const KinematicChain& chain, const ModelConfig& cfg,
                                      const ModelParams& params, const Aabb& bounds,
                                      double true_sigma, int paths, Rng& rng,
                                      double waypoint_spacing) {
    ModelAccuracy acc;
    acc.mu_mae = Vec::Zero(cfg.K);
    acc.sigma_mae = Vec::Zero(cfg.K);
    double resid_sq = 0.0;
    long resid_count = 0;
    for (int p = 0; p < paths; ++p) {
        Vec qa(chain.joints()), qb(chain.joints());
        for (int i = 0; i < chain.joints(); ++i) {
            qa[i] = rng.uniform(chain.lower[i], chain.upper[i]);
            qb[i] = rng.uniform(chain.lower[i], chain.upper[i]);
        }
        const Vec x = bounds.sample(rng);
        const double dist = (qb - qa).lpNorm<Eigen::Infinity>();
        const int steps = std::max(1, static_cast<int>(std::ceil(dist / waypoint_spacing)));
        for (int t = 0; t <= steps; ++t) {
            const Vec q = qa + (qb - qa) * (static_cast<double>(t) / steps);
            const DistancePrediction pred = forward(params, cfg, q, x);
            const Vec truth = link_point_distances(chain, q, x);
            for (int k = 0; k < cfg.K; ++k) {
                acc.mu_mae[k] += std::abs(pred.mu[k] - truth[k]);
                acc.sigma_mae[k] += std::abs(pred.sigma[k] - true_sigma);
                // Residual of a fresh noisy draw, standardized by the model.
                const double draw = truth[k] + true_sigma * rng.normal();
                const double z = (draw - pred.mu[k]) / pred.sigma[k];
                resid_sq += z * z;
                ++resid_count;
            }
            ++acc.evaluations;
        }
    }
    acc.mu_mae /= acc.evaluations;
    acc.sigma_mae /= acc.evaluations;
    acc.standardized_residual_var = resid_sq / static_cast<double>(resid_count);
    return acc;
}

}  // namespace ccplan
