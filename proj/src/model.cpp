#include "ccplan/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace ccplan {

void ModelConfig::finalize() {
    if (prior_mu.size() == 0) prior_mu = Vec::Constant(K, 0.5);
    if (prior_sigma.size() == 0) prior_sigma = Vec::Constant(K, 0.5);
    if (prior_mu.size() != K || prior_sigma.size() != K)
        throw std::invalid_argument("model config: prior size mismatch");
    if ((prior_sigma.array() <= 0.0).any())
        throw std::invalid_argument("model config: prior sigma must be positive");
    if (hidden.empty()) throw std::invalid_argument("model config: need at least one hidden layer");
    for (int w : hidden) {
        if (w < 1) throw std::invalid_argument("model config: widths must be >= 1");
    }
}

ModelConfig paper_model_config(int n, int d, int K) {
    ModelConfig cfg;
    cfg.n = n;
    cfg.d = d;
    cfg.K = K;
    cfg.hidden = {256, 256, 256, 256};
    cfg.finalize();
    return cfg;
}

ModelParams ModelParams::init(const ModelConfig& cfg, Rng& rng) {
    ModelParams p;
    int fan_in = cfg.input_dim();
    for (int width : cfg.hidden) {
        const double scale = std::sqrt(2.0 / fan_in);
        Mat w(width, fan_in);
        for (int i = 0; i < w.size(); ++i) w.data()[i] = scale * rng.normal();
        p.W.push_back(std::move(w));
        p.b.push_back(Vec::Zero(width));
        fan_in = width;
    }
    const double head_scale = std::sqrt(2.0 / fan_in);
    p.W_mu.resize(cfg.K, fan_in);
    p.W_sigma.resize(cfg.K, fan_in);
    for (int i = 0; i < p.W_mu.size(); ++i) p.W_mu.data()[i] = head_scale * rng.normal();
    for (int i = 0; i < p.W_sigma.size(); ++i) p.W_sigma.data()[i] = head_scale * rng.normal();
    p.b_mu = Vec::Zero(cfg.K);
    // Start the std head near the prior scale rather than at softplus(0).
    p.b_sigma = Vec::Constant(cfg.K, -2.0);
    return p;
}

ModelParams ModelParams::zeros_like(const ModelParams& other) {
    ModelParams p;
    for (const auto& w : other.W) p.W.push_back(Mat::Zero(w.rows(), w.cols()));
    for (const auto& v : other.b) p.b.push_back(Vec::Zero(v.size()));
    p.W_mu = Mat::Zero(other.W_mu.rows(), other.W_mu.cols());
    p.b_mu = Vec::Zero(other.b_mu.size());
    p.W_sigma = Mat::Zero(other.W_sigma.rows(), other.W_sigma.cols());
    p.b_sigma = Vec::Zero(other.b_sigma.size());
    return p;
}

std::size_t ModelParams::count() const {
    std::size_t c = W_mu.size() + b_mu.size() + W_sigma.size() + b_sigma.size();
    for (const auto& w : W) c += w.size();
    for (const auto& v : b) c += v.size();
    return c;
}

Vec encode(const ModelConfig& cfg, const Vec& q, const Vec& x) {
    const int n = cfg.n, d = cfg.d;
    if (q.size() != n || x.size() != d) throw std::invalid_argument("encode: dimension mismatch");
    Vec e(3 * (n + d));
    e.head(n) = q;
    e.segment(n, d) = x;
    for (int i = 0; i < n; ++i) e[n + d + i] = std::sin(q[i]);
    for (int i = 0; i < d; ++i) e[n + d + n + i] = std::sin(x[i]);
    for (int i = 0; i < n; ++i) e[2 * (n + d) + i] = std::cos(q[i]);
    for (int i = 0; i < d; ++i) e[2 * (n + d) + n + i] = std::cos(x[i]);
    return e;
}

namespace {

double softplus(double s) {
    if (s > 30.0) return s;
    if (s < -30.0) return std::exp(s);
    return std::log1p(std::exp(s));
}

}  // namespace

DistancePrediction forward(const ModelParams& params, const ModelConfig& cfg, const Vec& q,
                           const Vec& x, bool want_grad_q) {
    const int n = cfg.n, d = cfg.d;
    Vec h = encode(cfg, q, x);

    Mat jac;  // d(h)/d(q), propagated alongside the activations
    if (want_grad_q) {
        jac = Mat::Zero(3 * (n + d), n);
        for (int i = 0; i < n; ++i) {
            jac(i, i) = 1.0;
            jac(n + d + i, i) = std::cos(q[i]);
            jac(2 * (n + d) + i, i) = -std::sin(q[i]);
        }
    }

    for (std::size_t l = 0; l < params.W.size(); ++l) {
        Vec z = params.W[l] * h + params.b[l];
        if (!z.allFinite()) throw std::runtime_error("forward: non-finite activation");
        if (want_grad_q) {
            Mat jz = params.W[l] * jac;
            for (int i = 0; i < z.size(); ++i) {
                if (z[i] <= 0.0) jz.row(i).setZero();
            }
            jac = std::move(jz);
        }
        h = z.cwiseMax(0.0);
    }

    DistancePrediction pred;
    pred.mu = params.W_mu * h + params.b_mu;
    Vec s = params.W_sigma * h + params.b_sigma;
    pred.sigma.resize(cfg.K);
    for (int k = 0; k < cfg.K; ++k) pred.sigma[k] = softplus(s[k]) + cfg.sigma_floor;
    if (!pred.mu.allFinite() || !pred.sigma.allFinite())
        throw std::runtime_error("forward: non-finite head output");
    if (want_grad_q) {
        pred.grad_mu_q = params.W_mu * jac;
        pred.has_grad = true;
    }
    return pred;
}

double nll_loss(const DistancePrediction& pred, const Vec& noisy_d) {
    if (noisy_d.size() != pred.mu.size()) throw std::invalid_argument("nll_loss: dimension mismatch");
    constexpr double kHalfLog2Pi = 0.91893853320467274178;
    double loss = pred.mu.size() * kHalfLog2Pi;
    for (int k = 0; k < pred.mu.size(); ++k) {
        const double r = noisy_d[k] - pred.mu[k];
        loss += std::log(pred.sigma[k]) + r * r / (2.0 * pred.sigma[k] * pred.sigma[k]);
    }
    return loss;
}

double gaussian_kl_exact(double mu, double sigma, double mu_p, double sigma_p) {
    const double r = mu - mu_p;
    return std::log(sigma_p / sigma) + (sigma * sigma + r * r) / (2.0 * sigma_p * sigma_p) - 0.5;
}

double gaussian_kl_paper(double mu, double sigma, double mu_p, double sigma_p) {
    const double r = mu_p - mu;
    return (sigma * sigma + r * r) / (2.0 * sigma_p * sigma_p) - std::log(sigma);
}

double kl_loss(const DistancePrediction& pred, const ModelConfig& cfg) {
    double kl = 0.0;
    for (int k = 0; k < pred.mu.size(); ++k) {
        kl += cfg.exact_kl
                  ? gaussian_kl_exact(pred.mu[k], pred.sigma[k], cfg.prior_mu[k], cfg.prior_sigma[k])
                  : gaussian_kl_paper(pred.mu[k], pred.sigma[k], cfg.prior_mu[k], cfg.prior_sigma[k]);
    }
    return kl;
}

namespace {

constexpr char kMagic[4] = {'C', 'C', 'M', '1'};

void write_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }

std::uint32_t read_u32(std::istream& in) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    return v;
}

void write_tensor(std::ostream& out, const std::string& name, const Mat& m) {
    write_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(out, static_cast<std::uint32_t>(m.rows()));
    write_u32(out, static_cast<std::uint32_t>(m.cols()));
    for (int i = 0; i < m.rows(); ++i) {
        for (int j = 0; j < m.cols(); ++j) {
            const float f = static_cast<float>(m(i, j));
            out.write(reinterpret_cast<const char*>(&f), 4);
        }
    }
}

Mat read_tensor(std::istream& in, std::string& name) {
    const std::uint32_t len = read_u32(in);
    name.resize(len);
    in.read(name.data(), len);
    const std::uint32_t rows = read_u32(in), cols = read_u32(in);
    Mat m(rows, cols);
    for (std::uint32_t i = 0; i < rows; ++i) {
        for (std::uint32_t j = 0; j < cols; ++j) {
            float f = 0;
            in.read(reinterpret_cast<char*>(&f), 4);
            m(i, j) = f;
        }
    }
    return m;
}

}  // namespace

void save_model(const ModelConfig& cfg, const ModelParams& params, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write model file: " + path);
    nlohmann::json header;
    header["n"] = cfg.n;
    header["d"] = cfg.d;
    header["K"] = cfg.K;
    header["hidden"] = cfg.hidden;
    header["kl_weight"] = cfg.kl_weight;
    header["sigma_floor"] = cfg.sigma_floor;
    header["exact_kl"] = cfg.exact_kl;
    header["prior_mu"] = std::vector<double>(cfg.prior_mu.data(), cfg.prior_mu.data() + cfg.K);
    header["prior_sigma"] =
        std::vector<double>(cfg.prior_sigma.data(), cfg.prior_sigma.data() + cfg.K);
    const std::string hs = header.dump();
    out.write(kMagic, 4);
    write_u32(out, static_cast<std::uint32_t>(hs.size()));
    out.write(hs.data(), static_cast<std::streamsize>(hs.size()));

    write_u32(out, static_cast<std::uint32_t>(2 * params.W.size() + 4));
    for (std::size_t l = 0; l < params.W.size(); ++l) {
        write_tensor(out, "core." + std::to_string(l) + ".weight", params.W[l]);
        write_tensor(out, "core." + std::to_string(l) + ".bias", params.b[l]);
    }
    write_tensor(out, "mean_head.weight", params.W_mu);
    write_tensor(out, "mean_head.bias", params.b_mu);
    write_tensor(out, "std_head.weight", params.W_sigma);
    write_tensor(out, "std_head.bias", params.b_sigma);
    if (!out) throw std::runtime_error("short write on model file: " + path);
}

std::pair<ModelConfig, ModelParams> load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open model file: " + path);
    char magic[4];
    in.read(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) throw std::runtime_error("bad model magic: " + path);
    const std::uint32_t hlen = read_u32(in);
    std::string hs(hlen, '\0');
    in.read(hs.data(), hlen);
    const nlohmann::json header = nlohmann::json::parse(hs);

    ModelConfig cfg;
    cfg.n = header.at("n").get<int>();
    cfg.d = header.at("d").get<int>();
    cfg.K = header.at("K").get<int>();
    cfg.hidden = header.at("hidden").get<std::vector<int>>();
    cfg.kl_weight = header.at("kl_weight").get<double>();
    cfg.sigma_floor = header.at("sigma_floor").get<double>();
    cfg.exact_kl = header.at("exact_kl").get<bool>();
    const auto pm = header.at("prior_mu").get<std::vector<double>>();
    const auto ps = header.at("prior_sigma").get<std::vector<double>>();
    cfg.prior_mu = Eigen::Map<const Vec>(pm.data(), static_cast<int>(pm.size()));
    cfg.prior_sigma = Eigen::Map<const Vec>(ps.data(), static_cast<int>(ps.size()));
    cfg.finalize();

    ModelParams p;
    const std::uint32_t tensors = read_u32(in);
    for (std::uint32_t t = 0; t < tensors; ++t) {
        std::string name;
        Mat m = read_tensor(in, name);
        if (name == "mean_head.weight") {
            p.W_mu = m;
        } else if (name == "mean_head.bias") {
            p.b_mu = m.col(0);
        } else if (name == "std_head.weight") {
            p.W_sigma = m;
        } else if (name == "std_head.bias") {
            p.b_sigma = m.col(0);
        } else if (name.rfind("core.", 0) == 0) {
            if (name.find(".weight") != std::string::npos) {
                p.W.push_back(m);
            } else {
                p.b.push_back(m.col(0));
            }
        } else {
            throw std::runtime_error("unknown tensor in model file: " + name);
        }
    }
    if (!in) throw std::runtime_error("truncated model file: " + path);
    if (p.W.size() != cfg.hidden.size()) throw std::runtime_error("model file: layer count mismatch");
    return {cfg, p};
}

}  // namespace ccplan
