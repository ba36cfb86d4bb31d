#include "ccplan/dataset.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace ccplan {

DatasetSizes paper_dataset_sizes() {
    DatasetSizes s;
    s.configurations = 3000;
    s.random_points = 500;
    s.near_per_link = 10;
    s.inside_per_link = 20;
    s.draws = 50;
    return s;
}

namespace {

Vec random_unit(int d, Rng& rng) {
    Vec u(d);
    double norm = 0.0;
    do {
        for (int i = 0; i < d; ++i) u[i] = rng.normal();
        norm = u.norm();
    } while (norm < 1e-9);
    return u / norm;
}

// Uniform radius inside a d-ball of radius r.
double ball_radius(int d, double r, Rng& rng) {
    const double u = rng.uniform01();
    return d == 2 ? r * std::sqrt(u) : r * std::cbrt(u);
}

}  // namespace

Dataset generate_dataset(const KinematicChain& chain, const Aabb& bounds, const DatasetSizes& sizes,
                         double sigma, Rng& rng, double near_shell) {
    if (sizes.configurations < 1 || sizes.random_points < 1 || sizes.near_per_link < 1 ||
        sizes.inside_per_link < 1 || sizes.draws < 1) {
        throw std::invalid_argument("generate_dataset: all sizes must be >= 1");
    }
    const int n = chain.joints(), d = chain.dim, K = chain.joints();
    Dataset ds;
    ds.n = n;
    ds.d = d;
    ds.K = K;
    ds.NS = sizes.draws;
    ds.sigma = sigma;
    ds.seed = rng.root_seed();
    const int per_config = sizes.random_points + K * (sizes.near_per_link + sizes.inside_per_link);
    ds.samples.reserve(static_cast<std::size_t>(sizes.configurations) * per_config);

    for (int c = 0; c < sizes.configurations; ++c) {
        Vec q(n);
        for (int i = 0; i < n; ++i) q[i] = rng.uniform(chain.lower[i], chain.upper[i]);
        const FKResult fk = forward_kinematics(chain, q);
        const auto segs = link_segments(chain, fk);

        std::vector<Vec> points;
        points.reserve(per_config);
        for (int i = 0; i < sizes.random_points; ++i) points.push_back(bounds.sample(rng));
        for (int k = 0; k < K; ++k) {
            const auto& seg = segs[k];
            // Shell straddling the surface: signed offset in [-w/2, w/2].
            for (int i = 0; i < sizes.near_per_link; ++i) {
                const double t = rng.uniform01();
                const Vec axis_pt = seg.a + t * (seg.b - seg.a);
                const double offset = seg.radius + rng.uniform(-near_shell / 2.0, near_shell / 2.0);
                points.push_back(axis_pt + std::max(offset, 1e-4) * random_unit(d, rng));
            }
            // Strictly inside the capsule.
            for (int i = 0; i < sizes.inside_per_link; ++i) {
                const double t = rng.uniform01();
                const Vec axis_pt = seg.a + t * (seg.b - seg.a);
                points.push_back(axis_pt + ball_radius(d, 0.98 * seg.radius, rng) * random_unit(d, rng));
            }
        }

        for (auto& x : points) {
            TrainingSample s;
            s.q = q;
            s.x = x;
            s.true_dist = link_point_distances(chain, q, x);
            s.noisy.resize(sizes.draws, K);
            for (int r = 0; r < sizes.draws; ++r) {
                for (int k = 0; k < K; ++k) s.noisy(r, k) = s.true_dist[k] + sigma * rng.normal();
            }
            ds.samples.push_back(std::move(s));
        }
    }
    return ds;
}

double collision_fraction(const Dataset& ds) {
    if (ds.samples.empty()) return 0.0;
    std::size_t hits = 0;
    for (const auto& s : ds.samples) {
        if (s.true_dist.minCoeff() < 0.0) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(ds.samples.size());
}

namespace {

constexpr char kMagic[4] = {'C', 'C', 'D', '1'};

void write_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }
void write_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); }
void write_f32(std::ostream& out, float v) { out.write(reinterpret_cast<const char*>(&v), 4); }

std::uint32_t read_u32(std::istream& in) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    return v;
}
std::uint64_t read_u64(std::istream& in) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 8);
    return v;
}
float read_f32(std::istream& in) {
    float v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    return v;
}

}  // namespace

void save_dataset(const Dataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write dataset file: " + path);
    out.write(kMagic, 4);
    write_u32(out, static_cast<std::uint32_t>(ds.n));
    write_u32(out, static_cast<std::uint32_t>(ds.d));
    write_u32(out, static_cast<std::uint32_t>(ds.K));
    write_u32(out, static_cast<std::uint32_t>(ds.NS));
    write_f32(out, static_cast<float>(ds.sigma));
    write_u64(out, ds.seed);
    write_u64(out, ds.samples.size());
    for (const auto& s : ds.samples) {
        for (int i = 0; i < ds.n; ++i) write_f32(out, static_cast<float>(s.q[i]));
        for (int i = 0; i < ds.d; ++i) write_f32(out, static_cast<float>(s.x[i]));
        for (int k = 0; k < ds.K; ++k) write_f32(out, static_cast<float>(s.true_dist[k]));
        for (int r = 0; r < ds.NS; ++r) {
            for (int k = 0; k < ds.K; ++k) write_f32(out, s.noisy(r, k));
        }
    }
    if (!out) throw std::runtime_error("short write on dataset file: " + path);
}

Dataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open dataset file: " + path);
    char magic[4];
    in.read(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) throw std::runtime_error("bad dataset magic: " + path);
    Dataset ds;
    ds.n = static_cast<int>(read_u32(in));
    ds.d = static_cast<int>(read_u32(in));
    ds.K = static_cast<int>(read_u32(in));
    ds.NS = static_cast<int>(read_u32(in));
    ds.sigma = read_f32(in);
    ds.seed = read_u64(in);
    const std::uint64_t count = read_u64(in);
    ds.samples.resize(count);
    for (auto& s : ds.samples) {
        s.q.resize(ds.n);
        s.x.resize(ds.d);
        s.true_dist.resize(ds.K);
        s.noisy.resize(ds.NS, ds.K);
        for (int i = 0; i < ds.n; ++i) s.q[i] = read_f32(in);
        for (int i = 0; i < ds.d; ++i) s.x[i] = read_f32(in);
        for (int k = 0; k < ds.K; ++k) s.true_dist[k] = read_f32(in);
        for (int r = 0; r < ds.NS; ++r) {
            for (int k = 0; k < ds.K; ++k) s.noisy(r, k) = read_f32(in);
        }
    }
    if (!in) throw std::runtime_error("truncated dataset file: " + path);
    return ds;
}

}  // namespace ccplan
