#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ccplan/chain.hpp"
#include "ccplan/rng.hpp"
#include "ccplan/scene.hpp"

namespace ccplan {

/// One training record: a configuration, a workspace point, the true per-link
/// distances and NS noisy draws of each.
struct TrainingSample {
    Vec q;          // n
    Vec x;          // d
    Vec true_dist;  // K
    Mat noisy;      // NS x K, true_dist + N(0, sigma^2) per entry
};

struct DatasetSizes {
    int configurations = 600;   // |Q|
    int random_points = 120;    // |P_R| per configuration
    int near_per_link = 10;     // |P_N| = K * near_per_link
    int inside_per_link = 20;   // |P_I| = K * inside_per_link
    int draws = 25;             // |NS|
};

/// Paper-scale preset: |Q|=3000, |P_R|=500, 10/20 per link, |NS|=50.
DatasetSizes paper_dataset_sizes();

struct Dataset {
    int n = 0, d = 0, K = 0, NS = 0;
    double sigma = 0.0;
    std::uint64_t seed = 0;
    std::vector<TrainingSample> samples;
};

/// Per configuration: P_R uniform points in `bounds`, near_per_link points in
/// a shell of width `near_shell` straddling each capsule surface, and
/// inside_per_link points strictly inside each capsule. Each point gets NS
/// noisy distance draws per link at std `sigma`.
Dataset generate_dataset(const KinematicChain& chain, const Aabb& bounds, const DatasetSizes& sizes,
                         double sigma, Rng& rng, double near_shell = 0.1);

/// Binary columnar layout documented in docs/FORMATS.md; packed 32-bit floats.
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

/// Fraction of samples whose min-link true distance is negative.
double collision_fraction(const Dataset& ds);

}  // namespace ccplan
