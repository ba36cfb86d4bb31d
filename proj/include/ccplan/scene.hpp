#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ccplan/chain.hpp"
#include "ccplan/rng.hpp"

namespace ccplan {

/// One noisily sensed sphere. sigma = 0 marks exactly known geometry.
struct EnvironmentPoint {
    Vec center;          // mean center, d
    double radius = 0.0;
    double sigma = 0.0;  // isotropic Gaussian std of the sensed center
    int object = -1;     // object id for grouped perturbation; -1 = support geometry
};

struct Aabb {
    Vec lo, hi;
    bool contains(const Vec& p) const;
    Vec sample(Rng& rng) const;
};

struct Scene {
    std::vector<EnvironmentPoint> points;
    Aabb bounds;

    int dim() const { return static_cast<int>(bounds.lo.size()); }
    int size() const { return static_cast<int>(points.size()); }
};

/// End-effector pose ball used as the planning goal.
struct GoalRegion {
    Vec position;       // d
    Vec rotation;       // angle (size 1, d = 2) or rotation vector (size 3)
    double position_tol = 0.02;
    double angle_tol = 0.1;

    bool contains(const KinematicChain& chain, const Vec& q) const;
    Vec pose_vector() const;  // [position; rotation]
};

struct ProblemInstance {
    Scene scene;
    Vec q_start;
    GoalRegion goal;
    std::uint64_t seed = 0;
};

/// Jitter applied when deriving problems from a nominal scene. Ranges are
/// half-widths of uniform distributions.
struct PerturbationSpec {
    double object_jitter = 0.025;    // m per axis
    double object_rot_deg = 15.0;    // about each object centroid
    double base_jitter = 0.10;       // m per axis (relative scene <-> base pose)
    double base_rot_deg = 90.0;
    std::uint64_t seed = 0;
};

struct SceneGenConfig {
    int objects = 6;
    int min_spheres_per_object = 2;
    int max_spheres_per_object = 4;
    double sphere_radius_lo = 0.01;  // sensed sphere radii
    double sphere_radius_hi = 0.03;
    double object_blob_radius = 0.05;
    double sensor_sigma = 0.02;  // noisy clutter
    // Clutter annulus as fractions of the arm's reach. The lower bound keeps
    // objects outside the first link's sweep disk even after base jitter;
    // obstacles inside it cut the q0 axis into disconnected slices.
    double clutter_radius_lo = 0.65;
    double clutter_radius_hi = 0.92;
    double table_y = -0.15;  // support bar height (d = 2) / z (d = 3)
    double table_radius = 0.04;
    double table_pitch = 0.08;
};

struct ProblemGenConfig {
    int max_tries = 500;  // rejection attempts per problem
    // Start/goal must clear noisy geometry by this margin (about 6 sigma, so
    // the fixed endpoint configurations carry negligible collision risk of
    // their own) and merely not touch exactly known geometry.
    double noisy_clearance_margin = 0.12;
    double static_clearance = 0.01;
    double min_ee_separation = 0.7;  // between start and goal EE positions, m
    double grasp_lo = 0.12, grasp_hi = 0.45;  // preferred goal EE distance to some object
};

/// Nominal tabletop-style scene: a noise-free support bar plus noisy sphere
/// clusters ("objects") scattered in the arm's workspace.
Scene default_tabletop_scene(const KinematicChain& chain, const SceneGenConfig& cfg, Rng& rng);

/// Draw one realization: each center gets isotropic Gaussian noise of its
/// sigma; radii and noise-free points unchanged.
Scene sample_scene_realization(const Scene& scene, Rng& rng);

/// Randomly perturbed copies of the nominal scene with sampled start/goal
/// pairs. Deterministic given spec.seed. Throws std::runtime_error when
/// rejection sampling exhausts its budget.
std::vector<ProblemInstance> generate_problems(const KinematicChain& chain, const Scene& nominal,
                                               const PerturbationSpec& spec, int count,
                                               const ProblemGenConfig& gen = {});

/// Collision and clearance against the mean geometry (centers at their means).
double scene_clearance(const KinematicChain& chain, const Vec& q, const Scene& scene);
/// Clearance against noisy points only (sigma > 0).
double noisy_scene_clearance(const KinematicChain& chain, const Vec& q, const Scene& scene);
bool config_in_collision(const KinematicChain& chain, const Vec& q, const Scene& scene);

/// Copy with the radius of every noisy point scaled by (1 + ratio).
Scene inflate_scene(const Scene& scene, double ratio);

std::string scene_to_json(const Scene& scene);
Scene scene_from_json(const std::string& text);
void save_scene(const Scene& scene, const std::string& path);
Scene load_scene(const std::string& path);

std::string problem_to_json(const ProblemInstance& p);
ProblemInstance problem_from_json(const std::string& text);
void save_problem(const ProblemInstance& p, const std::string& path);
ProblemInstance load_problem(const std::string& path);

}  // namespace ccplan
