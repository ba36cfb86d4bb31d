#include "ccplan/scene.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace ccplan {

bool Aabb::contains(const Vec& p) const {
    for (int i = 0; i < lo.size(); ++i) {
        if (p[i] < lo[i] || p[i] > hi[i]) return false;
    }
    return true;
}

Vec Aabb::sample(Rng& rng) const {
    Vec p(lo.size());
    for (int i = 0; i < lo.size(); ++i) p[i] = rng.uniform(lo[i], hi[i]);
    return p;
}

Vec GoalRegion::pose_vector() const {
    Vec v(position.size() + rotation.size());
    v.head(position.size()) = position;
    v.tail(rotation.size()) = rotation;
    return v;
}

bool GoalRegion::contains(const KinematicChain& chain, const Vec& q) const {
    const Vec pose = ee_pose_vector(chain, q);
    const int d = chain.dim;
    if ((pose.head(d) - position).norm() > position_tol) return false;
    if (d == 2) return std::abs(wrap_angle(pose[2] - rotation[0])) <= angle_tol;
    // Angle of the relative rotation in 3D.
    const Eigen::Vector3d a = pose.tail<3>(), b = rotation;
    const Eigen::Matrix3d ra = a.norm() < 1e-12 ? Eigen::Matrix3d::Identity()
                                                : axis_angle_matrix(a.normalized(), a.norm());
    const Eigen::Matrix3d rb = b.norm() < 1e-12 ? Eigen::Matrix3d::Identity()
                                                : axis_angle_matrix(b.normalized(), b.norm());
    return rotation_log(ra.transpose() * rb).norm() <= angle_tol;
}

namespace {

double clearance_impl(const KinematicChain& chain, const Vec& q, const Scene& scene,
                      bool noisy_only) {
    const FKResult fk = forward_kinematics(chain, q);
    const auto segs = link_segments(chain, fk);
    double clearance = std::numeric_limits<double>::infinity();
    for (const auto& pt : scene.points) {
        if (noisy_only && pt.sigma <= 0.0) continue;
        for (const auto& seg : segs) {
            const double d = capsule_point_distance(pt.center, seg.a, seg.b, seg.radius) - pt.radius;
            clearance = std::min(clearance, d);
        }
    }
    return clearance;
}

}  // namespace

double scene_clearance(const KinematicChain& chain, const Vec& q, const Scene& scene) {
    return clearance_impl(chain, q, scene, false);
}

double noisy_scene_clearance(const KinematicChain& chain, const Vec& q, const Scene& scene) {
    return clearance_impl(chain, q, scene, true);
}

bool config_in_collision(const KinematicChain& chain, const Vec& q, const Scene& scene) {
    return scene_clearance(chain, q, scene) < 0.0;
}

Scene inflate_scene(const Scene& scene, double ratio) {
    if (ratio < 0.0) throw std::invalid_argument("inflate_scene: ratio must be >= 0");
    Scene out = scene;
    for (auto& pt : out.points) {
        if (pt.sigma > 0.0) pt.radius *= 1.0 + ratio;
    }
    return out;
}

Scene sample_scene_realization(const Scene& scene, Rng& rng) {
    Scene out = scene;
    for (auto& pt : out.points) {
        if (pt.sigma <= 0.0) continue;
        for (int i = 0; i < pt.center.size(); ++i) pt.center[i] += pt.sigma * rng.normal();
    }
    return out;
}

Scene default_tabletop_scene(const KinematicChain& chain, const SceneGenConfig& cfg, Rng& rng) {
    const int d = chain.dim;
    Scene scene;
    // Symmetric box: base-pose jitter may rotate the scene arbitrarily.
    scene.bounds.lo = Vec::Constant(d, -1.5);
    scene.bounds.hi = Vec::Constant(d, 1.5);

    // Noise-free support bar along x at the table height.
    for (double x = -1.3; x <= 1.3 + 1e-9; x += cfg.table_pitch) {
        EnvironmentPoint pt;
        pt.center = Vec::Zero(d);
        pt.center[0] = x;
        pt.center[d - 1] = cfg.table_y;
        pt.radius = cfg.table_radius;
        pt.sigma = 0.0;
        pt.object = -1;
        scene.points.push_back(pt);
    }

    // Noisy clutter: sphere clusters in the reachable annulus above the bar.
    const double reach = chain.reach();
    for (int obj = 0; obj < cfg.objects; ++obj) {
        const double r_center = rng.uniform(cfg.clutter_radius_lo * reach, cfg.clutter_radius_hi * reach);
        const double ang = rng.uniform(-kPi / 6.0, kPi + kPi / 6.0);
        Vec c = Vec::Zero(d);
        c[0] = r_center * std::cos(ang);
        c[1] = r_center * std::sin(ang);
        if (d == 3) {
            c[1] = r_center * std::sin(ang) * 0.4;
            c[2] = rng.uniform(cfg.table_y + 0.2, 0.8);
        }
        if (c[d - 1] < cfg.table_y + 0.15) c[d - 1] = cfg.table_y + 0.15;
        const int spheres = cfg.min_spheres_per_object +
                            static_cast<int>(rng.uniform_int(
                                cfg.max_spheres_per_object - cfg.min_spheres_per_object + 1));
        for (int s = 0; s < spheres; ++s) {
            EnvironmentPoint pt;
            pt.center = c;
            for (int i = 0; i < d; ++i) {
                pt.center[i] += rng.uniform(-cfg.object_blob_radius, cfg.object_blob_radius);
            }
            pt.radius = rng.uniform(cfg.sphere_radius_lo, cfg.sphere_radius_hi);
            pt.sigma = cfg.sensor_sigma;
            pt.object = obj;
            scene.points.push_back(pt);
        }
    }
    return scene;
}

namespace {

// Rigid in-plane rotation about a pivot (applied to the first two axes in 3D;
// adequate for the desk-scale scene jitter).
Vec rotate_about(const Vec& p, const Vec& pivot, double angle) {
    Vec out = p;
    const double c = std::cos(angle), s = std::sin(angle);
    const double dx = p[0] - pivot[0], dy = p[1] - pivot[1];
    out[0] = pivot[0] + c * dx - s * dy;
    out[1] = pivot[1] + s * dx + c * dy;
    return out;
}

Scene perturb_scene(const Scene& nominal, const PerturbationSpec& spec, Rng& rng) {
    Scene out = nominal;
    const int d = nominal.dim();

    // Object-wise jitter: rigid translation plus rotation about the centroid.
    int max_obj = -1;
    for (const auto& pt : nominal.points) max_obj = std::max(max_obj, pt.object);
    for (int obj = 0; obj <= max_obj; ++obj) {
        Vec centroid = Vec::Zero(d);
        int count = 0;
        for (const auto& pt : nominal.points) {
            if (pt.object == obj) {
                centroid += pt.center;
                ++count;
            }
        }
        if (count == 0) continue;
        centroid /= count;
        Vec shift(d);
        for (int i = 0; i < d; ++i) shift[i] = rng.uniform(-spec.object_jitter, spec.object_jitter);
        const double rot = rng.uniform(-1.0, 1.0) * spec.object_rot_deg * kPi / 180.0;
        for (auto& pt : out.points) {
            if (pt.object != obj) continue;
            pt.center = rotate_about(pt.center, centroid, rot) + shift;
        }
    }

    // Base-relative jitter: rigid transform of the whole scene about the base.
    Vec base_shift(d);
    for (int i = 0; i < d; ++i) base_shift[i] = rng.uniform(-spec.base_jitter, spec.base_jitter);
    const double base_rot = rng.uniform(-1.0, 1.0) * spec.base_rot_deg * kPi / 180.0;
    for (auto& pt : out.points) {
        pt.center = rotate_about(pt.center, Vec::Zero(d), base_rot) + base_shift;
        // Grow the box rather than distort the geometry.
        out.bounds.lo = out.bounds.lo.cwiseMin(pt.center);
        out.bounds.hi = out.bounds.hi.cwiseMax(pt.center);
    }
    return out;
}

Vec sample_config(const KinematicChain& chain, Rng& rng) {
    Vec q(chain.joints());
    for (int i = 0; i < chain.joints(); ++i) q[i] = rng.uniform(chain.lower[i], chain.upper[i]);
    return q;
}

}  // namespace

std::vector<ProblemInstance> generate_problems(const KinematicChain& chain, const Scene& nominal,
                                               const PerturbationSpec& spec, int count,
                                               const ProblemGenConfig& gen) {
    if (count < 1) throw std::invalid_argument("generate_problems: count must be >= 1");
    Rng root(spec.seed);
    std::vector<ProblemInstance> problems;
    problems.reserve(count);

    for (int p = 0; p < count; ++p) {
        ProblemInstance inst;
        inst.seed = spec.seed + static_cast<std::uint64_t>(p);
        bool ok = false;

        // A jitter draw can produce a degenerate scene (e.g. the support bar
        // swung through the arm base); such draws are discarded and redrawn.
        for (int redraw = 0; redraw < 20 && !ok; ++redraw) {
            Rng rng = root.substream(static_cast<std::uint64_t>(p) * 64 + redraw);
            inst.scene = perturb_scene(nominal, spec, rng);

            // Start and goal-seed configurations: clear of static geometry
            // and a noisy-clearance margin so the fixed endpoints carry
            // negligible collision risk of their own.
            auto admissible = [&](const Vec& q) {
                return scene_clearance(chain, q, inst.scene) >= gen.static_clearance &&
                       noisy_scene_clearance(chain, q, inst.scene) >= gen.noisy_clearance_margin;
            };
            for (int attempt = 0; attempt < gen.max_tries && !ok; ++attempt) {
                const Vec q_start = sample_config(chain, rng);
                if (!admissible(q_start)) continue;
                const Vec ee_start = ee_pose_vector(chain, q_start);

                for (int gtry = 0; gtry < 40; ++gtry) {
                    const Vec q_goal = sample_config(chain, rng);
                    if (!admissible(q_goal)) continue;
                    const Vec ee_goal = ee_pose_vector(chain, q_goal);
                    if ((ee_goal.head(chain.dim) - ee_start.head(chain.dim)).norm() <
                        gen.min_ee_separation) {
                        continue;
                    }
                    // Prefer grasp-like goals that end near some object.
                    if (attempt < gen.max_tries / 2) {
                        bool near_object = false;
                        for (const auto& pt : inst.scene.points) {
                            if (pt.object < 0) continue;
                            const double dist = (pt.center - ee_goal.head(chain.dim)).norm();
                            if (dist >= gen.grasp_lo && dist <= gen.grasp_hi) {
                                near_object = true;
                                break;
                            }
                        }
                        if (!near_object) continue;
                    }
                    inst.q_start = q_start;
                    inst.goal.position = ee_goal.head(chain.dim);
                    inst.goal.rotation = ee_goal.tail(chain.pose_dim() - chain.dim);
                    ok = true;
                    break;
                }
            }
        }
        if (!ok) {
            throw std::runtime_error("generate_problems: rejection sampling failed for problem " +
                                     std::to_string(p));
        }
        problems.push_back(std::move(inst));
    }
    return problems;
}

namespace {

nlohmann::json vec_to_json(const Vec& v) {
    nlohmann::json a = nlohmann::json::array();
    for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

Vec vec_from_json(const nlohmann::json& a) {
    Vec v(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<int>(i)] = a[i].get<double>();
    return v;
}

}  // namespace

std::string scene_to_json(const Scene& scene) {
    nlohmann::json j;
    j["d"] = scene.dim();
    j["bounds"]["lo"] = vec_to_json(scene.bounds.lo);
    j["bounds"]["hi"] = vec_to_json(scene.bounds.hi);
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& pt : scene.points) {
        nlohmann::json pj;
        pj["c"] = vec_to_json(pt.center);
        pj["r"] = pt.radius;
        pj["sigma"] = pt.sigma;
        pj["object"] = pt.object;
        pts.push_back(pj);
    }
    j["points"] = pts;
    return j.dump(2);
}

Scene scene_from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    Scene scene;
    scene.bounds.lo = vec_from_json(j.at("bounds").at("lo"));
    scene.bounds.hi = vec_from_json(j.at("bounds").at("hi"));
    for (const auto& pj : j.at("points")) {
        EnvironmentPoint pt;
        pt.center = vec_from_json(pj.at("c"));
        pt.radius = pj.at("r").get<double>();
        pt.sigma = pj.at("sigma").get<double>();
        pt.object = pj.value("object", -1);
        if (pt.radius < 0.0 || pt.sigma < 0.0) throw std::invalid_argument("scene: negative radius or sigma");
        scene.points.push_back(pt);
    }
    if (scene.points.empty()) throw std::invalid_argument("scene: no points");
    return scene;
}

void save_scene(const Scene& scene, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write scene file: " + path);
    out << scene_to_json(scene) << "\n";
}

Scene load_scene(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open scene file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return scene_from_json(ss.str());
}

std::string problem_to_json(const ProblemInstance& p) {
    nlohmann::json j;
    j["scene"] = nlohmann::json::parse(scene_to_json(p.scene));
    j["q_start"] = vec_to_json(p.q_start);
    j["goal"]["position"] = vec_to_json(p.goal.position);
    j["goal"]["rotation"] = vec_to_json(p.goal.rotation);
    j["goal"]["position_tol"] = p.goal.position_tol;
    j["goal"]["angle_tol"] = p.goal.angle_tol;
    j["seed"] = p.seed;
    return j.dump(2);
}

ProblemInstance problem_from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    ProblemInstance p;
    p.scene = scene_from_json(j.at("scene").dump());
    p.q_start = vec_from_json(j.at("q_start"));
    p.goal.position = vec_from_json(j.at("goal").at("position"));
    p.goal.rotation = vec_from_json(j.at("goal").at("rotation"));
    p.goal.position_tol = j["goal"].value("position_tol", 0.02);
    p.goal.angle_tol = j["goal"].value("angle_tol", 0.1);
    p.seed = j.value("seed", 0ULL);
    return p;
}

void save_problem(const ProblemInstance& p, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write problem file: " + path);
    out << problem_to_json(p) << "\n";
}

ProblemInstance load_problem(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open problem file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return problem_from_json(ss.str());
}

}  // namespace ccplan
