#include "ccplan/chain.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace ccplan {

namespace {

void require(bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument(what);
}

}  // namespace

double KinematicChain::reach() const {
    // Farthest any capsule point can get from the base: joint offsets up to
    // link k, plus that link's length, plus its radius; maximized over k.
    double best = 0.0, offsets = 0.0;
    for (const auto& l : links) {
        offsets += l.offset.norm();
        best = std::max(best, offsets + l.length + l.radius);
    }
    return best;
}

void KinematicChain::validate() const {
    require(dim == 2 || dim == 3, "chain: dim must be 2 or 3");
    require(!links.empty(), "chain: at least one link");
    const int n = joints();
    require(lower.size() == n && upper.size() == n, "chain: joint limit size mismatch");
    for (int i = 0; i < n; ++i) {
        require(lower[i] < upper[i], "chain: lower limit must be below upper");
        const auto& l = links[i];
        require(l.parent == i - 1, "chain: links must form a serial chain");
        require(l.offset.size() == dim, "chain: offset dimension mismatch");
        require(l.radius > 0.0, "chain: capsule radius must be positive");
        require(std::isfinite(l.length) && l.length >= 0.0, "chain: bad link length");
        if (dim == 3) require(std::abs(l.axis.norm() - 1.0) < 1e-9, "chain: axis must be unit");
    }
    require(base.translation.size() == dim && base.rotation.rows() == dim, "chain: base pose dimension mismatch");
}

FKResult forward_kinematics(const KinematicChain& chain, const Vec& q) {
    const int n = chain.joints();
    if (q.size() != n) throw std::invalid_argument("forward_kinematics: q dimension mismatch");

    FKResult fk;
    fk.link_poses.reserve(n);
    RigidPose cursor = chain.base;
    for (int i = 0; i < n; ++i) {
        const auto& link = chain.links[i];
        RigidPose joint;
        joint.translation = link.offset;
        if (chain.dim == 2) {
            joint.rotation = rot2(q[i]);
        } else {
            joint.rotation = axis_angle_matrix(link.axis, q[i]);
        }
        cursor = cursor.compose(joint);
        fk.link_poses.push_back(cursor);
    }
    RigidPose tip;
    tip.rotation = Mat::Identity(chain.dim, chain.dim);
    Vec t = Vec::Zero(chain.dim);
    t[0] = chain.links.back().length;
    tip.translation = t;
    fk.ee = cursor.compose(tip);
    return fk;
}

Vec pose_to_vector(const KinematicChain& chain, const RigidPose& pose) {
    Vec v(chain.pose_dim());
    if (chain.dim == 2) {
        v[0] = pose.translation[0];
        v[1] = pose.translation[1];
        v[2] = std::atan2(pose.rotation(1, 0), pose.rotation(0, 0));
    } else {
        v.head<3>() = pose.translation;
        v.tail<3>() = rotation_log(pose.rotation);
    }
    return v;
}

Vec ee_pose_vector(const KinematicChain& chain, const Vec& q) {
    return pose_to_vector(chain, forward_kinematics(chain, q).ee);
}

Mat jacobian(const KinematicChain& chain, const Vec& q) {
    const int n = chain.joints();
    const FKResult fk = forward_kinematics(chain, q);
    Mat J = Mat::Zero(chain.pose_dim(), n);
    const Vec p_ee = fk.ee.translation;

    if (chain.dim == 2) {
        for (int i = 0; i < n; ++i) {
            const Vec o = fk.link_poses[i].translation;
            J(0, i) = -(p_ee[1] - o[1]);
            J(1, i) = p_ee[0] - o[0];
            J(2, i) = 1.0;
        }
        return J;
    }

    // 3D: position rows are the geometric Jacobian; rotation rows map angular
    // velocity into the rotation-vector parameterization.
    const Eigen::Vector3d phi = rotation_log(fk.ee.rotation);
    const Eigen::Matrix3d jl_inv = so3_left_jacobian_inverse(phi);
    RigidPose parent = chain.base;
    for (int i = 0; i < n; ++i) {
        const Eigen::Vector3d axis_world = parent.rotation * chain.links[i].axis;
        const Eigen::Vector3d o = fk.link_poses[i].translation;
        J.block<3, 1>(0, i) = axis_world.cross(Eigen::Vector3d(p_ee - o));
        J.block<3, 1>(3, i) = jl_inv * axis_world;
        parent = fk.link_poses[i];
    }
    return J;
}

Mat point_jacobian(const KinematicChain& chain, const FKResult& fk, int link, const Vec& world_point) {
    const int n = chain.joints();
    Mat J = Mat::Zero(chain.dim, n);
    if (chain.dim == 2) {
        for (int i = 0; i <= link; ++i) {
            const Vec o = fk.link_poses[i].translation;
            J(0, i) = -(world_point[1] - o[1]);
            J(1, i) = world_point[0] - o[0];
        }
        return J;
    }
    RigidPose parent = chain.base;
    for (int i = 0; i <= link; ++i) {
        const Eigen::Vector3d axis_world = parent.rotation * chain.links[i].axis;
        const Eigen::Vector3d o = fk.link_poses[i].translation;
        J.block<3, 1>(0, i) = axis_world.cross(Eigen::Vector3d(world_point - o));
        parent = fk.link_poses[i];
    }
    return J;
}

std::vector<CapsuleSegment> link_segments(const KinematicChain& chain, const FKResult& fk) {
    std::vector<CapsuleSegment> segs;
    segs.reserve(chain.links.size());
    for (int k = 0; k < chain.joints(); ++k) {
        const RigidPose& pose = fk.link_poses[k];
        Vec local = Vec::Zero(chain.dim);
        local[0] = chain.links[k].length;
        segs.push_back({pose.translation, pose.apply(local), chain.links[k].radius});
    }
    return segs;
}

Vec link_point_distances(const KinematicChain& chain, const Vec& q, const Vec& x) {
    if (x.size() != chain.dim) throw std::invalid_argument("link_point_distances: point dimension mismatch");
    const FKResult fk = forward_kinematics(chain, q);
    Vec d(chain.joints());
    int k = 0;
    for (const auto& seg : link_segments(chain, fk)) {
        d[k++] = capsule_point_distance(x, seg.a, seg.b, seg.radius);
    }
    return d;
}

Mat link_point_distance_gradients(const KinematicChain& chain, const Vec& q, const Vec& x) {
    const FKResult fk = forward_kinematics(chain, q);
    const auto segs = link_segments(chain, fk);
    Mat G = Mat::Zero(chain.joints(), chain.joints());
    for (int k = 0; k < chain.joints(); ++k) {
        double t = 0.0;
        point_segment_distance(x, segs[k].a, segs[k].b, &t);
        const Vec closest = segs[k].a + t * (segs[k].b - segs[k].a);
        const Vec diff = x - closest;
        const double dist = diff.norm();
        if (dist < 1e-12) continue;  // on the axis: leave the row zero
        // Envelope theorem: hold t fixed, differentiate the closest point.
        const Mat ja = point_jacobian(chain, fk, k, segs[k].a);
        const Mat jb = point_jacobian(chain, fk, k, segs[k].b);
        const Mat jc = (1.0 - t) * ja + t * jb;
        G.row(k) = -(diff / dist).transpose() * jc;
    }
    return G;
}

KinematicChain default_planar_chain() {
    KinematicChain c;
    c.dim = 2;
    const double lengths[3] = {0.5, 0.4, 0.3};
    for (int i = 0; i < 3; ++i) {
        LinkGeometry l;
        l.parent = i - 1;
        l.offset = Vec::Zero(2);
        if (i > 0) l.offset[0] = lengths[i - 1];
        l.length = lengths[i];
        l.radius = 0.05;
        c.links.push_back(l);
    }
    c.lower = Vec::Constant(3, -kPi);
    c.upper = Vec::Constant(3, kPi);
    c.base = RigidPose::identity(2);
    return c;
}

KinematicChain default_spatial_chain() {
    KinematicChain c;
    c.dim = 3;
    const double lengths[3] = {0.5, 0.4, 0.3};
    const Eigen::Vector3d axes[3] = {{0, 0, 1}, {0, 1, 0}, {0, 1, 0}};
    for (int i = 0; i < 3; ++i) {
        LinkGeometry l;
        l.parent = i - 1;
        l.offset = Vec::Zero(3);
        if (i > 0) l.offset[0] = lengths[i - 1];
        l.axis = axes[i];
        l.length = lengths[i];
        l.radius = 0.05;
        c.links.push_back(l);
    }
    c.lower = Vec::Constant(3, -kPi);
    c.upper = Vec::Constant(3, kPi);
    c.base = RigidPose::identity(3);
    return c;
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

std::string chain_to_json(const KinematicChain& chain) {
    nlohmann::json j;
    j["d"] = chain.dim;
    j["n"] = chain.joints();
    nlohmann::json links = nlohmann::json::array();
    for (const auto& l : chain.links) {
        nlohmann::json lj;
        lj["parent"] = l.parent;
        lj["offset"] = vec_to_json(l.offset);
        lj["axis"] = {l.axis.x(), l.axis.y(), l.axis.z()};
        lj["length"] = l.length;
        lj["radius"] = l.radius;
        links.push_back(lj);
    }
    j["links"] = links;
    j["limits"]["lower"] = vec_to_json(chain.lower);
    j["limits"]["upper"] = vec_to_json(chain.upper);
    j["base"]["translation"] = vec_to_json(chain.base.translation);
    if (chain.dim == 2) {
        j["base"]["angle"] = std::atan2(chain.base.rotation(1, 0), chain.base.rotation(0, 0));
    } else {
        const Eigen::Vector3d rv = rotation_log(chain.base.rotation);
        j["base"]["rotvec"] = {rv.x(), rv.y(), rv.z()};
    }
    return j.dump(2);
}

KinematicChain chain_from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    KinematicChain c;
    c.dim = j.at("d").get<int>();
    for (const auto& lj : j.at("links")) {
        LinkGeometry l;
        l.parent = lj.at("parent").get<int>();
        l.offset = vec_from_json(lj.at("offset"));
        if (lj.contains("axis")) {
            const auto& a = lj["axis"];
            l.axis = Eigen::Vector3d(a[0].get<double>(), a[1].get<double>(), a[2].get<double>());
        }
        l.length = lj.at("length").get<double>();
        l.radius = lj.at("radius").get<double>();
        c.links.push_back(l);
    }
    c.lower = vec_from_json(j.at("limits").at("lower"));
    c.upper = vec_from_json(j.at("limits").at("upper"));
    c.base = RigidPose::identity(c.dim);
    if (j.contains("base")) {
        c.base.translation = vec_from_json(j["base"].at("translation"));
        if (c.dim == 2 && j["base"].contains("angle")) {
            c.base.rotation = rot2(j["base"]["angle"].get<double>());
        } else if (c.dim == 3 && j["base"].contains("rotvec")) {
            const auto& a = j["base"]["rotvec"];
            Eigen::Vector3d rv(a[0].get<double>(), a[1].get<double>(), a[2].get<double>());
            const double theta = rv.norm();
            c.base.rotation = theta < 1e-12 ? Eigen::Matrix3d::Identity()
                                            : axis_angle_matrix(rv / theta, theta);
        }
    }
    if (j.contains("n") && j["n"].get<int>() != c.joints()) {
        throw std::invalid_argument("chain json: n does not match number of links");
    }
    c.validate();
    return c;
}

KinematicChain load_chain(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open chain file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return chain_from_json(ss.str());
}

void save_chain(const KinematicChain& chain, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write chain file: " + path);
    out << chain_to_json(chain) << "\n";
}

}  // namespace ccplan
