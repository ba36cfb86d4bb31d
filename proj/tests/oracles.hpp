// Independent reference implementations used as test oracles. These must not
// call the library code paths they are checking.
#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "ccplan/chain.hpp"
#include "ccplan/qp.hpp"
#include "ccplan/scene.hpp"

namespace oracles {

using ccplan::Mat;
using ccplan::Vec;

// End-effector pose of a planar serial chain via explicit homogeneous 3x3
// matrix products.
inline Eigen::Matrix3d homogeneous_fk_2d(const ccplan::KinematicChain& chain, const Vec& q) {
    Eigen::Matrix3d T = Eigen::Matrix3d::Identity();
    T.topLeftCorner<2, 2>() = chain.base.rotation;
    T.topRightCorner<2, 1>() = chain.base.translation;
    for (int i = 0; i < chain.joints(); ++i) {
        Eigen::Matrix3d shift = Eigen::Matrix3d::Identity();
        shift(0, 2) = chain.links[i].offset[0];
        shift(1, 2) = chain.links[i].offset[1];
        Eigen::Matrix3d rot = Eigen::Matrix3d::Identity();
        const double c = std::cos(q[i]), s = std::sin(q[i]);
        rot(0, 0) = c;
        rot(0, 1) = -s;
        rot(1, 0) = s;
        rot(1, 1) = c;
        T = T * shift * rot;
    }
    Eigen::Matrix3d tip = Eigen::Matrix3d::Identity();
    tip(0, 2) = chain.links.back().length;
    return T * tip;
}

// Same for a spatial chain via 4x4 matrices and Rodrigues rotations.
inline Eigen::Matrix4d homogeneous_fk_3d(const ccplan::KinematicChain& chain, const Vec& q) {
    auto rodrigues = [](const Eigen::Vector3d& axis, double angle) {
        Eigen::Matrix3d k;
        k << 0, -axis.z(), axis.y(), axis.z(), 0, -axis.x(), -axis.y(), axis.x(), 0;
        return Eigen::Matrix3d(Eigen::Matrix3d::Identity() + std::sin(angle) * k +
                               (1 - std::cos(angle)) * k * k);
    };
    Eigen::Matrix4d T = Eigen::Matrix4d::Identity();
    T.topLeftCorner<3, 3>() = chain.base.rotation;
    T.topRightCorner<3, 1>() = chain.base.translation;
    for (int i = 0; i < chain.joints(); ++i) {
        Eigen::Matrix4d step = Eigen::Matrix4d::Identity();
        step.topRightCorner<3, 1>() = chain.links[i].offset;
        Eigen::Matrix4d rot = Eigen::Matrix4d::Identity();
        rot.topLeftCorner<3, 3>() = rodrigues(chain.links[i].axis, q[i]);
        T = T * step * rot;
    }
    Eigen::Matrix4d tip = Eigen::Matrix4d::Identity();
    tip(0, 3) = chain.links.back().length;
    return T * tip;
}

// Distance to a capsule by dense sampling of its axis segment.
inline double dense_capsule_distance(const Vec& x, const Vec& a, const Vec& b, double radius,
                                     int samples = 100000) {
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= samples; ++i) {
        const double t = static_cast<double>(i) / samples;
        best = std::min(best, (x - (a + t * (b - a))).norm());
    }
    return best - radius;
}

// Central finite differences of a vector-valued function.
inline Mat fd_jacobian(const std::function<Vec(const Vec&)>& f, const Vec& x, double h) {
    const Vec f0 = f(x);
    Mat J(f0.size(), x.size());
    for (int i = 0; i < x.size(); ++i) {
        Vec xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        J.col(i) = (f(xp) - f(xm)) / (2.0 * h);
    }
    return J;
}

// Simpson quadrature on a fixed grid.
inline double simpson(const std::function<double(double)>& f, double lo, double hi, int intervals) {
    if (intervals % 2 == 1) ++intervals;
    const double h = (hi - lo) / intervals;
    double acc = f(lo) + f(hi);
    for (int i = 1; i < intervals; ++i) {
        acc += f(lo + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
    }
    return acc * h / 3.0;
}

// Numerical KL(N(mu,s^2) || N(mp,sp^2)) by quadrature in standardized
// coordinates.
inline double quadrature_gaussian_kl(double mu, double s, double mp, double sp) {
    auto integrand = [&](double t) {
        const double x = mu + s * t;
        const double log_psi = -0.5 * t * t - std::log(s) - 0.918938533204672742;
        const double zp = (x - mp) / sp;
        const double log_p = -0.5 * zp * zp - std::log(sp) - 0.918938533204672742;
        const double psi = std::exp(log_psi);
        return psi * (log_psi - log_p) * s;  // ds from substitution x = mu + s t
    };
    return simpson(integrand, -12.0, 12.0, 20000);
}

// Globally optimal QP solution by enumerating active sets of the (few)
// inequality rows: for each subset, solve the equality KKT system and keep
// feasible solutions with nonnegative inequality multipliers.
inline bool enumerate_qp(const ccplan::QPProblem& p, Vec* x_out, double* obj_out) {
    const int n = p.vars();
    const int me = static_cast<int>(p.E.rows());
    const int mi = static_cast<int>(p.A.rows());
    bool found = false;
    double best = std::numeric_limits<double>::infinity();
    Vec best_x;
    for (int mask = 0; mask < (1 << mi); ++mask) {
        std::vector<int> act;
        for (int i = 0; i < mi; ++i) {
            if (mask & (1 << i)) act.push_back(i);
        }
        const int ma = static_cast<int>(act.size());
        const int dim = n + me + ma;
        Mat K = Mat::Zero(dim, dim);
        Vec rhs(dim);
        K.topLeftCorner(n, n) = 2.0 * p.P;
        rhs.head(n) = -p.q;
        for (int i = 0; i < me; ++i) {
            K.block(n + i, 0, 1, n) = p.E.row(i);
            K.block(0, n + i, n, 1) = p.E.row(i).transpose();
            rhs[n + i] = p.e[i];
        }
        for (int i = 0; i < ma; ++i) {
            K.block(n + me + i, 0, 1, n) = p.A.row(act[i]);
            K.block(0, n + me + i, n, 1) = p.A.row(act[i]).transpose();
            rhs[n + me + i] = p.b[act[i]];
        }
        Eigen::FullPivLU<Mat> lu(K);
        if (!lu.isInvertible()) continue;
        const Vec sol = lu.solve(rhs);
        const Vec x = sol.head(n);
        bool ok = true;
        for (int i = 0; i < mi && ok; ++i) {
            if (p.A.row(i).dot(x) > p.b[i] + 1e-8) ok = false;
        }
        for (int i = 0; i < ma && ok; ++i) {
            if (sol[n + me + i] < -1e-8) ok = false;
        }
        if (!ok) continue;
        const double obj = x.dot(p.P * x) + p.q.dot(x);
        if (obj < best - 1e-12) {
            best = obj;
            best_x = x;
            found = true;
        }
    }
    if (found) {
        if (x_out) *x_out = best_x;
        if (obj_out) *obj_out = best;
    }
    return found;
}

// Independent dense edge collision check against the mean scene.
inline bool dense_path_collision_free(const ccplan::KinematicChain& chain,
                                      const ccplan::Scene& scene,
                                      const std::vector<Vec>& waypoints, double resolution) {
    for (std::size_t s = 1; s < waypoints.size(); ++s) {
        const Vec& qa = waypoints[s - 1];
        const Vec& qb = waypoints[s];
        const double dist = (qb - qa).lpNorm<Eigen::Infinity>();
        const int steps = std::max(1, static_cast<int>(std::ceil(dist / resolution)));
        for (int t = 0; t <= steps; ++t) {
            const Vec q = qa + (qb - qa) * (static_cast<double>(t) / steps);
            const auto fk = ccplan::forward_kinematics(chain, q);
            for (const auto& seg : ccplan::link_segments(chain, fk)) {
                for (const auto& pt : scene.points) {
                    const double d =
                        (pt.center - (seg.a + std::clamp((pt.center - seg.a).dot(seg.b - seg.a) /
                                                             std::max((seg.b - seg.a).squaredNorm(), 1e-16),
                                                         0.0, 1.0) *
                                                  (seg.b - seg.a)))
                            .norm();
                    if (d < seg.radius + pt.radius) return false;
                }
            }
        }
    }
    return true;
}

}  // namespace oracles
