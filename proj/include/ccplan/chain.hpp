#pragma once

#include <string>
#include <vector>

#include "ccplan/geometry.hpp"

namespace ccplan {

/// One revolute joint plus the capsule attached to it. The joint origin sits
/// at `offset` in the parent link's frame and rotates about `axis` (d = 3; in
/// the planar case the axis is implicit). The capsule runs from the joint
/// origin along the rotated local +x by `length`.
struct LinkGeometry {
    int parent = -1;               // parent link index, -1 attaches to the base
    Vec offset;                    // d
    Eigen::Vector3d axis{0, 0, 1}; // unit, used when d == 3
    double length = 0.0;           // m
    double radius = 0.0;           // m, > 0
};

/// Serial n-DoF arm with capsule links (K == n, one capsule per joint).
struct KinematicChain {
    int dim = 2;  // workspace dimension d, 2 or 3
    std::vector<LinkGeometry> links;
    Vec lower, upper;  // joint limits, radians
    RigidPose base;

    int joints() const { return static_cast<int>(links.size()); }
    int pose_dim() const { return dim == 2 ? 3 : 6; }
    double reach() const;  // sum of link lengths plus max radius

    /// Throws std::invalid_argument on inconsistent dimensions or limits.
    void validate() const;
};

struct FKResult {
    std::vector<RigidPose> link_poses;  // frame of each joint after its rotation
    RigidPose ee;                       // tip frame (end of the last capsule)
};

/// World segment endpoints of one capsule.
struct CapsuleSegment {
    Vec a, b;
    double radius;
};

FKResult forward_kinematics(const KinematicChain& chain, const Vec& q);

/// EE pose as a flat vector: [x, y, theta] (d = 2) or [x, y, z, rotvec] (d = 3).
Vec ee_pose_vector(const KinematicChain& chain, const Vec& q);
Vec pose_to_vector(const KinematicChain& chain, const RigidPose& pose);

/// Task-space Jacobian of ee_pose_vector, pose_dim x n.
Mat jacobian(const KinematicChain& chain, const Vec& q);

/// Jacobian of a world point rigidly attached to link `link`, d x n.
Mat point_jacobian(const KinematicChain& chain, const FKResult& fk, int link, const Vec& world_point);

std::vector<CapsuleSegment> link_segments(const KinematicChain& chain, const FKResult& fk);

/// Signed distance from point x to each capsule (world frame); entry k is
/// negative iff x penetrates link k.
Vec link_point_distances(const KinematicChain& chain, const Vec& q, const Vec& x);

/// d/dq of link_point_distances (K x n); valid almost everywhere, zero row
/// where the point sits exactly on a capsule axis.
Mat link_point_distance_gradients(const KinematicChain& chain, const Vec& q, const Vec& x);

/// Default desk-scale arm: 3 planar links of lengths (0.5, 0.4, 0.3) m,
/// capsule radius 0.05 m, joint limits ±pi.
KinematicChain default_planar_chain();
/// Same topology lifted to d = 3 with axes (z, y, y).
KinematicChain default_spatial_chain();

KinematicChain load_chain(const std::string& path);
void save_chain(const KinematicChain& chain, const std::string& path);
std::string chain_to_json(const KinematicChain& chain);
KinematicChain chain_from_json(const std::string& text);

}  // namespace ccplan
