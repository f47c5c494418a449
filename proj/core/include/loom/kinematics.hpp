#ifndef LOOM_KINEMATICS_HPP
#define LOOM_KINEMATICS_HPP

#include "loom/model.hpp"

namespace loom {

/// World placement of every body frame.
std::vector<Placement> forward_kinematics(const RigidBodyTree& tree, const VecX& q);

Placement frame_placement(const RigidBodyTree& tree, const std::vector<Placement>& body_X,
                          FrameId frame);
Placement frame_placement(const RigidBodyTree& tree, const VecX& q, FrameId frame);

/// Body placements plus spatial velocities and zero-qdd spatial accelerations
/// (body coordinates); shared by velocity/drift queries over many frames.
struct MotionCache {
  std::vector<Placement> X;
  std::vector<Motion> v;
  std::vector<Motion> a_bias;
};
MotionCache propagate_motion(const RigidBodyTree& tree, const VecX& q, const VecX& v);

/// Frame Jacobian in local-world-aligned convention: rows 0-2 angular, 3-5
/// linear, so that J * v is the world angular velocity stacked on the world
/// velocity of the frame origin.
MatX frame_jacobian(const RigidBodyTree& tree, const VecX& q, FrameId frame);

/// Same, reusing precomputed body placements; writes into a 6 x nv block.
void frame_jacobian(const RigidBodyTree& tree, const VecX& q, const std::vector<Placement>& body_X,
                    FrameId frame, Eigen::Ref<MatX> J);

Motion frame_velocity(const RigidBodyTree& tree, const MotionCache& cache, FrameId frame);
Motion frame_drift(const RigidBodyTree& tree, const MotionCache& cache, FrameId frame);

/// World spatial velocity of a frame (local-world-aligned at the frame origin).
Motion frame_velocity(const RigidBodyTree& tree, const VecX& q, const VecX& v, FrameId frame);

/// Classical frame acceleration with zero joint acceleration, i.e. the drift
/// term Jdot * qdot in the same row convention as frame_jacobian.
Motion frame_drift(const RigidBodyTree& tree, const VecX& q, const VecX& v, FrameId frame);

Vec3 com_position(const RigidBodyTree& tree, const VecX& q);
MatX com_jacobian(const RigidBodyTree& tree, const VecX& q);

}  // namespace loom

#endif
