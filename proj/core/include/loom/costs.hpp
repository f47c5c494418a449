#ifndef LOOM_COSTS_HPP
#define LOOM_COSTS_HPP

#include "loom/kinematics.hpp"

namespace loom {

enum class CostKind { com_target, torque_reg, posture_reg, frame_tracking };

/// One weighted squared-residual term, value = weight * ||r||^2.
struct CostTerm {
  CostKind kind = CostKind::posture_reg;
  double weight = 1.0;
  Vec3 com_reference = Vec3::Zero();           // com_target
  VecX posture_reference;                      // posture_reg, configuration (nq)
  FrameId frame = -1;                          // frame_tracking
  Vec3 frame_reference = Vec3::Zero();         // frame_tracking, position
  std::vector<int> activation_dims;            // residual row subset; empty = all

  static CostTerm com(double w, const Vec3& ref, std::vector<int> dims = {});
  static CostTerm torque(double w);
  static CostTerm posture(double w, const VecX& q_ref, std::vector<int> dims = {});
  static CostTerm frame_position(double w, FrameId frame, const Vec3& ref);
};

struct CostModel {
  std::vector<CostTerm> terms;
  bool is_terminal = false;

  /// Terminal models must not regularize torque.
  void validate() const;
};

/// Value with gradient and Gauss-Newton Hessian blocks in tangent
/// coordinates: x-part has dimension 2 nv (configuration tangent stacked on
/// velocity), u-part nu.
struct CostEvaluation {
  double value = 0.0;
  VecX lx, lu;
  MatX lxx, lux, luu;
};

CostEvaluation evaluate_cost(const RigidBodyTree& tree, const CostModel& model, const VecX& q,
                             const VecX& v, const VecX& u);

}  // namespace loom

#endif
