#ifndef LOOM_CONTACT_HPP
#define LOOM_CONTACT_HPP

#include "loom/dynamics.hpp"
#include "loom/kinematics.hpp"

namespace loom {

class ContactError : public Error {
public:
  using Error::Error;
};

class IllConditionedError : public Error {
public:
  using Error::Error;
};

enum class ContactKind { point_3d, flat_foot_6d };

/// One active contact: a frame pinned to the world, either by position only
/// (3 rows) or as a full flat-foot wrench (6 rows, linear rows first).
struct ContactSpec {
  FrameId frame = -1;
  ContactKind kind = ContactKind::point_3d;
  double kp = 0.0;  // Baumgarte position gain, 1/s^2
  double kd = 0.0;  // Baumgarte velocity gain, 1/s
  Placement anchor; // world pose the contact holds (used only when kp > 0)

  int rows() const { return kind == ContactKind::point_3d ? 3 : 6; }
};

struct ContactSet {
  std::vector<ContactSpec> contacts;

  int stacked_rows() const {
    int r = 0;
    for (const auto& c : contacts) r += c.rows();
    return r;
  }
  bool empty() const { return contacts.empty(); }
};

struct ConstrainedAccelResult {
  VecX qdd;
  VecX lambdas;          // stacked contact forces, declaration order
  double kkt_condition = 0.0;
};

/// Stacked contact Jacobian J_c (linear rows first per contact, then angular
/// rows for flat feet), in the local-world-aligned convention.
MatX contact_jacobian(const RigidBodyTree& tree, const VecX& q, const ContactSet& contacts);

/// Stacked drift Jdot_c * qdot.
VecX contact_drift(const RigidBodyTree& tree, const VecX& q, const VecX& v,
                   const ContactSet& contacts);

/// Position-level contact error against each anchor (for Baumgarte feedback
/// and validation).
VecX contact_position_error(const RigidBodyTree& tree, const VecX& q, const ContactSet& contacts);

/// Forward dynamics under bilateral contact constraints: solves
///   [ M   Jc^T ] [ qdd      ]   [ tau_gen - b            ]
///   [ Jc  0    ] [ -lambda  ] = [ -Jc_dot qdot - feedback ]
/// where feedback applies Baumgarte stabilization when gains are set.
/// `tau_gen` is the generalized force vector (actuation already mapped in).
ConstrainedAccelResult constrained_forward_dynamics(const RigidBodyTree& tree, const VecX& q,
                                                    const VecX& v, const VecX& tau_gen,
                                                    const ContactSet& contacts);

/// Inverse dynamics given contact forces: tau = M qdd + b - Jc^T lambda.
VecX constrained_inverse_dynamics(const RigidBodyTree& tree, const VecX& q, const VecX& v,
                                  const VecX& qdd, const ContactSet& contacts, const VecX& lambdas);

}  // namespace loom

#endif
