#ifndef LOOM_DYNAMICS_HPP
#define LOOM_DYNAMICS_HPP

#include <optional>

#include "loom/model.hpp"

namespace loom {

/// Per-body external forces expressed in world axes with the body origin as
/// reference point; empty vector means no external forces.
using ExternalForces = std::vector<Force>;

/// Recursive Newton-Euler inverse dynamics:
///   tau = M(q) qdd + b(q, qdot) - (contributions of external forces)
VecX rnea(const RigidBodyTree& tree, const VecX& q, const VecX& v, const VecX& a,
          const ExternalForces& external = {});

/// Gravity and velocity-product generalized forces, b(q, qdot).
VecX bias_forces(const RigidBodyTree& tree, const VecX& q, const VecX& v);

/// Composite-rigid-body mass matrix M(q), symmetric.
MatX crba(const RigidBodyTree& tree, const VecX& q);

}  // namespace loom

#endif
