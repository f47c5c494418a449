#ifndef LOOM_LOOP_CLOSURE_HPP
#define LOOM_LOOP_CLOSURE_HPP

#include <functional>
#include <optional>

#include "loom/kinematics.hpp"

namespace loom {

class ResolutionError : public Error {
public:
  ResolutionError(const std::string& submechanism, double residual, int iterations)
      : Error("loop closure of submechanism '" + submechanism + "' did not converge (residual " +
              std::to_string(residual) + " after " + std::to_string(iterations) + " iterations)"),
        submechanism_(submechanism),
        residual_(residual) {}
  const std::string& submechanism() const { return submechanism_; }
  double residual() const { return residual_; }

private:
  std::string submechanism_;
  double residual_;
};

class SingularityError : public Error {
public:
  using Error::Error;
};

class ActuationSingularityError : public Error {
public:
  using Error::Error;
};

/// A cut joint reintroduced as a translational coincidence constraint
/// between two frames of the submechanism's local tree, expressed in the
/// block root frame.
struct CutJoint {
  std::string name;
  FrameId frame_a = -1;
  FrameId frame_b = -1;
  static constexpr int rows = 3;
};

/// Drive-train coordinate slaved to another local coordinate:
/// q[follower] = multiplier * q[source] + offset.
struct CoupledCoordinate {
  int follower = -1;
  int source = -1;
  double multiplier = 1.0;
  double offset = 0.0;
};

enum class ResolverKind { analytical, numerical };

struct NewtonSettings {
  double tolerance = 1e-10;
  int max_iterations = 50;
  double min_step = 1.0 / 64.0;
  double rank_threshold = 1e-12;
};

/// Bundle of implicit-form constraint maps (phi, K, k) for one submechanism.
struct ImplicitConstraint {
  std::function<VecX(const VecX&)> residual;
  std::function<MatX(const VecX&)> jacobian;
  std::function<VecX(const VecX&, const VecX&)> drift;
  int rows = 0;
};

/// One closed-loop block of the serial composition. Owns a local spanning
/// tree whose coordinates are a contiguous slice of the global vector.
class Submechanism {
public:
  using AnalyticPosition = std::function<void(const VecX& y_local, VecX& q_local)>;

  Submechanism(std::string name, ResolverKind kind, RigidBodyTree local_tree,
               std::vector<int> independent, std::vector<CutJoint> cuts,
               std::vector<CoupledCoordinate> couplings = {}, VecX reference = VecX());

  const std::string& name() const { return name_; }
  ResolverKind kind() const { return kind_; }
  const RigidBodyTree& local_tree() const { return tree_; }
  int dim() const { return tree_.nq(); }
  int num_independent() const { return static_cast<int>(independent_.size()); }
  int num_constraints() const { return CutJoint::rows * static_cast<int>(cuts_.size()); }
  const std::vector<int>& independent_coords() const { return independent_; }
  const std::vector<int>& passive_coords() const { return passive_; }
  const std::vector<CutJoint>& cuts() const { return cuts_; }
  const std::vector<CoupledCoordinate>& couplings() const { return couplings_; }
  const VecX& reference() const { return reference_; }

  void set_analytic_position(AnalyticPosition fn) { analytic_ = std::move(fn); }
  void set_newton_settings(const NewtonSettings& s) { newton_ = s; }

  /// phi(q): stacked cut-joint position residuals in the block root frame.
  VecX constraint_residual(const VecX& q_local) const;
  /// K(q) = d phi / d q.
  MatX constraint_jacobian(const VecX& q_local) const;
  /// k(q, qdot) = -Kdot qdot.
  VecX constraint_drift(const VecX& q_local, const VecX& v_local) const;

  ImplicitConstraint implicit() const;

  /// Resolve the block: pins independent coordinates to y_local, applies
  /// couplings, and solves the passive coordinates. `q_guess` warm-starts
  /// the numerical path. Returns Newton iterations used (0 for analytical).
  int resolve(const VecX& y_local, VecX& q_local, const VecX* q_guess = nullptr) const;

  /// Damped Gauss-Newton iteration on phi(q) = 0 over the passive
  /// coordinates; independent coordinates must already be pinned in q_local.
  int resolve_numerical(VecX& q_local) const;

  /// Local explicit-form Jacobian G (dim x num_independent), implicit
  /// function theorem on the converged configuration.
  MatX explicit_jacobian(const VecX& q_local) const;

private:
  void apply_couplings(VecX& q_local) const;

  std::string name_;
  ResolverKind kind_;
  RigidBodyTree tree_;
  std::vector<int> independent_;
  std::vector<int> passive_;
  std::vector<CutJoint> cuts_;
  std::vector<CoupledCoordinate> couplings_;
  VecX reference_;
  AnalyticPosition analytic_;
  NewtonSettings newton_;
};

/// Per-caller warm-start and instrumentation state for closure resolution.
struct ClosureContext {
  VecX q;                            // last converged global configuration
  bool warm = false;
  std::vector<int> last_iterations;  // per block, most recent resolve
};

/// Serial (block-diagonal) composition of submechanisms: the explicit maps
/// q = gamma(y), qdot = G ydot, qddot = G yddot + g.
class ExplicitClosureMap {
public:
  ExplicitClosureMap() = default;
  explicit ExplicitClosureMap(std::vector<Submechanism> blocks);

  int n() const { return n_; }    // spanning-tree dimension
  int m() const { return m_; }    // independent dimension
  int n_c() const { return nc_; } // stacked constraint rows

  int num_blocks() const { return static_cast<int>(blocks_.size()); }
  const Submechanism& block(int i) const { return blocks_[i]; }
  int q_offset(int i) const { return q_offset_[i]; }
  int y_offset(int i) const { return y_offset_[i]; }
  int c_offset(int i) const { return c_offset_[i]; }

  /// Independent-coordinate slice of a global configuration.
  VecX extract_independent(const VecX& q) const;

  VecX gamma(const VecX& y, ClosureContext* ctx = nullptr) const;
  MatX G_matrix(const VecX& y, ClosureContext* ctx = nullptr) const;
  VecX g_drift(const VecX& y, const VecX& ydot, ClosureContext* ctx = nullptr) const;

  /// Stacked phi over all blocks, for verification.
  VecX constraint_residual(const VecX& q) const;

  /// Reference global posture (blocks' references concatenated).
  VecX reference() const;

  /// Step used for the directional finite difference behind g_drift.
  static constexpr double kDriftStep = 1e-6;

private:
  std::vector<Submechanism> blocks_;
  std::vector<int> q_offset_, y_offset_, c_offset_;
  int n_ = 0, m_ = 0, nc_ = 0;
};

/// Selection of the actuated spanning-tree coordinates, with the actuator
/// ratings used for validation.
struct ActuationMap {
  std::vector<std::string> names;
  std::vector<int> coords;  // global spanning-tree coordinate per actuator
  VecX rom_lower, rom_upper;
  VecX velocity_limit;
  VecX effort_limit;

  int p() const { return static_cast<int>(coords.size()); }
};

VecX actuator_positions(const ExplicitClosureMap& map, const ActuationMap& amap, const VecX& y,
                        ClosureContext* ctx = nullptr);
VecX actuator_velocities(const ExplicitClosureMap& map, const ActuationMap& amap, const VecX& y,
                         const VecX& ydot, ClosureContext* ctx = nullptr);
/// Virtual-work force mapping: solves (S G)^T tau_act = tau_y.
VecX actuator_forces(const ExplicitClosureMap& map, const ActuationMap& amap, const VecX& y,
                     const VecX& tau_y, ClosureContext* ctx = nullptr);

}  // namespace loom

#endif
