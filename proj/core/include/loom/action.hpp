#ifndef LOOM_ACTION_HPP
#define LOOM_ACTION_HPP

#include <memory>

#include "loom/contact.hpp"
#include "loom/costs.hpp"

namespace loom {

/// State chart for x = (q, v): retraction and difference act blockwise with
/// the configuration retraction of the underlying tree.
class StateSpace {
public:
  StateSpace() = default;
  explicit StateSpace(const RigidBodyTree* tree) : tree_(tree) {}

  int nx() const { return tree_->nq() + tree_->nv(); }
  int ndx() const { return 2 * tree_->nv(); }
  int nq() const { return tree_->nq(); }
  int nv() const { return tree_->nv(); }

  VecX integrate(const VecX& x, const VecX& dx) const;
  /// Tangent vector from x0 to x1.
  VecX difference(const VecX& x0, const VecX& x1) const;

private:
  const RigidBodyTree* tree_ = nullptr;
};

struct ActionData {
  VecX xnext;
  double cost = 0.0;
  VecX lambdas;  // contact forces realized during the step

  MatX fx, fu;
  VecX lx, lu;
  MatX lxx, lux, luu;

  void allocate(int ndx, int nu);
};

/// One node of the discretized optimal control problem: dynamics integration
/// plus the running (or terminal) cost.
class ActionModel {
public:
  virtual ~ActionModel() = default;

  virtual const StateSpace& state() const = 0;
  virtual int nu() const = 0;

  /// Control box; empty vectors mean unbounded.
  const VecX& control_lower() const { return u_lower_; }
  const VecX& control_upper() const { return u_upper_; }
  void set_control_bounds(const VecX& lower, const VecX& upper);
  bool has_control_bounds() const { return u_lower_.size() > 0; }

  /// Dynamics rollout and cost; fills data.xnext, data.cost, data.lambdas.
  virtual void calc(const VecX& x, const VecX& u, ActionData& data) const = 0;
  /// Terminal variant: cost only.
  virtual void calc(const VecX& x, ActionData& data) const = 0;

  /// Derivatives at (x, u); fills fx, fu, lx, lu, lxx, lux, luu.
  virtual void calc_diff(const VecX& x, const VecX& u, ActionData& data) const = 0;
  /// Terminal derivatives: state block only.
  virtual void calc_diff(const VecX& x, ActionData& data) const = 0;

private:
  VecX u_lower_, u_upper_;
};

/// Contact-constrained node: semi-implicit Euler over the constrained
/// forward dynamics, Gauss-Newton cost derivatives, finite-difference
/// dynamics derivatives in velocity space.
class ContactAction : public ActionModel {
public:
  ContactAction(const RigidBodyTree* tree, ContactSet contacts, CostModel cost, double dt,
                int nu);

  const StateSpace& state() const override { return state_; }
  int nu() const override { return nu_; }
  double dt() const { return dt_; }
  const CostModel& cost_model() const { return cost_; }
  CostModel& cost_model() { return cost_; }
  const ContactSet& contacts() const { return contacts_; }
  const RigidBodyTree& tree() const { return *tree_; }

  void calc(const VecX& x, const VecX& u, ActionData& data) const override;
  void calc(const VecX& x, ActionData& data) const override;
  void calc_diff(const VecX& x, const VecX& u, ActionData& data) const override;
  void calc_diff(const VecX& x, ActionData& data) const override;

  /// Finite-difference step for the dynamics derivatives.
  static constexpr double kFdStep = 1e-6;

private:
  VecX generalized_force(const VecX& u) const;
  VecX step(const VecX& x, const VecX& u, VecX* lambdas) const;

  const RigidBodyTree* tree_;
  StateSpace state_;
  ContactSet contacts_;
  CostModel cost_;
  double dt_;
  int nu_;
};

/// Discretized optimal control problem: N running nodes and a terminal node.
struct ShootingProblem {
  VecX x0;
  std::vector<std::shared_ptr<ActionModel>> running;
  std::shared_ptr<ActionModel> terminal;

  int horizon() const { return static_cast<int>(running.size()); }
  const StateSpace& state() const { return terminal->state(); }

  /// Total cost of a trajectory (recomputes every node).
  double calc(const std::vector<VecX>& xs, const std::vector<VecX>& us,
              std::vector<ActionData>& data) const;

  /// Per-node derivatives; runs nodes concurrently.
  void calc_diff(const std::vector<VecX>& xs, const std::vector<VecX>& us,
                 std::vector<ActionData>& data) const;

  /// Forward rollout from x0 with the given controls.
  std::vector<VecX> rollout(const std::vector<VecX>& us) const;

  void allocate(std::vector<ActionData>& data) const;
};

}  // namespace loom

#endif
