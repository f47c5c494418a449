#ifndef LOOM_BOX_FDDP_HPP
#define LOOM_BOX_FDDP_HPP

#include <iosfwd>
#include <optional>

#include "loom/action.hpp"

namespace loom {

class SolverFailure : public Error {
public:
  using Error::Error;
};

struct SolverSettings {
  int max_iters = 200;
  double convergence_tol = 1e-9;  // on the expected improvement at full step
  double gap_tolerance = 1e-9;    // feasibility declaration
  double reg_initial = 1e-9;
  double reg_min = 1e-9;
  double reg_max = 1e9;
  double reg_factor = 10.0;
  int line_search_steps = 11;        // 1, 1/2, ..., 1/2^10
  double accept_ratio = 0.1;         // descent acceptance on expected vs actual
  double accept_negative_ratio = 2.0;  // uphill acceptance while closing gaps
  double reg_decrease_step = 0.5;    // accepted step above this shrinks reg
  double reg_increase_step = 0.01;   // accepted step below this grows reg
  std::ostream* log = nullptr;       // optional per-iteration CSV log
};

struct SolveResult {
  std::vector<VecX> xs;
  std::vector<VecX> us;
  double cost = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> gaps;         // per-node defect norms at exit
  std::vector<double> cost_trace;   // cost after each accepted iteration
  std::vector<double> merit_trace;  // cost plus summed defect norms
};

/// Box-constrained feasibility-driven DDP. The backward pass solves a
/// bound-constrained quadratic subproblem per node (projected Newton) and
/// zeroes feedback rows of clamped controls; the forward pass rolls the
/// nonlinear dynamics while contracting the multiple-shooting defect gaps.
class BoxFddp {
public:
  BoxFddp(const ShootingProblem& problem, SolverSettings settings = {});

  SolveResult solve(const std::vector<VecX>& xs_init = {}, const std::vector<VecX>& us_init = {});

  // Exposed pieces (the tests drive them directly).
  void set_candidate(const std::vector<VecX>& xs, const std::vector<VecX>& us);
  void compute_gaps();
  /// set_candidate + gaps + derivatives, ready for a backward pass.
  void prepare(const std::vector<VecX>& xs, const std::vector<VecX>& us);
  bool backward_pass(double regularization);
  /// Nonlinear rollout with defect contraction; returns the candidate cost
  /// or NaN when the rollout failed.
  double forward_pass(double step_length);

  const std::vector<VecX>& feedforward() const { return k_; }
  const std::vector<MatX>& feedback() const { return K_; }
  const std::vector<VecX>& gaps() const { return fs_; }
  const std::vector<VecX>& xs_try() const { return xs_try_; }
  const std::vector<VecX>& us_try() const { return us_try_; }
  double expected_improvement_at(double step) const;

  /// Per-node bound-constrained quadratic subproblem, exposed for testing:
  /// minimizes 0.5 du^T Quu du + Qu^T du subject to lb <= du <= ub.
  struct BoxQpResult {
    VecX du;
    std::vector<bool> clamped;
    bool failed = false;  // free block not positive definite
  };
  static BoxQpResult solve_box_qp(const MatX& Quu, const VecX& Qu, const VecX& lb, const VecX& ub,
                                  const VecX& warm_start);

private:
  void calc_derivatives();
  double total_gap() const;

  const ShootingProblem* problem_;
  SolverSettings settings_;
  int N_ = 0;

  std::vector<ActionData> data_;
  std::vector<VecX> xs_, us_, xs_try_, us_try_, fs_;
  std::vector<VecX> Vx_, Qx_, Qu_, k_;
  std::vector<MatX> Vxx_, Qxx_, Qxu_, Quu_, K_;
  double cost_ = 0.0, cost_try_ = 0.0;
  bool is_feasible_ = false, was_feasible_ = false;
  double dg_ = 0.0, dq_ = 0.0, dv_ = 0.0;
};

}  // namespace loom

#endif
