#include <doctest.h>

#include "loom/dynamics.hpp"
#include "loom/kinematics.hpp"
#include "loom/model_io.hpp"
#include "test_helpers.hpp"

using namespace loom;
namespace lt = loom::testing;

namespace {

const HybridModel& model() {
  static HybridModel m = build_synthetic_recupera();
  return m;
}

VecX sample_rom(std::mt19937& gen) {
  const auto& m = model();
  VecX lo = m.independent_lower(), hi = m.independent_upper();
  std::uniform_real_distribution<double> u(0.0, 1.0);
  VecX y(m.m());
  for (int k = 0; k < m.m(); ++k) y[k] = lo[k] + (hi[k] - lo[k]) * u(gen);
  return y;
}

}  // namespace

TEST_CASE("published topology counts are exact") {
  const auto& m = model();
  CHECK(m.closure.n() == 148);
  CHECK(m.closure.m() == 20);
  CHECK(m.actuation.p() == 20);
  CHECK(m.closure.n_c() == 102);
  CHECK(m.full_tree.nq() == 148);

  REQUIRE(m.closure.num_blocks() == 7);
  const int expected_constraints[7] = {18, 18, 6, 18, 18, 6, 18};
  const int expected_indep[7] = {6, 3, 1, 3, 3, 1, 3};
  for (int i = 0; i < 7; ++i) {
    CHECK(m.closure.block(i).num_constraints() == expected_constraints[i]);
    CHECK(m.closure.block(i).num_independent() == expected_indep[i]);
  }
}

TEST_CASE("total mass matches the published 34.68 kg") {
  const auto& m = model();
  CHECK(m.abstraction.total_mass() == doctest::Approx(34.68).epsilon(1e-12));
  // The full tree excludes only the fixed pelvis base.
  CHECK(m.full_tree.total_mass() < 34.68);
}

TEST_CASE("tree abstraction has 20 joints plus a floating base") {
  const auto& m = model();
  CHECK(m.abstraction.nq() == 27);
  CHECK(m.abstraction.nv() == 26);
  CHECK(m.abstraction.has_frame("sole_left"));
  CHECK(m.abstraction.has_frame("sole_right"));
  CHECK(m.feet.size() == 2);
}

TEST_CASE("reference posture is the calibration point") {
  const auto& m = model();
  VecX q_ref = m.closure.reference();
  VecX y_ref = m.closure.extract_independent(q_ref);
  VecX q = m.closure.gamma(y_ref);
  CHECK((q - q_ref).lpNorm<Eigen::Infinity>() < 1e-8);
  CHECK(m.closure.constraint_residual(q).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("standing reference puts both soles on the ground") {
  const auto& m = model();
  auto fk = forward_kinematics(m.abstraction, m.abstraction_q0);
  for (const char* sole : {"sole_left", "sole_right"}) {
    Placement X = frame_placement(m.abstraction, fk, m.abstraction.frame_index(sole));
    CHECK(std::abs(X.translation.z()) < 1e-9);
    CHECK((X.rotation - Mat3::Identity()).lpNorm<Eigen::Infinity>() < 1e-9);
  }
  Vec3 com = com_position(m.abstraction, m.abstraction_q0);
  CHECK(std::abs(com.x()) < 0.08);
  CHECK(std::abs(com.y()) < 1e-6);
}

TEST_CASE("closure consistency across the independent-joint range of motion") {
  const auto& m = model();
  std::mt19937 gen(777);
  double worst_phi = 0, worst_kg = 0, worst_kgk = 0;
  for (int s = 0; s < 150; ++s) {
    VecX y = sample_rom(gen);
    ClosureContext ctx;
    VecX q = m.closure.gamma(y, &ctx);
    worst_phi = std::max(worst_phi, m.closure.constraint_residual(q).lpNorm<Eigen::Infinity>());
    if (s % 10 != 0) continue;
    MatX G = m.closure.G_matrix(y, &ctx);
    VecX ydot(m.m());
    for (int k = 0; k < m.m(); ++k) ydot[k] = lt::uniform(-1, 1);
    VecX g = m.closure.g_drift(y, ydot, &ctx);
    for (int i = 0; i < m.closure.num_blocks(); ++i) {
      const auto& blk = m.closure.block(i);
      VecX ql = q.segment(m.closure.q_offset(i), blk.dim());
      MatX K = blk.constraint_jacobian(ql);
      MatX Gl = G.block(m.closure.q_offset(i), m.closure.y_offset(i), blk.dim(), blk.num_independent());
      worst_kg = std::max(worst_kg, (K * Gl).lpNorm<Eigen::Infinity>());
      VecX vl = Gl * ydot.segment(m.closure.y_offset(i), blk.num_independent());
      VecX k_drift = blk.constraint_drift(ql, vl);
      VecX gl = g.segment(m.closure.q_offset(i), blk.dim());
      worst_kgk = std::max(worst_kgk, (K * gl - k_drift).lpNorm<Eigen::Infinity>());
    }
  }
  CHECK(worst_phi <= 1e-8);
  CHECK(worst_kg <= 1e-6);
  CHECK(worst_kgk <= 1e-6);
}

TEST_CASE("G carries the seven-block serial sparsity pattern") {
  const auto& m = model();
  std::mt19937 gen(31);
  VecX y = sample_rom(gen);
  MatX G = m.closure.G_matrix(y);
  CHECK(G.rows() == 148);
  CHECK(G.cols() == 20);
  for (int i = 0; i < m.closure.num_blocks(); ++i) {
    for (int j = 0; j < m.closure.num_blocks(); ++j) {
      if (i == j) continue;
      MatX off = G.block(m.closure.q_offset(i), m.closure.y_offset(j), m.closure.block(i).dim(),
                         m.closure.block(j).num_independent());
      CHECK(off.lpNorm<Eigen::Infinity>() == 0.0);
    }
  }
}

TEST_CASE("warm-started resolution along a smooth trajectory stays cheap") {
  const auto& m = model();
  VecX lo = m.independent_lower(), hi = m.independent_upper();
  ClosureContext ctx;
  for (int k = 0; k <= 300; ++k) {
    double s = 0.5 * (1.0 - std::cos(2.0 * M_PI * k / 300.0));
    VecX y(m.m());
    for (int j = 0; j < m.m(); ++j) {
      double mid = 0.5 * (lo[j] + hi[j]), amp = 0.45 * (hi[j] - lo[j]);
      y[j] = mid + amp * std::sin(2.0 * M_PI * (s + 0.07 * j));
    }
    m.closure.gamma(y, &ctx);
    if (k == 0) continue;
    for (int b = 0; b < m.closure.num_blocks(); ++b) CHECK(ctx.last_iterations[b] <= 5);
  }
}

TEST_CASE("pure knee flexion moves only the knee actuator") {
  const auto& m = model();
  VecX y = VecX::Zero(m.m());
  VecX ydot = VecX::Zero(m.m());
  ydot[9] = 0.2;  // left knee slide: 6 spine + 3 hip
  VecX vel = actuator_velocities(m.closure, m.actuation, y, ydot);
  for (int i = 0; i < m.actuation.p(); ++i) {
    if (m.actuation.names[i] == "s3_knee_left_knee_slide") {
      CHECK(vel[i] == doctest::Approx(0.2).epsilon(1e-12));
    } else {
      CHECK(std::abs(vel[i]) <= 1e-10);
    }
  }
}

TEST_CASE("knee flexion direction: positive slide flexes the shank backward") {
  const auto& m = model();
  VecX y = VecX::Zero(m.m());
  y[9] = 0.09;
  VecX q = m.closure.gamma(y);
  double theta_flex = q[m.closure.q_offset(2) + 2];
  y[9] = -0.064;
  double theta_ext = m.closure.gamma(y)[m.closure.q_offset(2) + 2];
  CHECK(theta_flex > 0.5);
  CHECK(theta_ext < -0.3);
}

TEST_CASE("actuation map power invariance over random states") {
  const auto& m = model();
  std::mt19937 gen(99);
  ClosureContext ctx;
  for (int s = 0; s < 30; ++s) {
    VecX y = sample_rom(gen);
    VecX ydot(m.m()), tau_y(m.m());
    for (int k = 0; k < m.m(); ++k) {
      ydot[k] = lt::uniform(-1, 1);
      tau_y[k] = lt::uniform(-30, 30);
    }
    VecX tau_act = actuator_forces(m.closure, m.actuation, y, tau_y, &ctx);
    VecX vel_act = actuator_velocities(m.closure, m.actuation, y, ydot, &ctx);
    double p_y = tau_y.dot(ydot);
    double p_act = tau_act.dot(vel_act);
    CHECK(p_act == doctest::Approx(p_y).epsilon(1e-8));
  }
}

TEST_CASE("independent joint table matches the published ranges") {
  const auto& m = model();
  REQUIRE(m.independent.size() == 20);
  CHECK(m.independent[0].lower == doctest::Approx(-0.143));
  CHECK(m.independent[0].upper == doctest::Approx(0.122));
  CHECK(m.independent[5].lower == doctest::Approx(-1.518));
  CHECK(m.independent[5].upper == doctest::Approx(1.518));
  CHECK(m.independent[9].lower == doctest::Approx(-0.064));  // left knee
  CHECK(m.independent[9].upper == doctest::Approx(0.09));
  CHECK(m.independent[7].lower == doctest::Approx(-0.262));  // left hip pitch
  CHECK(m.independent[7].upper == doctest::Approx(0.611));

  // Actuator ratings.
  const auto& a = m.actuation;
  CHECK(a.effort_limit[0] == doctest::Approx(570.0));   // spine leg
  CHECK(a.velocity_limit[0] == doctest::Approx(0.34));
  CHECK(a.effort_limit[6] == doctest::Approx(176.0));   // hip motor
  CHECK(a.velocity_limit[6] == doctest::Approx(2.39));
  CHECK(a.effort_limit[9] == doctest::Approx(662.0));   // knee
  CHECK(a.effort_limit[10] == doctest::Approx(28.0));   // ankle motor
  CHECK(a.velocity_limit[10] == doctest::Approx(7.17));
}

TEST_CASE("abstraction mass matrix is positive definite across the ROM") {
  const auto& m = model();
  std::mt19937 gen(4242);
  for (int s = 0; s < 20; ++s) {
    VecX q = m.abstraction_q0;
    q.tail(m.m()) = sample_rom(gen);
    MatX M = crba(m.abstraction, q);
    CHECK((M - M.transpose()).lpNorm<Eigen::Infinity>() < 1e-10);
    Eigen::SelfAdjointEigenSolver<MatX> es(M);
    CHECK(es.eigenvalues().minCoeff() > 0.0);
  }
}
