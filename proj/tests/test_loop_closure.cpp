#include <doctest.h>

#include "loom/loop_closure.hpp"
#include "test_helpers.hpp"

using namespace loom;
namespace lt = loom::testing;

namespace {

// Planar four-bar in the z = 0 plane: ground pivots at the origin and at
// (g, 0); crank length r (independent angle), coupler l, rocker h.
struct FourBarGeometry {
  double g = 2.0, r = 0.5, l = 2.0, h = 1.0;
};

Submechanism make_four_bar(const FourBarGeometry& geo, ResolverKind kind, const VecX& reference) {
  RigidBodyTree tree;
  int crank = tree.add_body("crank", -1, JointModel::revolute(Vec3::UnitZ()),
                            SpatialInertia::point_mass(0.3, Vec3(geo.r / 2, 0, 0)));
  int coupler = tree.add_body(
      "coupler", crank,
      JointModel::revolute(Vec3::UnitZ(), Placement::from_translation(Vec3(geo.r, 0, 0))),
      SpatialInertia::point_mass(0.4, Vec3(geo.l / 2, 0, 0)));
  int rocker = tree.add_body(
      "rocker", -1, JointModel::revolute(Vec3::UnitZ(), Placement::from_translation(Vec3(geo.g, 0, 0))),
      SpatialInertia::point_mass(0.2, Vec3(geo.h / 2, 0, 0)));
  FrameId fa = tree.add_frame("coupler_tip", coupler, Placement::from_translation(Vec3(geo.l, 0, 0)));
  FrameId fb = tree.add_frame("rocker_tip", rocker, Placement::from_translation(Vec3(geo.h, 0, 0)));
  return Submechanism("four_bar", kind, std::move(tree), {0}, {CutJoint{"loop", fa, fb}}, {},
                      reference);
}

/// Closed-form four-bar position solution by circle intersection
/// (law-of-cosines form); elbow = +1 picks the intersection above
/// the coupler-to-rocker baseline.
struct FourBarSolution {
  double coupler;  // joint angle relative to the crank
  double rocker;   // joint angle at the ground pivot
};

FourBarSolution four_bar_oracle(const FourBarGeometry& geo, double theta, int elbow) {
  Eigen::Vector2d C(geo.r * std::cos(theta), geo.r * std::sin(theta));
  Eigen::Vector2d B(geo.g, 0.0);
  Eigen::Vector2d CB = B - C;
  double d = CB.norm();
  REQUIRE(d > std::abs(geo.l - geo.h));
  REQUIRE(d < geo.l + geo.h);
  double a = (geo.l * geo.l - geo.h * geo.h + d * d) / (2 * d);
  double off = std::sqrt(geo.l * geo.l - a * a);
  Eigen::Vector2d mid = C + a * CB / d;
  Eigen::Vector2d perp(-CB.y() / d, CB.x() / d);
  Eigen::Vector2d D = mid + elbow * off * perp;
  FourBarSolution sol;
  sol.coupler = std::atan2(D.y() - C.y(), D.x() - C.x()) - theta;
  sol.rocker = std::atan2(D.y(), D.x() - geo.g);
  return sol;
}

VecX four_bar_reference(const FourBarGeometry& geo, double theta0, int elbow) {
  auto sol = four_bar_oracle(geo, theta0, elbow);
  VecX q(3);
  q << theta0, sol.coupler, sol.rocker;
  return q;
}

// Planar slider-crank: hinge at the origin with crank pin radius rc; slider
// rail along x at (x0, y_off); rod of length L connects slider pin to the
// crank pin. q = (d slider, phi rod, theta hinge).
struct SliderCrankGeometry {
  double rc = 0.12, x0 = 0.25, y_off = 0.05, L = 0.22;
};

Submechanism make_slider_crank(const SliderCrankGeometry& geo, ResolverKind kind,
                               const VecX& reference, int branch = 1) {
  RigidBodyTree tree;
  int slider = tree.add_body(
      "slider", -1,
      JointModel::prismatic(Vec3::UnitX(), Placement::from_translation(Vec3(geo.x0, geo.y_off, 0))),
      SpatialInertia::point_mass(0.2));
  int rod = tree.add_body("rod", slider, JointModel::revolute(Vec3::UnitZ()),
                          SpatialInertia::point_mass(0.1, Vec3(geo.L / 2, 0, 0)));
  int hinge = tree.add_body("hinge", -1, JointModel::revolute(Vec3::UnitZ()),
                            SpatialInertia::point_mass(0.5, Vec3(geo.rc / 2, 0, 0)));
  FrameId fa = tree.add_frame("rod_tip", rod, Placement::from_translation(Vec3(geo.L, 0, 0)));
  FrameId fb = tree.add_frame("crank_pin", hinge, Placement::from_translation(Vec3(geo.rc, 0, 0)));
  Submechanism block("slider_crank", kind, std::move(tree), {0}, {CutJoint{"pin", fa, fb}}, {},
                     reference);
  if (kind == ResolverKind::analytical) {
    block.set_analytic_position([geo, branch](const VecX& y, VecX& q) {
      double d = y[0];
      double sx = geo.x0 + d, sy = geo.y_off;
      double s = std::hypot(sx, sy);
      double sigma = std::atan2(sy, sx);
      double c = (s * s + geo.rc * geo.rc - geo.L * geo.L) / (2 * s * geo.rc);
      if (c < -1.0 || c > 1.0) {
        throw ResolutionError("slider_crank", std::abs(c) - 1.0, 0);
      }
      double theta = sigma + branch * std::acos(c);
      double px = geo.rc * std::cos(theta), py = geo.rc * std::sin(theta);
      q[2] = theta;
      q[1] = std::atan2(py - sy, px - sx);
      q[0] = d;
    });
  }
  return block;
}

/// Inverse closed form: slider displacement that realizes a hinge angle.
double slider_from_theta(const SliderCrankGeometry& geo, double theta) {
  double px = geo.rc * std::cos(theta), py = geo.rc * std::sin(theta);
  double dy = geo.y_off - py;
  return px + std::sqrt(geo.L * geo.L - dy * dy) - geo.x0;
}

double rod_angle_from_theta(const SliderCrankGeometry& geo, double theta) {
  double px = geo.rc * std::cos(theta), py = geo.rc * std::sin(theta);
  double sx = geo.x0 + slider_from_theta(geo, theta);
  return std::atan2(py - geo.y_off, px - sx);
}

Submechanism make_identity_block(int dims) {
  RigidBodyTree tree;
  int parent = -1;
  for (int i = 0; i < dims; ++i) {
    parent = tree.add_body("j" + std::to_string(i), parent,
                           JointModel::revolute(Vec3::UnitZ(), Placement::from_translation(Vec3(0.1, 0, 0))),
                           SpatialInertia::point_mass(0.1));
  }
  std::vector<int> indep(dims);
  for (int i = 0; i < dims; ++i) indep[i] = i;
  return Submechanism("identity", ResolverKind::analytical, std::move(tree), indep, {});
}

}  // namespace

TEST_CASE("four-bar matches the closed-form solution") {
  FourBarGeometry geo;
  auto ref = four_bar_reference(geo, 0.3, +1);
  ExplicitClosureMap map({make_four_bar(geo, ResolverKind::numerical, ref)});

  VecX y(1);
  y << 0.3;
  VecX q = map.gamma(y);
  auto sol = four_bar_oracle(geo, 0.3, +1);
  CHECK(q[0] == doctest::Approx(0.3).epsilon(1e-14));
  CHECK(q[1] == doctest::Approx(sol.coupler).epsilon(1e-8));
  CHECK(q[2] == doctest::Approx(sol.rocker).epsilon(1e-8));

  // Residual at the resolved configuration.
  CHECK(map.constraint_residual(q).lpNorm<Eigen::Infinity>() < 1e-8);
}

TEST_CASE("four-bar cold start converges in at most 10 iterations") {
  FourBarGeometry geo;
  auto ref = four_bar_reference(geo, 0.3, +1);
  auto block = make_four_bar(geo, ResolverKind::numerical, ref);
  for (double theta : {0.1, 0.25, 0.4, 0.55}) {
    VecX y(1), q;
    y << theta;
    int iters = block.resolve(y, q);
    CHECK(iters <= 10);
    auto sol = four_bar_oracle(geo, theta, +1);
    CHECK(q[2] == doctest::Approx(sol.rocker).epsilon(1e-8));
  }
}

TEST_CASE("warm start at the previous solution takes no iterations") {
  FourBarGeometry geo;
  auto ref = four_bar_reference(geo, 0.3, +1);
  ExplicitClosureMap map({make_four_bar(geo, ResolverKind::numerical, ref)});
  ClosureContext ctx;
  VecX y(1);
  y << 0.42;
  map.gamma(y, &ctx);
  map.gamma(y, &ctx);
  CHECK(ctx.last_iterations[0] == 0);
}

TEST_CASE("warm-started resolution along a smooth trajectory stays under 5 iterations") {
  FourBarGeometry geo;
  auto ref = four_bar_reference(geo, 0.3, +1);
  ExplicitClosureMap map({make_four_bar(geo, ResolverKind::numerical, ref)});
  ClosureContext ctx;
  VecX y(1);
  for (int k = 0; k <= 200; ++k) {
    y << 0.3 + 0.25 * std::sin(2 * M_PI * k / 200.0);
    map.gamma(y, &ctx);
    if (k > 0) CHECK(ctx.last_iterations[0] <= 5);
  }
}

TEST_CASE("impossible geometry raises a resolution error, not a wrong answer") {
  FourBarGeometry geo;
  geo.l = 0.6;  // coupler too short to close anywhere near the reference
  geo.h = 0.3;
  RigidBodyTree tree;
  auto block = make_four_bar(geo, ResolverKind::numerical, VecX::Zero(3));
  VecX y(1), q;
  y << 0.3;
  CHECK_THROWS_AS(block.resolve(y, q), ResolutionError);
}

TEST_CASE("degenerate crank makes the constraint Jacobian singular") {
  FourBarGeometry geo;
  ExplicitClosureMap good({make_four_bar(geo, ResolverKind::numerical,
                                         four_bar_reference(geo, 0.3, +1))});
  // Zero-length rocker: its joint column vanishes identically.
  RigidBodyTree tree;
  int crank = tree.add_body("crank", -1, JointModel::revolute(Vec3::UnitZ()),
                            SpatialInertia::point_mass(0.3));
  int rocker = tree.add_body("rocker", -1,
                             JointModel::revolute(Vec3::UnitZ(), Placement::from_translation(Vec3(0.5, 0, 0))),
                             SpatialInertia::point_mass(0.2));
  FrameId fa = tree.add_frame("a", crank, Placement::from_translation(Vec3(0.5, 0, 0)));
  FrameId fb = tree.add_frame("b", rocker);  // at the rocker joint itself
  Submechanism degenerate("degenerate", ResolverKind::numerical, std::move(tree), {0},
                          {CutJoint{"loop", fa, fb}});
  VecX y(1), q;
  y << 0.2;
  CHECK_THROWS_AS(degenerate.resolve(y, q), SingularityError);
}

TEST_CASE("implicit constraint identities hold to finite-difference accuracy") {
  FourBarGeometry geo;
  auto ref = four_bar_reference(geo, 0.3, +1);
  auto block = make_four_bar(geo, ResolverKind::numerical, ref);
  auto implicit = block.implicit();
  const double h = 1e-7;
  for (int trial = 0; trial < 20; ++trial) {
    VecX y(1), q;
    y << lt::uniform(0.1, 0.6);
    block.resolve(y, q);

    // K against the finite-difference Jacobian of phi.
    MatX K = implicit.jacobian(q);
    for (int j = 0; j < q.size(); ++j) {
      VecX qp = q, qm = q;
      qp[j] += h;
      qm[j] -= h;
      VecX col = (implicit.residual(qp) - implicit.residual(qm)) / (2 * h);
      CHECK((K.col(j) - col).lpNorm<Eigen::Infinity>() < 1e-6);
    }

    // k = -Kdot qdot against the finite-difference time derivative.
    VecX v(3);
    v << lt::uniform(-1, 1), lt::uniform(-1, 1), lt::uniform(-1, 1);
    VecX k = implicit.drift(q, v);
    const double ht = 1e-6;
    VecX Kv_p = implicit.jacobian(q + ht * v) * v;
    VecX Kv_m = implicit.jacobian(q - ht * v) * v;
    VecX kdot_fd = -(Kv_p - Kv_m) / (2 * ht);
    CHECK((k - kdot_fd).lpNorm<Eigen::Infinity>() < 1e-6);
  }
}

TEST_CASE("G columns match finite differences of gamma") {
  FourBarGeometry geo;
  auto ref = four_bar_reference(geo, 0.3, +1);
  ExplicitClosureMap map({make_four_bar(geo, ResolverKind::numerical, ref)});
  ClosureContext ctx;
  VecX y(1);
  y << 0.3;
  MatX G = map.G_matrix(y, &ctx);
  const double h = 1e-6;
  VecX qp = map.gamma(VecX::Constant(1, 0.3 + h), &ctx);
  VecX qm = map.gamma(VecX::Constant(1, 0.3 - h), &ctx);
  VecX col = (qp - qm) / (2 * h);
  CHECK((G.col(0) - col).lpNorm<Eigen::Infinity>() < 1e-6);
}

TEST_CASE("explicit/implicit consistency: phi(gamma(y)) = 0, K G = 0, K g = k") {
  FourBarGeometry geo;
  auto ref = four_bar_reference(geo, 0.3, +1);
  ExplicitClosureMap map({make_four_bar(geo, ResolverKind::numerical, ref)});
  const auto& block = map.block(0);
  ClosureContext ctx;
  for (int trial = 0; trial < 200; ++trial) {
    VecX y(1), ydot(1);
    y << lt::uniform(0.1, 0.6);
    ydot << lt::uniform(-2, 2);
    VecX q = map.gamma(y, &ctx);
    CHECK(block.constraint_residual(q).lpNorm<Eigen::Infinity>() <= 1e-8);
    MatX K = block.constraint_jacobian(q);
    MatX G = map.G_matrix(y, &ctx);
    CHECK((K * G).lpNorm<Eigen::Infinity>() <= 1e-6);
    VecX g = map.g_drift(y, ydot, &ctx);
    VecX k = block.constraint_drift(q, G * ydot);
    CHECK((K * g - k).lpNorm<Eigen::Infinity>() <= 1e-6);
  }
}

TEST_CASE("g vanishes at zero independent velocity") {
  FourBarGeometry geo;
  ExplicitClosureMap map({make_four_bar(geo, ResolverKind::numerical,
                                        four_bar_reference(geo, 0.3, +1))});
  VecX y(1), ydot = VecX::Zero(1);
  y << 0.35;
  CHECK(map.g_drift(y, ydot).norm() == doctest::Approx(0.0));
}

TEST_CASE("g matches the finite-difference Gdot ydot") {
  FourBarGeometry geo;
  ExplicitClosureMap map({make_four_bar(geo, ResolverKind::numerical,
                                        four_bar_reference(geo, 0.3, +1))});
  ClosureContext ctx;
  for (int trial = 0; trial < 10; ++trial) {
    VecX y(1), ydot(1);
    y << lt::uniform(0.15, 0.5);
    ydot << lt::uniform(-2, 2);
    VecX g = map.g_drift(y, ydot, &ctx);
    const double h = 1e-5;
    MatX Gp = map.G_matrix(y + h * ydot, &ctx);
    MatX Gm = map.G_matrix(y - h * ydot, &ctx);
    VecX fd = ((Gp - Gm) / (2 * h)) * ydot;
    CHECK((g - fd).lpNorm<Eigen::Infinity>() < 1e-5);
  }
}

TEST_CASE("analytical slider-crank matches the triangle closed form and round-trips") {
  SliderCrankGeometry geo;
  VecX ref(3);
  ref.setZero();
  auto block = make_slider_crank(geo, ResolverKind::analytical, ref);
  ExplicitClosureMap map({std::move(block)});
  for (double d : {-0.05, -0.02, 0.0, 0.03, 0.07}) {
    VecX y(1);
    y << d;
    VecX q = map.gamma(y);
    CHECK(map.constraint_residual(q).lpNorm<Eigen::Infinity>() < 1e-10);
    // Round-trip through the inverse closed form.
    CHECK(slider_from_theta(geo, q[2]) == doctest::Approx(d).epsilon(1e-10));
  }
}

TEST_CASE("numerical resolver agrees with the analytical slider-crank") {
  SliderCrankGeometry geo;
  VecX y0(1);
  y0 << 0.0;
  auto analytic = make_slider_crank(geo, ResolverKind::analytical, VecX::Zero(3));
  VecX q_ref;
  analytic.resolve(y0, q_ref);
  auto numeric = make_slider_crank(geo, ResolverKind::numerical, q_ref);
  for (double d : {-0.04, 0.0, 0.05}) {
    VecX y(1), qa, qn;
    y << d;
    analytic.resolve(y, qa);
    numeric.resolve(y, qn);
    CHECK((qa - qn).lpNorm<Eigen::Infinity>() < 1e-8);
  }
}

TEST_CASE("identity block produces an identity G block") {
  ExplicitClosureMap map({make_identity_block(3)});
  VecX y(3);
  y << 0.2, -0.4, 0.9;
  CHECK((map.gamma(y) - y).norm() == doctest::Approx(0.0));
  CHECK((map.G_matrix(y) - MatX::Identity(3, 3)).norm() == doctest::Approx(0.0));
}

TEST_CASE("gamma pins independent coordinates exactly") {
  FourBarGeometry geo;
  ExplicitClosureMap map({make_identity_block(2),
                          make_four_bar(geo, ResolverKind::numerical,
                                        four_bar_reference(geo, 0.3, +1))});
  CHECK(map.n() == 5);
  CHECK(map.m() == 3);
  CHECK(map.n_c() == 3);
  VecX y(3);
  y << 0.1, -0.2, 0.33;
  VecX q = map.gamma(y);
  CHECK(q[0] == 0.1);
  CHECK(q[1] == -0.2);
  CHECK(q[2] == 0.33);
  CHECK((map.extract_independent(q) - y).norm() == doctest::Approx(0.0));
}

TEST_CASE("block-diagonal G has no cross-block coupling") {
  FourBarGeometry geo;
  ExplicitClosureMap map({make_identity_block(2),
                          make_four_bar(geo, ResolverKind::numerical,
                                        four_bar_reference(geo, 0.3, +1))});
  VecX y(3);
  y << 0.1, -0.2, 0.33;
  MatX G = map.G_matrix(y);
  CHECK(G.block(0, 2, 2, 1).norm() == doctest::Approx(0.0));
  CHECK(G.block(2, 0, 3, 2).norm() == doctest::Approx(0.0));
}

TEST_CASE("coupled drive-train coordinates follow their source rows") {
  SliderCrankGeometry geo;
  // Append a screw follower on the slider: q[3] = 40 * d.
  RigidBodyTree tree;
  int slider = tree.add_body(
      "slider", -1,
      JointModel::prismatic(Vec3::UnitX(), Placement::from_translation(Vec3(geo.x0, geo.y_off, 0))),
      SpatialInertia::point_mass(0.2));
  int rod = tree.add_body("rod", slider, JointModel::revolute(Vec3::UnitZ()),
                          SpatialInertia::point_mass(0.1, Vec3(geo.L / 2, 0, 0)));
  int hinge = tree.add_body("hinge", -1, JointModel::revolute(Vec3::UnitZ()),
                            SpatialInertia::point_mass(0.5, Vec3(geo.rc / 2, 0, 0)));
  tree.add_body("screw", slider, JointModel::revolute(Vec3::UnitX()), SpatialInertia::point_mass(0.01));
  FrameId fa = tree.add_frame("rod_tip", rod, Placement::from_translation(Vec3(geo.L, 0, 0)));
  FrameId fb = tree.add_frame("crank_pin", hinge, Placement::from_translation(Vec3(geo.rc, 0, 0)));
  VecX ref(4);
  ref << 0.0, rod_angle_from_theta(geo, 0.9), 0.9, 0.0;
  Submechanism block("knee_like", ResolverKind::numerical, std::move(tree), {0},
                     {CutJoint{"pin", fa, fb}}, {CoupledCoordinate{3, 0, 40.0, 0.0}}, ref);
  ExplicitClosureMap map({std::move(block)});
  VecX y(1);
  y << 0.02;
  VecX q = map.gamma(y);
  CHECK(q[3] == doctest::Approx(40.0 * 0.02).epsilon(1e-12));
  MatX G = map.G_matrix(y);
  CHECK(G(3, 0) == doctest::Approx(40.0 * G(0, 0)).epsilon(1e-12));
}

TEST_CASE("actuator maps: positions, chain rule forces, and power invariance") {
  SliderCrankGeometry geo;
  // Independent coordinate: the hinge angle. Actuated coordinate: the slider.
  RigidBodyTree tree;
  int slider = tree.add_body(
      "slider", -1,
      JointModel::prismatic(Vec3::UnitX(), Placement::from_translation(Vec3(geo.x0, geo.y_off, 0))),
      SpatialInertia::point_mass(0.2));
  int rod = tree.add_body("rod", slider, JointModel::revolute(Vec3::UnitZ()),
                          SpatialInertia::point_mass(0.1, Vec3(geo.L / 2, 0, 0)));
  int hinge = tree.add_body("hinge", -1, JointModel::revolute(Vec3::UnitZ()),
                            SpatialInertia::point_mass(0.5, Vec3(geo.rc / 2, 0, 0)));
  FrameId fa = tree.add_frame("rod_tip", rod, Placement::from_translation(Vec3(geo.L, 0, 0)));
  FrameId fb = tree.add_frame("crank_pin", hinge, Placement::from_translation(Vec3(geo.rc, 0, 0)));
  VecX ref(3);
  ref << slider_from_theta(geo, 0.9), rod_angle_from_theta(geo, 0.9), 0.9;
  Submechanism block("crank_drive", ResolverKind::numerical, std::move(tree), {2},
                     {CutJoint{"pin", fa, fb}}, {}, ref);
  ExplicitClosureMap map({std::move(block)});

  ActuationMap amap;
  amap.names = {"linear_drive"};
  amap.coords = {0};
  amap.rom_lower = VecX::Constant(1, -1.0);
  amap.rom_upper = VecX::Constant(1, 1.0);
  amap.velocity_limit = VecX::Constant(1, 10.0);
  amap.effort_limit = VecX::Constant(1, 1e4);

  VecX y(1), tau_y(1), ydot(1);
  y << 0.9;
  tau_y << 7.5;
  ydot << 0.6;

  VecX pos = actuator_positions(map, amap, y);
  CHECK(pos[0] == doctest::Approx(slider_from_theta(geo, 0.9)).epsilon(1e-8));

  // Scalar chain rule oracle: F * dd/dtheta = tau.
  const double h = 1e-6;
  double dd_dtheta = (slider_from_theta(geo, 0.9 + h) - slider_from_theta(geo, 0.9 - h)) / (2 * h);
  VecX force = actuator_forces(map, amap, y, tau_y);
  CHECK(force[0] == doctest::Approx(7.5 / dd_dtheta).epsilon(1e-6));

  // Virtual work: tau_y^T ydot = tau_act^T (S G ydot).
  VecX act_vel = actuator_velocities(map, amap, y, ydot);
  CHECK(force.dot(act_vel) == doctest::Approx(tau_y.dot(ydot)).epsilon(1e-8));
}

TEST_CASE("identity mechanism maps actuator position to the joint value") {
  ExplicitClosureMap map({make_identity_block(2)});
  ActuationMap amap;
  amap.names = {"a0", "a1"};
  amap.coords = {0, 1};
  amap.rom_lower = VecX::Constant(2, -1.0);
  amap.rom_upper = VecX::Constant(2, 1.0);
  amap.velocity_limit = VecX::Constant(2, 1.0);
  amap.effort_limit = VecX::Constant(2, 1.0);
  VecX y(2);
  y << 0.3, -0.7;
  CHECK((actuator_positions(map, amap, y) - y).norm() == doctest::Approx(0.0));
}
