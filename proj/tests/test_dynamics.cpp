#include <doctest.h>

#include "loom/dynamics.hpp"
#include "loom/kinematics.hpp"
#include "test_helpers.hpp"

using namespace loom;
namespace lt = loom::testing;

namespace {

/// Pendulum: revolute about +y at the origin, point mass m at distance l
/// below the joint. q = 0 is the stable (hanging) equilibrium.
RigidBodyTree pendulum(double m = 1.0, double l = 1.0) {
  RigidBodyTree tree;
  tree.add_body("rod", -1, JointModel::revolute(Vec3::UnitY()),
                SpatialInertia::point_mass(m, Vec3(0, 0, -l)));
  tree.add_frame("tip", 0, Placement::from_translation(Vec3(0, 0, -l)));
  return tree;
}

RigidBodyTree mixed_tree(unsigned seed) {
  RigidBodyTree tree;
  std::mt19937 gen(seed);
  std::uniform_int_distribution<int> kind(0, 3);
  int parent = tree.add_body("root", -1, JointModel::floating(),
                             SpatialInertia::solid_box(3.0, Vec3(0.3, 0.2, 0.1)));
  for (int i = 0; i < 7; ++i) {
    Placement X(exp3(lt::random_vec3(0.4)), lt::random_vec3(0.3));
    JointModel j;
    switch (kind(gen)) {
      case 0: j = JointModel::revolute(Vec3::UnitY(), X); break;
      case 1: j = JointModel::prismatic(Vec3::UnitZ(), X); break;
      case 2: j = JointModel::spherical(X); break;
      default: j = JointModel::universal(Vec3::UnitZ(), Vec3::UnitX(), X); break;
    }
    parent = tree.add_body("link" + std::to_string(i), parent, j,
                           SpatialInertia(lt::uniform(0.3, 2.5), lt::random_vec3(0.15), lt::random_spd3(0.3)));
  }
  return tree;
}

VecX random_config(const RigidBodyTree& tree) {
  VecX dq(tree.nv());
  for (int k = 0; k < dq.size(); ++k) dq[k] = lt::uniform(-0.7, 0.7);
  return integrate_configuration(tree, tree.neutral_configuration(), dq);
}

VecX random_vel(const RigidBodyTree& tree, double s = 1.0) {
  VecX v(tree.nv());
  for (int k = 0; k < v.size(); ++k) v[k] = lt::uniform(-s, s);
  return v;
}

double pendulum_energy(const RigidBodyTree& tree, const VecX& q, const VecX& v) {
  double kinetic = 0.5 * v.dot(crba(tree, q) * v);
  Vec3 com = com_position(tree, q);
  double potential = -tree.total_mass() * tree.gravity().dot(com);
  return kinetic + potential;
}

}  // namespace

TEST_CASE("pendulum holding torque is m g l sin(q)") {
  auto tree = pendulum();
  VecX q(1), z(1);
  q << M_PI / 2;
  z << 0.0;
  VecX tau = rnea(tree, q, z, z);
  CHECK(tau[0] == doctest::Approx(9.81).epsilon(1e-12));

  q << 0.3;
  tau = rnea(tree, q, z, z);
  CHECK(tau[0] == doctest::Approx(9.81 * std::sin(0.3)).epsilon(1e-12));
}

TEST_CASE("zero gravity, zero motion gives zero generalized force") {
  auto tree = mixed_tree(11);
  tree.set_gravity(Vec3::Zero());
  VecX q = random_config(tree);
  VecX z = VecX::Zero(tree.nv());
  CHECK(rnea(tree, q, z, z).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("rnea equals M qdd + b on random inputs") {
  auto tree = mixed_tree(17);
  for (int trial = 0; trial < 25; ++trial) {
    VecX q = random_config(tree);
    VecX v = random_vel(tree);
    VecX a = random_vel(tree, 2.0);
    VecX lhs = rnea(tree, q, v, a);
    VecX rhs = crba(tree, q) * a + bias_forces(tree, q, v);
    CHECK((lhs - rhs).lpNorm<Eigen::Infinity>() < 1e-9 * (1.0 + rhs.lpNorm<Eigen::Infinity>()));
  }
}

TEST_CASE("crba columns equal unit-acceleration rnea without gravity") {
  auto tree = mixed_tree(23);
  VecX q = random_config(tree);
  RigidBodyTree nog = tree;
  nog.set_gravity(Vec3::Zero());
  MatX M = crba(tree, q);
  VecX z = VecX::Zero(tree.nv());
  for (int k = 0; k < tree.nv(); ++k) {
    VecX e = VecX::Zero(tree.nv());
    e[k] = 1.0;
    VecX col = rnea(nog, q, z, e);
    CHECK((M.col(k) - col).lpNorm<Eigen::Infinity>() < 1e-10 * (1.0 + col.lpNorm<Eigen::Infinity>()));
  }
}

TEST_CASE("single prismatic joint has M = [m]") {
  RigidBodyTree tree;
  tree.add_body("s", -1, JointModel::prismatic(Vec3::UnitZ()), SpatialInertia::point_mass(2.5));
  MatX M = crba(tree, VecX::Zero(1));
  CHECK(M(0, 0) == doctest::Approx(2.5).epsilon(1e-14));
}

TEST_CASE("pendulum has M = [m l^2]") {
  auto tree = pendulum(1.0, 1.0);
  VecX q(1);
  q << 0.7;
  CHECK(crba(tree, q)(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("mass matrix is symmetric positive definite across random states") {
  auto tree = mixed_tree(29);
  for (int trial = 0; trial < 100; ++trial) {
    VecX q = random_config(tree);
    MatX M = crba(tree, q);
    CHECK((M - M.transpose()).lpNorm<Eigen::Infinity>() < 1e-10);
    Eigen::SelfAdjointEigenSolver<MatX> es(M);
    CHECK(es.eigenvalues().minCoeff() > 0.0);
  }
}

TEST_CASE("bias forces are rnea with zero acceleration") {
  auto tree = mixed_tree(31);
  VecX q = random_config(tree);
  VecX v = random_vel(tree);
  CHECK((bias_forces(tree, q, v) - rnea(tree, q, v, VecX::Zero(tree.nv()))).norm() == doctest::Approx(0.0));

  auto pend = pendulum();
  VecX qq(1), z(1);
  qq << M_PI / 2;
  z << 0.0;
  CHECK(bias_forces(pend, qq, z)[0] == doctest::Approx(9.81).epsilon(1e-12));
}

TEST_CASE("external force on a point mass cancels its weight") {
  RigidBodyTree tree;
  tree.add_body("s", -1, JointModel::prismatic(Vec3::UnitZ()), SpatialInertia::point_mass(2.0));
  ExternalForces fext(1);
  fext[0] = Force(Vec3::Zero(), Vec3(0, 0, 2.0 * 9.81));
  VecX z = VecX::Zero(1);
  VecX tau = rnea(tree, z, z, z, fext);
  CHECK(tau[0] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("external forces enter through the transposed frame Jacobian") {
  auto tree = mixed_tree(37);
  VecX q = random_config(tree);
  VecX v = random_vel(tree);
  VecX a = random_vel(tree);
  // Apply a wrench at body 5's origin, in world axes.
  Force w = lt::random_force(3.0);
  ExternalForces fext(tree.num_bodies());
  fext[5] = w;
  VecX with = rnea(tree, q, v, a, fext);
  VecX without = rnea(tree, q, v, a);
  MatX J = frame_jacobian(tree, q, tree.frame_index(tree.body(5).name));
  Vec6 wv;
  wv << w.torque, w.force;  // match J's angular-first rows
  CHECK((without - J.transpose() * wv - with).lpNorm<Eigen::Infinity>() < 1e-9);
}

TEST_CASE("free pendulum conserves energy under RK4") {
  auto tree = pendulum();
  VecX q(1), v(1);
  q << 2.0;  // large swing
  v << 0.0;
  const double dt = 1e-4;
  const int steps = 100000;  // 10 s
  double e0 = pendulum_energy(tree, q, v);
  auto accel = [&](const VecX& qq, const VecX& vv) {
    return VecX((-bias_forces(tree, qq, vv).array() / crba(tree, qq)(0, 0)).matrix());
  };
  for (int i = 0; i < steps; ++i) {
    VecX k1v = accel(q, v), k1q = v;
    VecX k2v = accel(q + 0.5 * dt * k1q, v + 0.5 * dt * k1v), k2q = v + 0.5 * dt * k1v;
    VecX k3v = accel(q + 0.5 * dt * k2q, v + 0.5 * dt * k2v), k3q = v + 0.5 * dt * k2v;
    VecX k4v = accel(q + dt * k3q, v + dt * k3v), k4q = v + dt * k3v;
    q += dt / 6.0 * (k1q + 2 * k2q + 2 * k3q + k4q);
    v += dt / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v);
  }
  double e1 = pendulum_energy(tree, q, v);
  CHECK(std::abs(e1 - e0) / std::abs(e0) < 1e-5);
}
