#ifndef LOOM_TEST_HELPERS_HPP
#define LOOM_TEST_HELPERS_HPP

#include <random>

#include "loom/spatial.hpp"

namespace loom::testing {

inline std::mt19937& rng(unsigned seed = 0) {
  static std::mt19937 gen(seed ? seed : 20240517u);
  return gen;
}

inline double uniform(double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  return d(rng());
}

inline Vec3 random_vec3(double scale = 1.0) {
  return Vec3(uniform(-scale, scale), uniform(-scale, scale), uniform(-scale, scale));
}

inline Quat random_quat() {
  std::normal_distribution<double> n(0.0, 1.0);
  Quat q(n(rng()), n(rng()), n(rng()), n(rng()));
  q.normalize();
  return q;
}

inline Placement random_placement(double trans_scale = 1.0) {
  return Placement::from_quaternion(random_quat(), random_vec3(trans_scale));
}

inline Motion random_motion(double scale = 1.0) {
  return Motion(random_vec3(scale), random_vec3(scale));
}

inline Force random_force(double scale = 1.0) {
  return Force(random_vec3(scale), random_vec3(scale));
}

inline Mat3 random_spd3(double scale = 1.0) {
  Mat3 A;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) A(r, c) = uniform(-scale, scale);
  return Mat3(A * A.transpose() + 0.1 * scale * Mat3::Identity());
}

}  // namespace loom::testing

#endif
