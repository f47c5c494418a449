#ifndef LOOM_SPATIAL_HPP
#define LOOM_SPATIAL_HPP

#include <Eigen/Dense>

namespace loom {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;
using Quat = Eigen::Quaterniond;

/// 6-D motion vector (twist or its derivative), angular part first.
struct Motion {
  Vec3 angular = Vec3::Zero();
  Vec3 linear = Vec3::Zero();

  Motion() = default;
  Motion(const Vec3& ang, const Vec3& lin) : angular(ang), linear(lin) {}

  static Motion Zero() { return {}; }

  Vec6 vector() const {
    Vec6 out;
    out << angular, linear;
    return out;
  }
  static Motion from_vector(const Vec6& v) { return {v.head<3>(), v.tail<3>()}; }

  Motion operator+(const Motion& o) const { return {angular + o.angular, linear + o.linear}; }
  Motion operator-(const Motion& o) const { return {angular - o.angular, linear - o.linear}; }
  Motion operator*(double s) const { return {angular * s, linear * s}; }
};

/// 6-D force vector (wrench), torque part first so that <motion, force> is power.
struct Force {
  Vec3 torque = Vec3::Zero();
  Vec3 force = Vec3::Zero();

  Force() = default;
  Force(const Vec3& tau, const Vec3& f) : torque(tau), force(f) {}

  static Force Zero() { return {}; }

  Vec6 vector() const {
    Vec6 out;
    out << torque, force;
    return out;
  }
  static Force from_vector(const Vec6& v) { return {v.head<3>(), v.tail<3>()}; }

  Force operator+(const Force& o) const { return {torque + o.torque, force + o.force}; }
  Force operator-(const Force& o) const { return {torque - o.torque, force - o.force}; }
  Force operator*(double s) const { return {torque * s, force * s}; }
};

/// Rigid placement of a frame: rotation maps local coordinates to parent
/// coordinates, translation is the frame origin in the parent frame.
struct Placement {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Placement() = default;
  Placement(const Mat3& R, const Vec3& p) : rotation(R), translation(p) {}

  static Placement Identity() { return {}; }
  static Placement from_translation(const Vec3& p) { return {Mat3::Identity(), p}; }
  static Placement from_rotation(const Mat3& R) { return {R, Vec3::Zero()}; }
  static Placement from_quaternion(const Quat& quat, const Vec3& p) {
    return {quat.normalized().toRotationMatrix(), p};
  }

  /// Composition: (this * other) places `other` expressed in this frame.
  Placement operator*(const Placement& o) const {
    return {rotation * o.rotation, translation + rotation * o.translation};
  }

  Placement inverse() const {
    Mat3 Rt = rotation.transpose();
    return {Rt, -(Rt * translation)};
  }

  Vec3 act_point(const Vec3& x) const { return rotation * x + translation; }
  Vec3 act_inverse_point(const Vec3& x) const { return rotation.transpose() * (x - translation); }

  bool is_approx(const Placement& o, double tol = 1e-12) const {
    return (rotation - o.rotation).lpNorm<Eigen::Infinity>() <= tol &&
           (translation - o.translation).lpNorm<Eigen::Infinity>() <= tol;
  }
};

/// Rigid-body inertia: mass, CoM offset, and rotational inertia about the CoM.
struct SpatialInertia {
  double mass = 0.0;
  Vec3 com = Vec3::Zero();
  Mat3 rotational = Mat3::Zero();  // about the CoM, symmetric PSD

  SpatialInertia() = default;
  SpatialInertia(double m, const Vec3& c, const Mat3& I) : mass(m), com(c), rotational(I) {}

  static SpatialInertia Zero() { return {}; }
  static SpatialInertia point_mass(double m, const Vec3& c = Vec3::Zero()) {
    return {m, c, Mat3::Zero()};
  }
  static SpatialInertia solid_sphere(double m, double radius, const Vec3& c = Vec3::Zero()) {
    return {m, c, Mat3::Identity() * (0.4 * m * radius * radius)};
  }
  /// Solid cuboid with full extents (ex, ey, ez) centered at c.
  static SpatialInertia solid_box(double m, const Vec3& e, const Vec3& c = Vec3::Zero()) {
    Mat3 I = Mat3::Zero();
    I(0, 0) = m / 12.0 * (e.y() * e.y() + e.z() * e.z());
    I(1, 1) = m / 12.0 * (e.x() * e.x() + e.z() * e.z());
    I(2, 2) = m / 12.0 * (e.x() * e.x() + e.y() * e.y());
    return {m, c, I};
  }

  /// 6x6 matrix form about the frame origin, angular-first.
  Mat6 matrix() const;

  SpatialInertia operator+(const SpatialInertia& o) const;
};

inline Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

/// Express a motion given in the placed (local) frame in the parent frame.
Motion transform_motion(const Placement& X, const Motion& v);

/// Express a motion given in the parent frame in the placed (local) frame.
Motion transform_motion_inverse(const Placement& X, const Motion& v);

/// Dual transforms for forces: preserve the power pairing with the motion maps.
Force transform_force(const Placement& X, const Force& f);
Force transform_force_inverse(const Placement& X, const Force& f);

/// I * a: the spatial force produced by accelerating a body with inertia I.
Force inertia_apply(const SpatialInertia& I, const Motion& a);

/// Shift an inertia expressed in a child frame into the parent frame via X.
SpatialInertia transform_inertia(const Placement& X, const SpatialInertia& I);

/// Motion cross product v x m (appears in velocity propagation).
Motion motion_cross(const Motion& v, const Motion& m);

/// Force cross product v x* f (appears in the Newton-Euler bias term).
Force force_cross(const Motion& v, const Force& f);

inline double power(const Motion& v, const Force& f) {
  return v.angular.dot(f.torque) + v.linear.dot(f.force);
}

/// 6x6 matrix of transform_motion (local -> parent), angular-first ordering.
Mat6 motion_transform_matrix(const Placement& X);
/// 6x6 matrix of transform_motion_inverse (parent -> local).
Mat6 motion_transform_matrix_inverse(const Placement& X);

/// Rotation-vector exponential and its inverse (principal branch).
Mat3 exp3(const Vec3& omega);
Vec3 log3(const Mat3& R);

/// Unit quaternion for a rotation vector.
Quat quat_exp(const Vec3& omega);

}  // namespace loom

#endif
