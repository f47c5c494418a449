#include "loom/spatial.hpp"

#include <cmath>

namespace loom {

Mat6 SpatialInertia::matrix() const {
  Mat6 M = Mat6::Zero();
  Mat3 chat = skew(com);
  M.topLeftCorner<3, 3>() = rotational - mass * chat * chat;
  M.topRightCorner<3, 3>() = mass * chat;
  M.bottomLeftCorner<3, 3>() = -mass * chat;
  M.bottomRightCorner<3, 3>() = mass * Mat3::Identity();
  return M;
}

SpatialInertia SpatialInertia::operator+(const SpatialInertia& o) const {
  SpatialInertia out;
  out.mass = mass + o.mass;
  if (out.mass <= 0.0) {
    out.com = Vec3::Zero();
    out.rotational = rotational + o.rotational;
    return out;
  }
  out.com = (mass * com + o.mass * o.com) / out.mass;
  // Parallel-axis both terms onto the combined CoM.
  auto shift = [](const SpatialInertia& I, const Vec3& c) {
    Vec3 d = I.com - c;
    Mat3 dh = skew(d);
    return Mat3(I.rotational - I.mass * dh * dh);
  };
  out.rotational = shift(*this, out.com) + shift(o, out.com);
  return out;
}

Motion transform_motion(const Placement& X, const Motion& v) {
  Vec3 ang = X.rotation * v.angular;
  return {ang, X.rotation * v.linear + X.translation.cross(ang)};
}

Motion transform_motion_inverse(const Placement& X, const Motion& v) {
  const Mat3 Rt = X.rotation.transpose();
  return {Rt * v.angular, Rt * (v.linear - X.translation.cross(v.angular))};
}

Force transform_force(const Placement& X, const Force& f) {
  Vec3 lin = X.rotation * f.force;
  return {X.rotation * f.torque + X.translation.cross(lin), lin};
}

Force transform_force_inverse(const Placement& X, const Force& f) {
  const Mat3 Rt = X.rotation.transpose();
  return {Rt * (f.torque - X.translation.cross(f.force)), Rt * f.force};
}

Force inertia_apply(const SpatialInertia& I, const Motion& a) {
  Vec3 f = I.mass * (a.linear + a.angular.cross(I.com));
  Vec3 tau = I.rotational * a.angular + I.com.cross(f);
  return {tau, f};
}

SpatialInertia transform_inertia(const Placement& X, const SpatialInertia& I) {
  SpatialInertia out;
  out.mass = I.mass;
  out.com = X.act_point(I.com);
  out.rotational = X.rotation * I.rotational * X.rotation.transpose();
  return out;
}

Motion motion_cross(const Motion& v, const Motion& m) {
  return {v.angular.cross(m.angular), v.angular.cross(m.linear) + v.linear.cross(m.angular)};
}

Force force_cross(const Motion& v, const Force& f) {
  return {v.angular.cross(f.torque) + v.linear.cross(f.force), v.angular.cross(f.force)};
}

Mat6 motion_transform_matrix(const Placement& X) {
  Mat6 M = Mat6::Zero();
  M.topLeftCorner<3, 3>() = X.rotation;
  M.bottomLeftCorner<3, 3>() = skew(X.translation) * X.rotation;
  M.bottomRightCorner<3, 3>() = X.rotation;
  return M;
}

Mat6 motion_transform_matrix_inverse(const Placement& X) {
  Mat6 M = Mat6::Zero();
  const Mat3 Rt = X.rotation.transpose();
  M.topLeftCorner<3, 3>() = Rt;
  M.bottomLeftCorner<3, 3>() = -Rt * skew(X.translation);
  M.bottomRightCorner<3, 3>() = Rt;
  return M;
}

Mat3 exp3(const Vec3& omega) {
  double theta = omega.norm();
  if (theta < 1e-12) {
    return Mat3::Identity() + skew(omega);
  }
  Vec3 axis = omega / theta;
  return Eigen::AngleAxisd(theta, axis).toRotationMatrix();
}

Vec3 log3(const Mat3& R) {
  Eigen::AngleAxisd aa(R);
  return aa.angle() * aa.axis();
}

Quat quat_exp(const Vec3& omega) {
  double theta = omega.norm();
  if (theta < 1e-12) {
    Quat q(1.0, 0.5 * omega.x(), 0.5 * omega.y(), 0.5 * omega.z());
    q.normalize();
    return q;
  }
  Vec3 axis = omega / theta;
  return Quat(Eigen::AngleAxisd(theta, axis));
}

}  // namespace loom
