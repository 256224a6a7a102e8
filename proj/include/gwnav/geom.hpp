#pragma once

// Small 3D geometry kit: fixed-size vector aliases and quaternion
// exponential/log maps used by the rod kinematics.

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <cmath>
#include <numbers>
#include <span>

#include "gwnav/common.hpp"

namespace gwnav {

inline constexpr double kPi = std::numbers::pi;

using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat12 = Eigen::Matrix<double, 12, 12>;
using Quat = Eigen::Quaterniond;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

// exp of a rotation vector (angle * axis) as a unit quaternion
inline Quat quat_exp(const Vec3& w) {
  double angle = w.norm();
  if (angle < 1e-12) {
    Quat q(1.0, 0.5 * w.x(), 0.5 * w.y(), 0.5 * w.z());
    q.normalize();
    return q;
  }
  double half = 0.5 * angle;
  double s = std::sin(half) / angle;
  return Quat(std::cos(half), s * w.x(), s * w.y(), s * w.z());
}

// rotation vector of a unit quaternion; inverse of quat_exp
inline Vec3 quat_log(const Quat& q_in) {
  Quat q = q_in;
  if (q.w() < 0.0) q.coeffs() *= -1.0; // principal branch
  Vec3 v(q.x(), q.y(), q.z());
  double sin_half = v.norm();
  if (sin_half < 1e-12) return 2.0 * v;
  double half = std::atan2(sin_half, q.w());
  return (2.0 * half / sin_half) * v;
}

inline Quat quat_about(const Vec3& unit_axis, double angle) {
  return Quat(Eigen::AngleAxisd(angle, unit_axis));
}

// Any unit vector perpendicular to v. Not rotation-equivariant; only used
// where a canonical frame is being invented (vessel generation).
inline Vec3 any_perpendicular(const Vec3& v) {
  Vec3 a = std::abs(v.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  return v.cross(a).normalized();
}

// Minimal rotation taking unit vector a onto unit vector b.
inline Quat rotation_between(const Vec3& a, const Vec3& b) {
  return Quat::FromTwoVectors(a, b);
}

inline bool finite(const Vec3& v) { return v.allFinite(); }
inline bool finite(const Quat& q) { return q.coeffs().allFinite(); }

} // namespace gwnav
