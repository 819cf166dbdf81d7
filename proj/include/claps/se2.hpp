#pragma once

#include <Eigen/Core>

#include <stdexcept>

namespace claps {

/// Exponential coordinates (rho_x, rho_y, theta). Translation first.
using AlgebraVector = Eigen::Vector3d;

/// Body-frame velocity (vx, vy, wz), same ordering as AlgebraVector.
using Twist = Eigen::Vector3d;

/// Raised when a group element leaves the domain where log is a bijection.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Wraps an angle into [-pi, pi).
double wrap_angle(double theta);

/// Wraps an angle into (-pi, pi]. Used for state-space angle differences.
double wrap_angle_upper(double theta);

/// Planar rigid transform stored as (x, y, theta) with theta in [-pi, pi).
/// Matrix forms are materialized on demand, so the rotation block is always
/// orthonormal to machine precision.
class Pose {
 public:
  Pose() = default;
  Pose(double x, double y, double theta);

  static Pose identity() { return {}; }
  static Pose from_matrix(const Eigen::Matrix3d& m);

  double x() const { return x_; }
  double y() const { return y_; }
  double theta() const { return theta_; }

  Eigen::Vector2d translation() const { return {x_, y_}; }
  Eigen::Matrix2d rotation() const;
  Eigen::Matrix3d matrix() const;

  Pose operator*(const Pose& other) const;
  Pose inverse() const;

 private:
  double x_ = 0.0;
  double y_ = 0.0;
  double theta_ = 0.0;
};

/// Generalized coordinates q = (x, y, theta), theta in [-pi, pi).
struct GeneralizedConfig {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;

  Eigen::Vector3d vector() const { return {x, y, theta}; }
};

/// Below this |theta| exp/log switch to Taylor series.
inline constexpr double kSeriesThreshold = 1e-6;

Eigen::Matrix3d wedge(const AlgebraVector& v);
AlgebraVector vee(const Eigen::Matrix3d& m);

Pose exp(const AlgebraVector& v);

/// Throws DomainError when |theta(g)| = pi (boundary of the injectivity domain).
AlgebraVector log(const Pose& g);

Pose compose(const Pose& a, const Pose& b);
Pose inverse(const Pose& g);

/// ad operator; ad(xi) * eta = vee([wedge(xi), wedge(eta)]).
Eigen::Matrix3d ad(const Twist& xi);

/// True iff v lies in the domain where exp is injective (|theta| < pi).
bool in_diffeomorphic_domain(const AlgebraVector& v);

Pose kinematics_map(const GeneralizedConfig& q);
GeneralizedConfig kinematics_inv(const Pose& g);

/// log(pred^-1 * truth): the left-invariant displacement from pred to truth.
AlgebraVector group_error(const Pose& pred, const Pose& truth);

/// 2x2 block V(theta) of the SE(2) exponential (translation = V * rho).
Eigen::Matrix2d exp_translation_jacobian(double theta);

}  // namespace claps
