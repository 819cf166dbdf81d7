#include "claps/se2.hpp"

#include <cmath>
#include <numbers>

namespace claps {

namespace {
constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}  // namespace

double wrap_angle(double theta) {
  double w = theta - kTwoPi * std::floor((theta + kPi) / kTwoPi);
  // floor() rounding can land exactly on +pi for inputs just below it.
  if (w >= kPi) w -= kTwoPi;
  if (w < -kPi) w += kTwoPi;
  return w;
}

double wrap_angle_upper(double theta) {
  const double w = wrap_angle(theta);
  return w == -kPi ? kPi : w;
}

Pose::Pose(double x, double y, double theta) : x_(x), y_(y), theta_(wrap_angle(theta)) {}

Pose Pose::from_matrix(const Eigen::Matrix3d& m) {
  return {m(0, 2), m(1, 2), std::atan2(m(1, 0), m(0, 0))};
}

Eigen::Matrix2d Pose::rotation() const {
  const double c = std::cos(theta_);
  const double s = std::sin(theta_);
  Eigen::Matrix2d r;
  r << c, -s, s, c;
  return r;
}

Eigen::Matrix3d Pose::matrix() const {
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  m.topLeftCorner<2, 2>() = rotation();
  m(0, 2) = x_;
  m(1, 2) = y_;
  return m;
}

Pose Pose::operator*(const Pose& other) const {
  const double c = std::cos(theta_);
  const double s = std::sin(theta_);
  return {x_ + c * other.x_ - s * other.y_, y_ + s * other.x_ + c * other.y_,
          theta_ + other.theta_};
}

Pose Pose::inverse() const {
  const double c = std::cos(theta_);
  const double s = std::sin(theta_);
  return {-(c * x_ + s * y_), s * x_ - c * y_, -theta_};
}

Eigen::Matrix3d wedge(const AlgebraVector& v) {
  Eigen::Matrix3d m;
  m << 0.0, -v(2), v(0),
       v(2), 0.0, v(1),
       0.0, 0.0, 0.0;
  return m;
}

AlgebraVector vee(const Eigen::Matrix3d& m) { return {m(0, 2), m(1, 2), m(1, 0)}; }

Eigen::Matrix2d exp_translation_jacobian(double theta) {
  double a;  // sin(theta) / theta
  double b;  // (1 - cos(theta)) / theta
  if (std::abs(theta) < kSeriesThreshold) {
    const double t2 = theta * theta;
    a = 1.0 - t2 / 6.0;
    b = theta / 2.0 - theta * t2 / 24.0;
  } else {
    a = std::sin(theta) / theta;
    const double sh = std::sin(0.5 * theta);
    b = 2.0 * sh * sh / theta;  // avoids cancellation in 1 - cos
  }
  Eigen::Matrix2d v;
  v << a, -b, b, a;
  return v;
}

Pose exp(const AlgebraVector& v) {
  const Eigen::Vector2d t = exp_translation_jacobian(v(2)) * v.head<2>();
  return {t(0), t(1), v(2)};
}

AlgebraVector log(const Pose& g) {
  const double theta = g.theta();
  if (!(std::abs(theta) < kPi)) {
    throw DomainError("SE(2) log: rotation angle on the boundary |theta| = pi");
  }
  const double half = 0.5 * theta;
  // (theta/2) * cot(theta/2)
  double a;
  if (std::abs(theta) < kSeriesThreshold) {
    a = 1.0 - theta * theta / 12.0;
  } else {
    a = half * std::cos(half) / std::sin(half);
  }
  const double tx = g.x();
  const double ty = g.y();
  return {a * tx + half * ty, -half * tx + a * ty, theta};
}

Pose compose(const Pose& a, const Pose& b) { return a * b; }

Pose inverse(const Pose& g) { return g.inverse(); }

Eigen::Matrix3d ad(const Twist& xi) {
  Eigen::Matrix3d m;
  m << 0.0, -xi(2), xi(1),
       xi(2), 0.0, -xi(0),
       0.0, 0.0, 0.0;
  return m;
}

bool in_diffeomorphic_domain(const AlgebraVector& v) { return std::abs(v(2)) < kPi; }

Pose kinematics_map(const GeneralizedConfig& q) { return {q.x, q.y, q.theta}; }

GeneralizedConfig kinematics_inv(const Pose& g) { return {g.x(), g.y(), g.theta()}; }

AlgebraVector group_error(const Pose& pred, const Pose& truth) {
  // pred^-1 * truth written out so that equal poses give an exactly zero error.
  const double c = std::cos(pred.theta());
  const double s = std::sin(pred.theta());
  const double dx = truth.x() - pred.x();
  const double dy = truth.y() - pred.y();
  return log(Pose(c * dx + s * dy, -s * dx + c * dy, truth.theta() - pred.theta()));
}

}  // namespace claps
