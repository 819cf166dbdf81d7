#pragma once

#include "claps/se2.hpp"

#include <Eigen/Core>

#include <string>
#include <string_view>

namespace claps {

/// Body-frame wrench command: forward force (N) and yaw torque (N m).
struct ControlInput {
  double fx = 0.0;
  double tz = 0.0;

  Eigen::Vector2d vector() const { return {fx, tz}; }
  static ControlInput from_vector(const Eigen::Vector2d& u) { return {u(0), u(1)}; }
};

/// Lie-group state (g, xi).
struct LieState {
  Pose pose;
  Twist twist = Twist::Zero();
};

/// State-space state (q, dq/dt). The heading is not wrapped while integrating.
struct SSState {
  Eigen::Vector3d q = Eigen::Vector3d::Zero();
  Eigen::Vector3d dq = Eigen::Vector3d::Zero();
};

/// Second-order unicycle in generalized coordinates.
/// Constraint A(q) = [sin, -cos, 0]; force map B(q) = [[cos, 0], [sin, 0], [0, 1]].
class SSModel {
 public:
  explicit SSModel(const Eigen::Matrix3d& inertia);

  const Eigen::Matrix3d& inertia() const { return inertia_; }
  const Eigen::Matrix3d& inertia_inv() const { return inertia_inv_; }

  static Eigen::RowVector3d constraint(const Eigen::Vector3d& q);
  /// d/dt A(q) along dq, evaluated analytically.
  static Eigen::RowVector3d constraint_rate(const Eigen::Vector3d& q, const Eigen::Vector3d& dq);
  static Eigen::Matrix<double, 3, 2> input_map(const Eigen::Vector3d& q);

 private:
  Eigen::Matrix3d inertia_;
  Eigen::Matrix3d inertia_inv_;
};

/// Euler-Poincare-Suslov model with a single, configuration-independent
/// constraint row and the precomputed complement (I - P) of the oblique
/// projector P = M^-1 A^T (A M^-1 A^T)^-1 A.
class LieModel {
 public:
  LieModel(const Eigen::Matrix3d& inertia, const Eigen::RowVector3d& constraint,
           const Eigen::Matrix<double, 3, 2>& input_map);

  /// Unicycle with the given body inertia, A = [0, 1, 0], B = [[1,0],[0,0],[0,1]].
  static LieModel unicycle(const Eigen::Matrix3d& inertia);

  const Eigen::Matrix3d& inertia() const { return inertia_; }
  const Eigen::Matrix3d& inertia_inv() const { return inertia_inv_; }
  const Eigen::RowVector3d& constraint() const { return constraint_; }
  const Eigen::Matrix<double, 3, 2>& input_map() const { return input_map_; }
  const Eigen::Matrix3d& projector() const { return projector_; }
  const Eigen::Matrix3d& complement() const { return complement_; }

 private:
  Eigen::Matrix3d inertia_;
  Eigen::Matrix3d inertia_inv_;
  Eigen::RowVector3d constraint_;
  Eigen::Matrix<double, 3, 2> input_map_;
  Eigen::Matrix3d projector_;
  Eigen::Matrix3d complement_;
};

/// Default approximate inertia diag(2.8, 2.8, 0.007).
Eigen::Matrix3d default_model_inertia();

Eigen::Matrix3d body_jacobian(const GeneralizedConfig& q);

Eigen::RowVector3d convert_constraint(const Eigen::RowVector3d& a, const GeneralizedConfig& q);
Eigen::Matrix3d convert_inertia(const Eigen::Matrix3d& m, const GeneralizedConfig& q);
Eigen::Matrix<double, 3, 2> convert_input(const Eigen::Matrix<double, 3, 2>& b,
                                          const GeneralizedConfig& q);

struct Projection {
  Eigen::Matrix3d projector;
  Eigen::Matrix3d complement;
};

/// Throws std::invalid_argument when A M^-1 A^T is singular.
Projection projection_matrix(const Eigen::Matrix3d& inertia, const Eigen::RowVector3d& constraint);

/// Constrained twist rate (I - P) M^-1 (ad(xi)^T M xi + B u + extra_wrench).
Twist eps_accel(const Twist& xi, const ControlInput& u, const LieModel& model,
                const Eigen::Vector3d& extra_wrench = Eigen::Vector3d::Zero());

/// Same rate obtained by solving for the Lagrange multiplier explicitly.
Twist eps_accel_multiplier(const Twist& xi, const ControlInput& u, const LieModel& model);

/// Generalized accelerations of the forced Lagrange-d'Alembert equations.
Eigen::Vector3d ss_accel(const Eigen::Vector3d& q, const Eigen::Vector3d& dq,
                         const ControlInput& u, const SSModel& model);

enum class Method { FE, SE, Heun, RK2, RK4, CF4 };
enum class Space { StateSpace, Lie };

std::string_view to_string(Method m);
std::string_view to_string(Space s);
Method method_from_string(std::string_view name);

/// True for the pairings that exist: FE/SE/Heun/RK2 on both spaces,
/// RK4 on the state space only and CF4 on the Lie group only.
bool supports(Method m, Space s);

/// One Lie-group step with constant input. Pose updates use g <- g exp(h * stage twist).
LieState step(const LieState& s, const ControlInput& u, double dt, Method method,
              const LieModel& model);

/// One state-space step with constant input.
SSState step(const SSState& s, const ControlInput& u, double dt, Method method,
             const SSModel& model);

/// Integrates over [0, duration] with ceil(duration / dt) equal steps.
LieState integrate(const LieState& s0, const ControlInput& u, double duration, double dt,
                   Method method, const LieModel& model);
SSState integrate(const SSState& s0, const ControlInput& u, double duration, double dt,
                  Method method, const SSModel& model);

/// Step count used by integrate().
int step_count(double duration, double dt);

SSState to_ss_state(const LieState& s);
LieState to_lie_state(const SSState& s);

/// Fine-step CF4 terminal state used as the accuracy oracle.
inline constexpr double kReferenceStep = 1e-5;
LieState reference_trajectory(const LieState& s0, const ControlInput& u, double duration,
                              const LieModel& model, double step = kReferenceStep);

double kinetic_energy(const Twist& xi, const LieModel& model);

/// Lie-group step for a left-invariant system whose twist rate depends on the
/// twist only. `accel` maps a twist to its time derivative.
template <class Accel>
LieState lie_step(const LieState& s, double h, Method method, Accel&& accel) {
  const Pose& g = s.pose;
  const Twist& xi = s.twist;
  switch (method) {
    case Method::FE: {
      return {g * exp(h * xi), xi + h * accel(xi)};
    }
    case Method::SE: {
      const Twist next = xi + h * accel(xi);
      return {g * exp(h * next), next};
    }
    case Method::Heun: {
      const Twist k1 = accel(xi);
      const Twist predicted = xi + h * k1;
      const Twist k2 = accel(predicted);
      return {g * exp(0.5 * h * (xi + predicted)), xi + 0.5 * h * (k1 + k2)};
    }
    case Method::RK2: {
      const Twist k1 = accel(xi);
      const Twist mid = xi + 0.5 * h * k1;
      return {g * exp(h * mid), xi + h * accel(mid)};
    }
    case Method::CF4: {
      // Commutator-free fourth-order scheme: four stages, two exponentials.
      // Stage twists double as the pose velocities F_i.
      const Twist f1 = xi;
      const Twist k1 = accel(f1);
      const Twist f2 = xi + 0.5 * h * k1;
      const Twist k2 = accel(f2);
      const Twist f3 = xi + 0.5 * h * k2;
      const Twist k3 = accel(f3);
      const Twist f4 = xi + h * k3;
      const Twist k4 = accel(f4);
      const AlgebraVector first = (h / 12.0) * (3.0 * f1 + 2.0 * f2 + 2.0 * f3 - f4);
      const AlgebraVector second = (h / 12.0) * (-f1 + 2.0 * f2 + 2.0 * f3 + 3.0 * f4);
      return {g * exp(first) * exp(second), xi + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)};
    }
    case Method::RK4:
      break;
  }
  throw std::invalid_argument("lie_step: method not available on the Lie group");
}

}  // namespace claps
