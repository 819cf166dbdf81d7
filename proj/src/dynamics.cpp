#include "claps/dynamics.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <Eigen/QR>

#include <cmath>
#include <stdexcept>

namespace claps {

namespace {

Eigen::Matrix3d spd_inverse(const Eigen::Matrix3d& m, const char* what) {
  if (!m.isApprox(m.transpose(), 1e-12)) {
    throw std::invalid_argument(std::string(what) + ": inertia must be symmetric");
  }
  Eigen::LLT<Eigen::Matrix3d> llt(m);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument(std::string(what) + ": inertia must be positive definite");
  }
  return llt.solve(Eigen::Matrix3d::Identity());
}

Eigen::Matrix3d checked_pinv(const Eigen::Matrix3d& j) {
  Eigen::CompleteOrthogonalDecomposition<Eigen::Matrix3d> cod(j);
  if (cod.rank() < 3) {
    throw std::invalid_argument("body Jacobian is rank deficient");
  }
  return cod.pseudoInverse();
}

}  // namespace

SSModel::SSModel(const Eigen::Matrix3d& inertia)
    : inertia_(inertia), inertia_inv_(spd_inverse(inertia, "SSModel")) {}

Eigen::RowVector3d SSModel::constraint(const Eigen::Vector3d& q) {
  return {std::sin(q(2)), -std::cos(q(2)), 0.0};
}

Eigen::RowVector3d SSModel::constraint_rate(const Eigen::Vector3d& q, const Eigen::Vector3d& dq) {
  return {dq(2) * std::cos(q(2)), dq(2) * std::sin(q(2)), 0.0};
}

Eigen::Matrix<double, 3, 2> SSModel::input_map(const Eigen::Vector3d& q) {
  Eigen::Matrix<double, 3, 2> b;
  b << std::cos(q(2)), 0.0,
       std::sin(q(2)), 0.0,
       0.0, 1.0;
  return b;
}

LieModel::LieModel(const Eigen::Matrix3d& inertia, const Eigen::RowVector3d& constraint,
                   const Eigen::Matrix<double, 3, 2>& input_map)
    : inertia_(inertia),
      inertia_inv_(spd_inverse(inertia, "LieModel")),
      constraint_(constraint),
      input_map_(input_map) {
  const Projection p = projection_matrix(inertia_, constraint_);
  projector_ = p.projector;
  complement_ = p.complement;
}

LieModel LieModel::unicycle(const Eigen::Matrix3d& inertia) {
  Eigen::Matrix<double, 3, 2> b;
  b << 1.0, 0.0,
       0.0, 0.0,
       0.0, 1.0;
  return {inertia, Eigen::RowVector3d(0.0, 1.0, 0.0), b};
}

Eigen::Matrix3d default_model_inertia() {
  return Eigen::Vector3d(2.8, 2.8, 0.007).asDiagonal();
}

Eigen::Matrix3d body_jacobian(const GeneralizedConfig& q) {
  // Columns are vee(g^-1 dK/dq_j): R^T applied to the translational partials.
  const double c = std::cos(q.theta);
  const double s = std::sin(q.theta);
  Eigen::Matrix3d j;
  j << c, s, 0.0,
       -s, c, 0.0,
       0.0, 0.0, 1.0;
  return j;
}

Eigen::RowVector3d convert_constraint(const Eigen::RowVector3d& a, const GeneralizedConfig& q) {
  return a * checked_pinv(body_jacobian(q));
}

Eigen::Matrix3d convert_inertia(const Eigen::Matrix3d& m, const GeneralizedConfig& q) {
  const Eigen::Matrix3d jp = checked_pinv(body_jacobian(q));
  return jp.transpose() * m * jp;
}

Eigen::Matrix<double, 3, 2> convert_input(const Eigen::Matrix<double, 3, 2>& b,
                                          const GeneralizedConfig& q) {
  return checked_pinv(body_jacobian(q)).transpose() * b;
}

Projection projection_matrix(const Eigen::Matrix3d& inertia, const Eigen::RowVector3d& constraint) {
  const Eigen::Matrix3d m_inv = spd_inverse(inertia, "projection_matrix");
  const double gram = constraint * m_inv * constraint.transpose();
  if (!(std::abs(gram) > 1e-300) || !std::isfinite(gram)) {
    throw std::invalid_argument("projection_matrix: A M^-1 A^T is singular");
  }
  Projection p;
  p.projector = m_inv * constraint.transpose() * constraint / gram;
  p.complement = Eigen::Matrix3d::Identity() - p.projector;
  return p;
}

Twist eps_accel(const Twist& xi, const ControlInput& u, const LieModel& model,
                const Eigen::Vector3d& extra_wrench) {
  const Eigen::Vector3d wrench = ad(xi).transpose() * (model.inertia() * xi) +
                                 model.input_map() * u.vector() + extra_wrench;
  return model.complement() * (model.inertia_inv() * wrench);
}

Twist eps_accel_multiplier(const Twist& xi, const ControlInput& u, const LieModel& model) {
  const Eigen::Vector3d free_wrench =
      ad(xi).transpose() * (model.inertia() * xi) + model.input_map() * u.vector();
  const Eigen::RowVector3d& a = model.constraint();
  const Eigen::Matrix3d& m_inv = model.inertia_inv();
  const double gram = a * m_inv * a.transpose();
  const double lambda = -(a * m_inv * free_wrench)(0) / gram;
  return m_inv * (free_wrench + a.transpose() * lambda);
}

Eigen::Vector3d ss_accel(const Eigen::Vector3d& q, const Eigen::Vector3d& dq,
                         const ControlInput& u, const SSModel& model) {
  const Eigen::RowVector3d a = SSModel::constraint(q);
  const Eigen::RowVector3d a_dot = SSModel::constraint_rate(q, dq);
  const Eigen::Vector3d force = SSModel::input_map(q) * u.vector();
  const Eigen::Matrix3d& m_inv = model.inertia_inv();
  const double gram = a * m_inv * a.transpose();
  const double lambda = -((a * m_inv * force)(0) + a_dot.dot(dq)) / gram;
  return m_inv * (force + a.transpose() * lambda);
}

std::string_view to_string(Method m) {
  switch (m) {
    case Method::FE: return "FE";
    case Method::SE: return "SE";
    case Method::Heun: return "Heun";
    case Method::RK2: return "RK2";
    case Method::RK4: return "RK4";
    case Method::CF4: return "CF4";
  }
  return "?";
}

std::string_view to_string(Space s) { return s == Space::Lie ? "Lie" : "SS"; }

Method method_from_string(std::string_view name) {
  for (Method m : {Method::FE, Method::SE, Method::Heun, Method::RK2, Method::RK4, Method::CF4}) {
    if (to_string(m) == name) return m;
  }
  throw std::invalid_argument("unknown integrator: " + std::string(name));
}

bool supports(Method m, Space s) {
  if (m == Method::RK4) return s == Space::StateSpace;
  if (m == Method::CF4) return s == Space::Lie;
  return true;
}

LieState step(const LieState& s, const ControlInput& u, double dt, Method method,
              const LieModel& model) {
  if (!(dt > 0.0)) throw std::invalid_argument("step: dt must be positive");
  if (!supports(method, Space::Lie)) {
    throw std::invalid_argument("step: " + std::string(to_string(method)) +
                                " is not available on the Lie group");
  }
  return lie_step(s, dt, method, [&](const Twist& xi) { return eps_accel(xi, u, model); });
}

SSState step(const SSState& s, const ControlInput& u, double dt, Method method,
             const SSModel& model) {
  if (!(dt > 0.0)) throw std::invalid_argument("step: dt must be positive");
  if (!supports(method, Space::StateSpace)) {
    throw std::invalid_argument("step: " + std::string(to_string(method)) +
                                " is not available in the state space");
  }
  auto accel = [&](const Eigen::Vector3d& q, const Eigen::Vector3d& dq) {
    return ss_accel(q, dq, u, model);
  };
  const Eigen::Vector3d& q = s.q;
  const Eigen::Vector3d& dq = s.dq;
  const double h = dt;
  switch (method) {
    case Method::FE:
      return {q + h * dq, dq + h * accel(q, dq)};
    case Method::SE: {
      const Eigen::Vector3d dq1 = dq + h * accel(q, dq);
      return {q + h * dq1, dq1};
    }
    case Method::Heun: {
      const Eigen::Vector3d a1 = accel(q, dq);
      const Eigen::Vector3d qp = q + h * dq;
      const Eigen::Vector3d dqp = dq + h * a1;
      const Eigen::Vector3d a2 = accel(qp, dqp);
      return {q + 0.5 * h * (dq + dqp), dq + 0.5 * h * (a1 + a2)};
    }
    case Method::RK2: {
      const Eigen::Vector3d a1 = accel(q, dq);
      const Eigen::Vector3d qm = q + 0.5 * h * dq;
      const Eigen::Vector3d dqm = dq + 0.5 * h * a1;
      return {q + h * dqm, dq + h * accel(qm, dqm)};
    }
    case Method::RK4: {
      const Eigen::Vector3d v1 = dq;
      const Eigen::Vector3d a1 = accel(q, v1);
      const Eigen::Vector3d v2 = dq + 0.5 * h * a1;
      const Eigen::Vector3d a2 = accel(q + 0.5 * h * v1, v2);
      const Eigen::Vector3d v3 = dq + 0.5 * h * a2;
      const Eigen::Vector3d a3 = accel(q + 0.5 * h * v2, v3);
      const Eigen::Vector3d v4 = dq + h * a3;
      const Eigen::Vector3d a4 = accel(q + h * v3, v4);
      return {q + (h / 6.0) * (v1 + 2.0 * v2 + 2.0 * v3 + v4),
              dq + (h / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4)};
    }
    case Method::CF4:
      break;
  }
  throw std::invalid_argument("step: unsupported state-space method");
}

int step_count(double duration, double dt) {
  if (!(dt > 0.0) || !(duration >= 0.0)) {
    throw std::invalid_argument("integrate: need dt > 0 and duration >= 0");
  }
  // Guard against 1/0.1 = 9.999... style rounding before taking the ceiling.
  return static_cast<int>(std::ceil(duration / dt - 1e-9));
}

LieState integrate(const LieState& s0, const ControlInput& u, double duration, double dt,
                   Method method, const LieModel& model) {
  const int n = step_count(duration, dt);
  LieState s = s0;
  if (n == 0) return s;
  const double h = duration / n;
  for (int i = 0; i < n; ++i) s = step(s, u, h, method, model);
  return s;
}

SSState integrate(const SSState& s0, const ControlInput& u, double duration, double dt,
                  Method method, const SSModel& model) {
  const int n = step_count(duration, dt);
  SSState s = s0;
  if (n == 0) return s;
  const double h = duration / n;
  for (int i = 0; i < n; ++i) s = step(s, u, h, method, model);
  return s;
}

SSState to_ss_state(const LieState& s) {
  const GeneralizedConfig q = kinematics_inv(s.pose);
  SSState out;
  out.q = q.vector();
  out.dq = body_jacobian(q).transpose() * s.twist;  // J_K is orthogonal for the unicycle
  return out;
}

LieState to_lie_state(const SSState& s) {
  const GeneralizedConfig q{s.q(0), s.q(1), s.q(2)};
  LieState out;
  out.pose = kinematics_map(q);
  out.twist = body_jacobian(q) * s.dq;
  return out;
}

namespace {

/// Kahan-compensated running sum.
struct CompensatedSum {
  double sum = 0.0;
  double carry = 0.0;

  void add(double v) {
    const double y = v - carry;
    const double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
};

}  // namespace

LieState reference_trajectory(const LieState& s0, const ControlInput& u, double duration,
                              const LieModel& model, double step_size) {
  // CF4 with the pose kept as compensated sums of per-step increments, so the
  // 1e5 steps of a one-second reference do not pile up rounding error.
  const int n = step_count(duration, step_size);
  if (n == 0) return s0;
  const double h = duration / n;
  CompensatedSum x, y, theta, twist[3];
  x.add(s0.pose.x());
  y.add(s0.pose.y());
  theta.add(s0.pose.theta());
  for (int k = 0; k < 3; ++k) twist[k].add(s0.twist(k));
  const auto accel = [&](const Twist& xi) { return eps_accel(xi, u, model); };
  for (int i = 0; i < n; ++i) {
    const Twist xi(twist[0].sum, twist[1].sum, twist[2].sum);
    // Same stages as lie_step's CF4, with the increments kept separate.
    const Twist k1 = accel(xi);
    const Twist f2 = xi + 0.5 * h * k1;
    const Twist k2 = accel(f2);
    const Twist f3 = xi + 0.5 * h * k2;
    const Twist k3 = accel(f3);
    const Twist f4 = xi + h * k3;
    const Twist k4 = accel(f4);
    const Pose local = exp((h / 12.0) * (3.0 * xi + 2.0 * f2 + 2.0 * f3 - f4)) *
                       exp((h / 12.0) * (-xi + 2.0 * f2 + 2.0 * f3 + 3.0 * f4));
    const Twist dxi = (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    const double c = std::cos(theta.sum);
    const double s = std::sin(theta.sum);
    x.add(c * local.x() - s * local.y());
    y.add(s * local.x() + c * local.y());
    theta.add(local.theta());
    for (int k = 0; k < 3; ++k) twist[k].add(dxi(k));
  }
  return {Pose(x.sum, y.sum, theta.sum), Twist(twist[0].sum, twist[1].sum, twist[2].sum)};
}

double kinetic_energy(const Twist& xi, const LieModel& model) {
  return 0.5 * xi.dot(model.inertia() * xi);
}

}  // namespace claps
