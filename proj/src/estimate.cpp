#include "claps/estimate.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <stdexcept>

namespace claps {

namespace {

constexpr double kFdStep = 1e-6;
constexpr double kRegScale = 1e-12;

using Vector6d = Eigen::Matrix<double, 6, 1>;
using Matrix6d = Eigen::Matrix<double, 6, 6>;
using Matrix62d = Eigen::Matrix<double, 6, 2>;

struct Linearization {
  Matrix6d state;
  Matrix62d noise;
};

/// Central-difference Jacobians of one substep map about (x, u). `apply`
/// perturbs the state by an error vector, `diff` maps a perturbed output to
/// error coordinates relative to the nominal output.
template <class State, class Map, class Apply, class Diff>
Linearization linearize(const State& x, const Eigen::Vector2d& u, Map&& map, Apply&& apply,
                        Diff&& diff) {
  const State nominal = map(x, u);
  Linearization lin;
  for (int j = 0; j < 6; ++j) {
    Vector6d d = Vector6d::Zero();
    d(j) = kFdStep;
    const Vector6d plus = diff(nominal, map(apply(x, d), u));
    const Vector6d minus = diff(nominal, map(apply(x, -d), u));
    lin.state.col(j) = (plus - minus) / (2.0 * kFdStep);
  }
  for (int j = 0; j < 2; ++j) {
    Eigen::Vector2d d = Eigen::Vector2d::Zero();
    d(j) = kFdStep;
    const Vector6d plus = diff(nominal, map(x, u + d));
    const Vector6d minus = diff(nominal, map(x, u - d));
    lin.noise.col(j) = (plus - minus) / (2.0 * kFdStep);
  }
  return lin;
}

Eigen::Matrix2d symmetric_psd(const Eigen::Matrix2d& q) {
  const Eigen::Matrix2d s = 0.5 * (q + q.transpose());
  if (!s.allFinite() || Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(s).eigenvalues().minCoeff() < -1e-15) {
    throw std::invalid_argument("NoiseConfig: q0 must be positive semidefinite");
  }
  return s;
}

}  // namespace

double covariance_floor(const Eigen::Matrix3d& cov) {
  return kRegScale * std::max(1.0, std::abs(cov.trace()) / 3.0);
}

Eigen::Matrix3d regularize_covariance(const Eigen::Matrix3d& cov) {
  const Eigen::Matrix3d sym = 0.5 * (cov + cov.transpose());
  const double floor = covariance_floor(sym);
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(sym);
  if (es.eigenvalues().minCoeff() >= floor) return sym;
  const Eigen::Vector3d lifted = es.eigenvalues().cwiseMax(floor);
  const Eigen::Matrix3d out = es.eigenvectors() * lifted.asDiagonal() * es.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

GaussianPrediction inekf_predict(const LieState& s0, const ControlInput& u, const LieModel& model,
                                 const NoiseConfig& noise, const Horizon& horizon) {
  const Eigen::Matrix2d q0 = symmetric_psd(noise.q0);
  const double h = horizon.dt();

  auto map = [&](const LieState& s, const Eigen::Vector2d& w) {
    const ControlInput cmd = ControlInput::from_vector(w);
    return lie_step(s, h, Method::FE, [&](const Twist& xi) { return eps_accel(xi, cmd, model); });
  };
  auto apply = [](const LieState& s, const Vector6d& d) {
    return LieState{s.pose * exp(d.head<3>()), s.twist + d.tail<3>()};
  };
  auto diff = [](const LieState& nominal, const LieState& other) {
    Vector6d e;
    e.head<3>() = group_error(nominal.pose, other.pose);
    e.tail<3>() = other.twist - nominal.twist;
    return e;
  };

  const Eigen::Vector2d u_vec = u.vector();
  LieState mean = s0;
  Matrix6d p = Matrix6d::Zero();
  for (int i = 0; i < horizon.substeps; ++i) {
    const Linearization lin = linearize(mean, u_vec, map, apply, diff);
    p = lin.state * p * lin.state.transpose() + lin.noise * q0 * lin.noise.transpose();
    mean = map(mean, u_vec);
  }

  GaussianPrediction out;
  out.mean = mean.pose;
  out.mean_twist = mean.twist;
  out.cov = regularize_covariance(p.topLeftCorner<3, 3>());
  out.frame = Frame::ExpCoordsLeft;
  return out;
}

GaussianPrediction ekf_predict_ss(const LieState& s0, const ControlInput& u, const SSModel& model,
                                  const NoiseConfig& noise, const Horizon& horizon) {
  const Eigen::Matrix2d q0 = symmetric_psd(noise.q0);
  const double h = horizon.dt();

  auto map = [&](const SSState& s, const Eigen::Vector2d& w) {
    return step(s, ControlInput::from_vector(w), h, Method::FE, model);
  };
  auto apply = [](const SSState& s, const Vector6d& d) {
    return SSState{s.q + d.head<3>(), s.dq + d.tail<3>()};
  };
  auto diff = [](const SSState& nominal, const SSState& other) {
    Vector6d e;
    e.head<3>() = other.q - nominal.q;
    e.tail<3>() = other.dq - nominal.dq;
    return e;
  };

  const Eigen::Vector2d u_vec = u.vector();
  SSState mean = to_ss_state(s0);
  Matrix6d p = Matrix6d::Zero();
  for (int i = 0; i < horizon.substeps; ++i) {
    const Linearization lin = linearize(mean, u_vec, map, apply, diff);
    p = lin.state * p * lin.state.transpose() + lin.noise * q0 * lin.noise.transpose();
    mean = map(mean, u_vec);
  }

  const LieState lie = to_lie_state(mean);
  GaussianPrediction out;
  out.mean = lie.pose;
  out.mean_twist = lie.twist;
  out.cov = regularize_covariance(p.topLeftCorner<3, 3>());
  out.frame = Frame::Generalized;
  return out;
}

std::vector<AlgebraVector> calibration_errors(const std::vector<TransitionRecord>& records,
                                              const Predictor& predictor) {
  std::vector<AlgebraVector> errors;
  errors.reserve(records.size());
  for (const TransitionRecord& r : records) {
    errors.push_back(group_error(predictor(r.s0, r.u_des).mean, r.s1.pose));
  }
  return errors;
}

namespace {
void require_errors(const std::vector<AlgebraVector>& errors, const char* who) {
  if (errors.empty()) throw std::invalid_argument(std::string(who) + ": empty dataset");
  if (errors.size() < 4) throw std::invalid_argument(std::string(who) + ": need at least 4 records");
}
}  // namespace

Eigen::Matrix3d second_moment_cov(const std::vector<AlgebraVector>& errors) {
  require_errors(errors, "second_moment_cov");
  Eigen::Matrix3d sum = Eigen::Matrix3d::Zero();
  for (const AlgebraVector& e : errors) sum += e * e.transpose();
  return regularize_covariance(sum / static_cast<double>(errors.size()));
}

Eigen::Matrix3d second_moment_cov(const std::vector<TransitionRecord>& records,
                                  const Predictor& predictor) {
  return second_moment_cov(calibration_errors(records, predictor));
}

BiasCovariance mle_bias_cov(const std::vector<AlgebraVector>& errors) {
  require_errors(errors, "mle_bias_cov");
  const double n = static_cast<double>(errors.size());
  BiasCovariance out;
  for (const AlgebraVector& e : errors) out.bias += e;
  out.bias /= n;
  Eigen::Matrix3d sum = Eigen::Matrix3d::Zero();
  for (const AlgebraVector& e : errors) {
    const AlgebraVector c = e - out.bias;
    sum += c * c.transpose();
  }
  out.cov = regularize_covariance(sum / n);
  return out;
}

BiasCovariance mle_bias_cov(const std::vector<TransitionRecord>& records,
                            const Predictor& predictor) {
  return mle_bias_cov(calibration_errors(records, predictor));
}

GaussianPrediction with_fixed_covariance(const GaussianPrediction& pred, const Eigen::Matrix3d& cov,
                                         const AlgebraVector& bias) {
  GaussianPrediction out = pred;
  out.mean = pred.mean * exp(bias);
  out.cov = cov;
  out.frame = Frame::ExpCoordsLeft;
  return out;
}

}  // namespace claps
