#pragma once

#include "claps/dynamics.hpp"
#include "claps/simulate.hpp"

#include <Eigen/Core>

#include <functional>
#include <vector>

namespace claps {

/// Coordinates in which a prediction's pose covariance is expressed.
enum class Frame {
  ExpCoordsLeft,  ///< log(mean^-1 g), left-invariant exponential coordinates
  Generalized,    ///< q - mean_q with the heading difference wrapped
};

struct GaussianPrediction {
  Pose mean;
  Twist mean_twist = Twist::Zero();
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  Frame frame = Frame::ExpCoordsLeft;
};

/// Wrench covariance assumed by a predictor (may differ from the world's).
struct NoiseConfig {
  Eigen::Matrix2d q0 = Eigen::Matrix2d::Zero();
};

/// Planning step discretization shared by the predictors.
struct Horizon {
  double duration = 0.5;
  int substeps = 30;

  double dt() const { return duration / substeps; }
};

/// Eigenvalue floor applied to every returned covariance.
double covariance_floor(const Eigen::Matrix3d& cov);

/// Symmetrizes and lifts eigenvalues to covariance_floor().
Eigen::Matrix3d regularize_covariance(const Eigen::Matrix3d& cov);

/// Lie-group prediction step: forward-Euler mean and a joint pose/twist
/// covariance in left-invariant error coordinates, linearized per substep by
/// central differences. Wrench noise Q0 enters every substep.
GaussianPrediction inekf_predict(const LieState& s0, const ControlInput& u, const LieModel& model,
                                 const NoiseConfig& noise, const Horizon& horizon = {});

/// State-space prediction step, linearized in (q, dq). Covariance frame is Generalized.
GaussianPrediction ekf_predict_ss(const LieState& s0, const ControlInput& u, const SSModel& model,
                                  const NoiseConfig& noise, const Horizon& horizon = {});

using Predictor = std::function<GaussianPrediction(const LieState&, const ControlInput&)>;

/// e1 = log(mean^-1 g1) of every record under the given predictor.
std::vector<AlgebraVector> calibration_errors(const std::vector<TransitionRecord>& records,
                                              const Predictor& predictor);

/// Uncentered second moment (1/N) sum e e^T, regularized. Needs >= 4 errors.
Eigen::Matrix3d second_moment_cov(const std::vector<AlgebraVector>& errors);
Eigen::Matrix3d second_moment_cov(const std::vector<TransitionRecord>& records,
                                  const Predictor& predictor);

struct BiasCovariance {
  AlgebraVector bias = AlgebraVector::Zero();
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
};

/// Mean error and centered (1/N) covariance, regularized. Needs >= 4 errors.
BiasCovariance mle_bias_cov(const std::vector<AlgebraVector>& errors);
BiasCovariance mle_bias_cov(const std::vector<TransitionRecord>& records,
                            const Predictor& predictor);

/// Replaces a prediction's covariance by an action-independent fit and
/// shifts its mean to mean * exp(bias).
GaussianPrediction with_fixed_covariance(const GaussianPrediction& pred,
                                         const Eigen::Matrix3d& cov,
                                         const AlgebraVector& bias = AlgebraVector::Zero());

}  // namespace claps
