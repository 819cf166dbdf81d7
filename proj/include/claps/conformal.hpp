#pragma once

#include "claps/estimate.hpp"
#include "claps/se2.hpp"
#include "claps/simulate.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace claps {

enum class ScoreKind { ClapsMahalanobisLie, MahalanobisSS, L2SS, L2Lie };

std::string_view to_string(ScoreKind kind);
ScoreKind score_kind_from_string(std::string_view name);

/// Lie kinds measure e1 = log(mean^-1 g); SS kinds measure wrapped q differences.
bool is_lie(ScoreKind kind);
bool is_mahalanobis(ScoreKind kind);

/// Error vector used by a score kind: log(mean^-1 truth) for Lie kinds,
/// q(truth) - q(mean) with the heading wrapped into (-pi, pi] for SS kinds.
Eigen::Vector3d score_residual(ScoreKind kind, const Pose& truth, const Pose& mean);

/// Nonconformity score. Throws DomainError when a Lie residual hits |theta| = pi.
double score(ScoreKind kind, const Pose& truth, const GaussianPrediction& pred);

/// Scores many poses against one prediction, factoring the covariance once.
class ScoreEvaluator {
 public:
  ScoreEvaluator(ScoreKind kind, const GaussianPrediction& pred);

  double operator()(const Pose& truth) const;
  /// Score of a residual that has already been expressed in the kind's coordinates.
  double of_residual(const Eigen::Vector3d& residual) const;

  ScoreKind kind() const { return kind_; }

 private:
  ScoreKind kind_;
  Pose mean_;
  Eigen::LLT<Eigen::Matrix3d> llt_;
};

/// Order statistic ceil((1 - alpha)(n + 1)) of the scores, or +inf when that
/// index exceeds n. Throws std::invalid_argument on empty input or alpha outside (0, 1).
double split_quantile(std::span<const double> scores, double alpha);

/// Regularized lower incomplete gamma P(a, x).
double regularized_gamma_p(double a, double x);

double chi2_cdf(double x, int dof);

/// (1 - alpha)-quantile of the chi-square distribution with `dof` degrees of freedom.
double chi2_quantile(double alpha, int dof);

struct CalibrationResult {
  double alpha = 0.1;
  std::size_t n_cal = 0;
  double q_hat = 0.0;
  double zeta = 0.0;
  ScoreKind score_kind = ScoreKind::ClapsMahalanobisLie;
  double chi2_q = 0.0;
  bool vacuous = false;
  std::string predictor_fingerprint;
  std::string dataset_fingerprint;

  /// Threshold sqrt(chi2) with zeta = 1: the plain (1 - alpha) Gaussian region.
  static CalibrationResult uncalibrated(double alpha, ScoreKind kind);
};

/// Dimension of the exponential coordinates / generalized coordinates.
inline constexpr int kRegionDim = 3;

CalibrationResult calibrate_scores(std::span<const double> scores, double alpha, ScoreKind kind);

CalibrationResult calibrate(const Predictor& predictor, const std::vector<TransitionRecord>& records,
                            double alpha, ScoreKind kind);

/// score(query) <= q_hat. Closed at the threshold.
bool contains(const Pose& query, const GaussianPrediction& pred, const CalibrationResult& cal);

/// The same test written as r(g; mean, zeta * cov)^2 <= chi2, for Mahalanobis kinds.
bool contains_scaled(const Pose& query, const GaussianPrediction& pred,
                     const CalibrationResult& cal);

std::vector<bool> contains_batch(std::span<const Pose> queries, const GaussianPrediction& pred,
                                 const CalibrationResult& cal);

/// Stable 64-bit FNV-1a fingerprint of a byte string, rendered as hex.
std::string fingerprint(std::string_view bytes);

}  // namespace claps
