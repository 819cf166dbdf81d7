#include "claps/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace claps {

std::string_view to_string(ScoreKind kind) {
  switch (kind) {
    case ScoreKind::ClapsMahalanobisLie: return "ClapsMahalanobisLie";
    case ScoreKind::MahalanobisSS: return "MahalanobisSS";
    case ScoreKind::L2SS: return "L2SS";
    case ScoreKind::L2Lie: return "L2Lie";
  }
  return "?";
}

ScoreKind score_kind_from_string(std::string_view name) {
  for (ScoreKind k : {ScoreKind::ClapsMahalanobisLie, ScoreKind::MahalanobisSS, ScoreKind::L2SS,
                      ScoreKind::L2Lie}) {
    if (to_string(k) == name) return k;
  }
  throw std::invalid_argument("unknown score kind: " + std::string(name));
}

bool is_lie(ScoreKind kind) {
  return kind == ScoreKind::ClapsMahalanobisLie || kind == ScoreKind::L2Lie;
}

bool is_mahalanobis(ScoreKind kind) {
  return kind == ScoreKind::ClapsMahalanobisLie || kind == ScoreKind::MahalanobisSS;
}

Eigen::Vector3d score_residual(ScoreKind kind, const Pose& truth, const Pose& mean) {
  if (is_lie(kind)) return group_error(mean, truth);
  return {truth.x() - mean.x(), truth.y() - mean.y(),
          wrap_angle_upper(truth.theta() - mean.theta())};
}

ScoreEvaluator::ScoreEvaluator(ScoreKind kind, const GaussianPrediction& pred)
    : kind_(kind), mean_(pred.mean) {
  if (is_mahalanobis(kind)) {
    llt_.compute(pred.cov);
    if (llt_.info() != Eigen::Success) {
      throw std::invalid_argument("score: covariance is not positive definite");
    }
  }
}

double ScoreEvaluator::of_residual(const Eigen::Vector3d& residual) const {
  if (!is_mahalanobis(kind_)) return residual.norm();
  const Eigen::Vector3d w = llt_.matrixL().solve(residual);
  return w.norm();
}

double ScoreEvaluator::operator()(const Pose& truth) const {
  return of_residual(score_residual(kind_, truth, mean_));
}

double score(ScoreKind kind, const Pose& truth, const GaussianPrediction& pred) {
  return ScoreEvaluator(kind, pred)(truth);
}

double split_quantile(std::span<const double> scores, double alpha) {
  if (scores.empty()) throw std::invalid_argument("split_quantile: no scores");
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("split_quantile: alpha must lie in (0, 1)");
  }
  const std::size_t n = scores.size();
  // The small offset keeps exact integers such as 0.9 * 20 from rounding up.
  const double rank = std::ceil((1.0 - alpha) * static_cast<double>(n + 1) - 1e-9);
  const auto k = static_cast<std::size_t>(std::max(rank, 1.0));
  if (k > n) return std::numeric_limits<double>::infinity();
  std::vector<double> sorted(scores.begin(), scores.end());
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k - 1), sorted.end());
  return sorted[k - 1];
}

double regularized_gamma_p(double a, double x) {
  if (!(a > 0.0)) throw std::invalid_argument("regularized_gamma_p: a must be positive");
  if (x <= 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  const double log_prefix = a * std::log(x) - x - std::lgamma(a);
  if (x < a + 1.0) {
    // Power series.
    double term = 1.0 / a;
    double sum = term;
    for (int n = 1; n < 10000; ++n) {
      term *= x / (a + n);
      sum += term;
      if (std::abs(term) < std::abs(sum) * 1e-17) break;
    }
    return std::min(1.0, sum * std::exp(log_prefix));
  }
  // Continued fraction for Q(a, x), modified Lentz.
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 10000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-17) break;
  }
  return std::max(0.0, 1.0 - std::exp(log_prefix) * h);
}

double chi2_cdf(double x, int dof) {
  if (dof < 1) throw std::invalid_argument("chi2_cdf: dof must be >= 1");
  return regularized_gamma_p(0.5 * dof, 0.5 * x);
}

double chi2_quantile(double alpha, int dof) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("chi2_quantile: alpha must lie in (0, 1)");
  }
  if (dof < 1) throw std::invalid_argument("chi2_quantile: dof must be >= 1");
  const double target = 1.0 - alpha;
  double lo = 0.0;
  double hi = std::max(1.0, static_cast<double>(dof));
  while (chi2_cdf(hi, dof) < target) hi *= 2.0;
  for (int i = 0; i < 400 && hi - lo > 1e-15 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (chi2_cdf(mid, dof) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

CalibrationResult CalibrationResult::uncalibrated(double alpha, ScoreKind kind) {
  CalibrationResult r;
  r.alpha = alpha;
  r.score_kind = kind;
  r.chi2_q = chi2_quantile(alpha, kRegionDim);
  r.q_hat = std::sqrt(r.chi2_q);
  r.zeta = 1.0;
  return r;
}

CalibrationResult calibrate_scores(std::span<const double> scores, double alpha, ScoreKind kind) {
  CalibrationResult r;
  r.alpha = alpha;
  r.n_cal = scores.size();
  r.score_kind = kind;
  r.chi2_q = chi2_quantile(alpha, kRegionDim);
  r.q_hat = split_quantile(scores, alpha);
  r.vacuous = std::isinf(r.q_hat);
  r.zeta = r.vacuous ? std::numeric_limits<double>::infinity() : r.q_hat * r.q_hat / r.chi2_q;
  return r;
}

CalibrationResult calibrate(const Predictor& predictor, const std::vector<TransitionRecord>& records,
                            double alpha, ScoreKind kind) {
  if (records.empty()) throw std::invalid_argument("calibrate: empty calibration set");
  std::vector<double> scores;
  scores.reserve(records.size());
  for (const TransitionRecord& r : records) {
    scores.push_back(score(kind, r.s1.pose, predictor(r.s0, r.u_des)));
  }
  return calibrate_scores(scores, alpha, kind);
}

bool contains(const Pose& query, const GaussianPrediction& pred, const CalibrationResult& cal) {
  if (cal.vacuous) return true;
  return score(cal.score_kind, query, pred) <= cal.q_hat;
}

bool contains_scaled(const Pose& query, const GaussianPrediction& pred,
                     const CalibrationResult& cal) {
  if (!is_mahalanobis(cal.score_kind)) {
    throw std::invalid_argument("contains_scaled: only defined for Mahalanobis scores");
  }
  if (cal.vacuous) return true;
  const Eigen::Vector3d e = score_residual(cal.score_kind, query, pred.mean);
  if (cal.zeta == 0.0) return e.isZero(0.0);
  const Eigen::Matrix3d scaled = cal.zeta * pred.cov;
  const double r2 = e.dot(scaled.llt().solve(e));
  return r2 <= cal.chi2_q;
}

std::vector<bool> contains_batch(std::span<const Pose> queries, const GaussianPrediction& pred,
                                 const CalibrationResult& cal) {
  std::vector<bool> out(queries.size(), true);
  if (cal.vacuous) return out;
  const ScoreEvaluator eval(cal.score_kind, pred);
  for (std::size_t i = 0; i < queries.size(); ++i) out[i] = eval(queries[i]) <= cal.q_hat;
  return out;
}

std::string fingerprint(std::string_view bytes) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace claps
