#include "claps/conformal.hpp"

#include "oracles.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <random>

using namespace claps;

namespace {

constexpr double kPi = std::numbers::pi;

GaussianPrediction prediction(const Pose& mean, const Eigen::Matrix3d& cov,
                              Frame frame = Frame::ExpCoordsLeft) {
  GaussianPrediction p;
  p.mean = mean;
  p.cov = cov;
  p.frame = frame;
  return p;
}

double boost_chi2_quantile(double alpha, int dof) {
  const boost::math::chi_squared dist(dof);
  return boost::math::quantile(boost::math::complement(dist, alpha));
}

}  // namespace

TEST(Score, Examples) {
  const Pose mean(0.4, -0.2, 1.1);
  const GaussianPrediction p = prediction(mean, Eigen::Matrix3d::Identity());
  for (ScoreKind k : {ScoreKind::ClapsMahalanobisLie, ScoreKind::MahalanobisSS, ScoreKind::L2SS,
                      ScoreKind::L2Lie}) {
    EXPECT_EQ(score(k, mean, p), 0.0);
  }
  EXPECT_NEAR(score(ScoreKind::ClapsMahalanobisLie, mean * exp(AlgebraVector(3, 4, 0)), p), 5.0, 1e-12);
  const GaussianPrediction scaled = prediction(mean, Eigen::Vector3d(4, 1, 1).asDiagonal());
  EXPECT_NEAR(score(ScoreKind::ClapsMahalanobisLie, mean * exp(AlgebraVector(2, 0, 0)), scaled), 1.0, 1e-12);
  EXPECT_NEAR(score(ScoreKind::L2Lie, mean * exp(AlgebraVector(2, 0, 0)), scaled), 2.0, 1e-12);
}

TEST(Score, StateSpaceWrapsHeading) {
  const GaussianPrediction p = prediction(Pose(0, 0, -kPi + 0.1), Eigen::Matrix3d::Identity(), Frame::Generalized);
  const Pose truth(0, 0, kPi - 0.1);
  EXPECT_NEAR(score(ScoreKind::L2SS, truth, p), 0.2, 1e-12);
  EXPECT_NEAR(score_residual(ScoreKind::L2SS, truth, p.mean)(2), -0.2, 1e-12);
  const Eigen::Vector3d half = score_residual(ScoreKind::L2SS, Pose(0, 0, kPi / 2), Pose(0, 0, -kPi / 2));
  EXPECT_NEAR(half(2), kPi, 1e-15);  // (-pi, pi] convention
}

TEST(Score, LieKindsRejectHalfTurn) {
  const GaussianPrediction p = prediction(Pose(), Eigen::Matrix3d::Identity());
  EXPECT_THROW(score(ScoreKind::ClapsMahalanobisLie, Pose(0, 0, kPi), p), DomainError);
  EXPECT_THROW(score(ScoreKind::L2Lie, Pose(1, 0, -kPi), p), DomainError);
}

TEST(SplitQuantile, Examples) {
  std::vector<double> s;
  for (int i = 1; i <= 19; ++i) s.push_back(i);
  EXPECT_EQ(split_quantile(s, 0.1), 18.0);
  EXPECT_TRUE(std::isinf(split_quantile(std::vector<double>{1, 2, 3, 4, 5}, 0.1)));
  EXPECT_EQ(split_quantile(std::vector<double>(30, 2.5), 0.1), 2.5);
  EXPECT_THROW(split_quantile(std::vector<double>{}, 0.1), std::invalid_argument);
  EXPECT_THROW(split_quantile(s, 0.0), std::invalid_argument);
  EXPECT_THROW(split_quantile(s, 1.0), std::invalid_argument);
}

TEST(SplitQuantile, MatchesSortedOrderStatistic) {
  std::mt19937_64 rng(1);
  std::exponential_distribution<double> e;
  for (int n : {9, 10, 37, 500}) {
    std::vector<double> s(n);
    for (double& v : s) v = e(rng);
    std::vector<double> sorted = s;
    std::sort(sorted.begin(), sorted.end());
    for (double alpha : {0.05, 0.1, 0.2, 0.5}) {
      const long k = static_cast<long>(std::ceil((1 - alpha) * (n + 1) - 1e-9));
      const double expected = k > n ? INFINITY : sorted[k - 1];
      EXPECT_EQ(split_quantile(s, alpha), expected) << n << " " << alpha;
    }
  }
}

TEST(Chi2, ClosedFormAndOracle) {
  EXPECT_NEAR(chi2_quantile(0.5, 2), 2 * std::log(2.0), 1e-10);
  EXPECT_NEAR(chi2_quantile(0.1, 3), boost_chi2_quantile(0.1, 3), 1e-9);
  EXPECT_NEAR(chi2_quantile(0.1, 3), 6.2514, 1e-4);
  for (int d = 1; d <= 6; ++d) {
    for (double alpha : {0.01, 0.05, 0.1, 0.3, 0.9}) {
      const double x = chi2_quantile(alpha, d);
      EXPECT_NEAR(x, boost_chi2_quantile(alpha, d), 1e-8 * x);
      EXPECT_LT(std::abs(chi2_cdf(x, d) - (1 - alpha)), 1e-10);
    }
  }
}

TEST(Chi2, IncompleteGammaMatchesBoost) {
  for (double a : {0.5, 1.0, 1.5, 3.0, 10.0}) {
    for (double x : {1e-3, 0.1, 1.0, 2.5, 7.0, 30.0}) {
      EXPECT_NEAR(regularized_gamma_p(a, x), boost::math::gamma_p(a, x), 1e-13);
    }
  }
}

TEST(Chi2, Monotone) {
  double prev = INFINITY;
  for (double alpha = 0.01; alpha < 0.99; alpha += 0.05) {
    const double q = chi2_quantile(alpha, 3);
    EXPECT_LT(q, prev);
    prev = q;
  }
  for (int d = 1; d < 8; ++d) EXPECT_LT(chi2_quantile(0.1, d), chi2_quantile(0.1, d + 1));
}

TEST(Calibrate, ZeroScoresGiveDegenerateRegion) {
  const CalibrationResult r = calibrate_scores(std::vector<double>(50, 0.0), 0.1, ScoreKind::ClapsMahalanobisLie);
  EXPECT_EQ(r.q_hat, 0.0);
  EXPECT_EQ(r.zeta, 0.0);
  EXPECT_FALSE(r.vacuous);
  const GaussianPrediction p = prediction(Pose(1, 2, 0.3), Eigen::Matrix3d::Identity());
  EXPECT_TRUE(contains(p.mean, p, r));
  EXPECT_TRUE(contains_scaled(p.mean, p, r));
  EXPECT_FALSE(contains(p.mean * exp(AlgebraVector(1e-9, 0, 0)), p, r));
}

TEST(Calibrate, ZetaFromPinnedQuantile) {
  std::vector<double> s(19, 2.5);
  const CalibrationResult r = calibrate_scores(s, 0.1, ScoreKind::ClapsMahalanobisLie);
  EXPECT_EQ(r.q_hat, 2.5);
  EXPECT_NEAR(r.zeta, 6.25 / boost_chi2_quantile(0.1, 3), 1e-12);
  EXPECT_NEAR(r.zeta, 0.99978, 1e-5);
  EXPECT_EQ(r.n_cal, 19u);
}

TEST(Calibrate, SmallSetIsVacuous) {
  const CalibrationResult r = calibrate_scores(std::vector<double>{1, 2, 3, 4, 5}, 0.1, ScoreKind::L2Lie);
  EXPECT_TRUE(r.vacuous);
  const GaussianPrediction p = prediction(Pose(), Eigen::Matrix3d::Identity());
  EXPECT_TRUE(contains(Pose(100, 0, 3), p, r));
  EXPECT_THROW(calibrate([](const LieState&, const ControlInput&) { return GaussianPrediction{}; },
                         {}, 0.1, ScoreKind::L2Lie),
               std::invalid_argument);
}

TEST(Calibrate, PermutationInvariantAndNested) {
  std::mt19937_64 rng(2);
  std::gamma_distribution<double> g(1.5, 1.0);
  std::vector<double> s(301);
  for (double& v : s) v = g(rng);
  const double q = calibrate_scores(s, 0.1, ScoreKind::ClapsMahalanobisLie).q_hat;
  std::shuffle(s.begin(), s.end(), rng);
  EXPECT_EQ(calibrate_scores(s, 0.1, ScoreKind::ClapsMahalanobisLie).q_hat, q);
  EXPECT_GE(calibrate_scores(s, 0.05, ScoreKind::ClapsMahalanobisLie).q_hat, q);
  EXPECT_LE(calibrate_scores(s, 0.2, ScoreKind::ClapsMahalanobisLie).q_hat, q);
}

TEST(Calibrate, HardwareScaleRunsQuickly) {
  const LieModel model = LieModel::unicycle(default_model_inertia());
  GridSpec g;
  g.repetitions = 3;
  auto records = gen_grid_dataset(g, WorldParams{});
  records.resize(237);
  const Predictor pred = [&](const LieState& s, const ControlInput& u) {
    return inekf_predict(s, u, model, {0.25 * WorldParams{}.q_cont});
  };
  const auto t0 = std::chrono::steady_clock::now();
  const CalibrationResult r = calibrate(pred, records, 0.1, ScoreKind::ClapsMahalanobisLie);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_LT(secs, 1.0);
  EXPECT_EQ(r.n_cal, 237u);
  EXPECT_GT(r.zeta, 0.0);
}

TEST(Contains, MeanAndBoundaryAreInside) {
  const GaussianPrediction p = prediction(Pose(0.3, 0.1, -0.4), Eigen::Vector3d(0.01, 0.002, 0.05).asDiagonal());
  CalibrationResult cal = calibrate_scores(std::vector<double>(40, 1.7), 0.1, ScoreKind::ClapsMahalanobisLie);
  EXPECT_TRUE(contains(p.mean, p, cal));
  // Two standard deviations along x scores 2 up to roundoff; the region is closed.
  const Pose edge = p.mean * exp(AlgebraVector(2.0 * 0.1, 0, 0));
  const double s = score(ScoreKind::ClapsMahalanobisLie, edge, p);
  EXPECT_NEAR(s, 2.0, 1e-12);
  cal.q_hat = s;
  EXPECT_TRUE(contains(edge, p, cal));
  cal.q_hat = std::nextafter(s, 0.0);
  EXPECT_FALSE(contains(edge, p, cal));
}

TEST(Contains, ScaledFormAgreesOnRandomQueries) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n01;
  int disagreements = 0, inside = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::Matrix3d cov = oracle::random_spd(rng, 0.01);
    const GaussianPrediction p = prediction(Pose(n01(rng), n01(rng), n01(rng)), cov);
    std::vector<double> s(99);
    for (double& v : s) v = std::abs(3 * n01(rng));
    const CalibrationResult cal = calibrate_scores(s, 0.1, ScoreKind::ClapsMahalanobisLie);
    for (int i = 0; i < 10000; ++i) {
      AlgebraVector e = 0.5 * Eigen::Vector3d(n01(rng), n01(rng), n01(rng));
      e(2) = std::clamp(e(2), -3.0, 3.0);
      const Pose q = p.mean * exp(e);
      const bool a = contains(q, p, cal);
      inside += a;
      disagreements += a != contains_scaled(q, p, cal);
    }
  }
  EXPECT_EQ(disagreements, 0);
  EXPECT_GT(inside, 1000);
  EXPECT_LT(inside, 99000);
}

TEST(Contains, BatchMatchesSingle) {
  const GaussianPrediction p = prediction(Pose(1, 1, 1), Eigen::Vector3d(0.02, 0.01, 0.1).asDiagonal());
  const CalibrationResult cal = calibrate_scores(std::vector<double>(20, 1.5), 0.1, ScoreKind::ClapsMahalanobisLie);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n01;
  std::vector<Pose> qs;
  for (int i = 0; i < 500; ++i) qs.push_back(p.mean * exp(0.2 * Eigen::Vector3d(n01(rng), n01(rng), n01(rng))));
  const auto batch = contains_batch(qs, p, cal);
  for (std::size_t i = 0; i < qs.size(); ++i) EXPECT_EQ(batch[i], contains(qs[i], p, cal));
}

TEST(Score, ScaleEquivarianceAndVerdictInvariance) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n01;
  const Eigen::Matrix3d cov = oracle::random_spd(rng, 0.01);
  const GaussianPrediction p = prediction(Pose(0.2, 0.3, 0.4), cov);
  const GaussianPrediction p4 = prediction(p.mean, 4.0 * cov);
  std::vector<Pose> cal_pts, queries;
  for (int i = 0; i < 200; ++i) cal_pts.push_back(p.mean * exp(0.2 * Eigen::Vector3d(n01(rng), n01(rng), n01(rng))));
  for (int i = 0; i < 2000; ++i) queries.push_back(p.mean * exp(0.2 * Eigen::Vector3d(n01(rng), n01(rng), n01(rng))));
  std::vector<double> s1, s4;
  for (const Pose& g : cal_pts) {
    s1.push_back(score(ScoreKind::ClapsMahalanobisLie, g, p));
    s4.push_back(score(ScoreKind::ClapsMahalanobisLie, g, p4));
    EXPECT_NEAR(s4.back(), s1.back() / 2.0, 1e-12 * (1 + s1.back()));
  }
  const CalibrationResult c1 = calibrate_scores(s1, 0.1, ScoreKind::ClapsMahalanobisLie);
  const CalibrationResult c4 = calibrate_scores(s4, 0.1, ScoreKind::ClapsMahalanobisLie);
  for (const Pose& q : queries) EXPECT_EQ(contains(q, p, c1), contains(q, p4, c4));
}

TEST(Calibrate, CoverageOnExchangeableSyntheticData) {
  // Scores of fresh draws from the calibration distribution fall under q_hat
  // with probability >= 1 - alpha (up to the binomial band).
  std::mt19937_64 rng(6);
  std::lognormal_distribution<double> d(0.0, 1.0);
  int covered = 0, total = 0;
  for (int rep = 0; rep < 40; ++rep) {
    std::vector<double> s(500);
    for (double& v : s) v = d(rng);
    const double q = split_quantile(s, 0.1);
    for (int i = 0; i < 500; ++i, ++total) covered += d(rng) <= q;
  }
  const double cov = static_cast<double>(covered) / total;
  EXPECT_GT(cov, 0.89);
  EXPECT_LT(cov, 0.915);
}

TEST(Fingerprint, StableHex) {
  EXPECT_EQ(fingerprint(""), "cbf29ce484222325");
  EXPECT_EQ(fingerprint("a"), "af63dc4c8601ec8c");
  EXPECT_NE(fingerprint("ab"), fingerprint("ba"));
}

TEST(ScoreKind, Names) {
  for (ScoreKind k : {ScoreKind::ClapsMahalanobisLie, ScoreKind::MahalanobisSS, ScoreKind::L2SS, ScoreKind::L2Lie}) {
    EXPECT_EQ(score_kind_from_string(to_string(k)), k);
  }
  EXPECT_THROW(score_kind_from_string("L1"), std::invalid_argument);
  const CalibrationResult u = CalibrationResult::uncalibrated(0.1, ScoreKind::MahalanobisSS);
  EXPECT_NEAR(u.q_hat * u.q_hat, u.chi2_q, 1e-12);
  EXPECT_EQ(u.zeta, 1.0);
}
