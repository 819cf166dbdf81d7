#include "claps/experiment.hpp"
#include "claps/io.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

using namespace claps;

namespace {

ExperimentConfig tiny_config() {
  ExperimentConfig c = ExperimentConfig::desk();
  c.validation.speed.count = c.validation.yaw_rate.count = 2;
  c.validation.accel.count = c.validation.yaw_accel.count = 1;
  c.particles = 300;
  c.mesh_samples = 200;
  return c;
}

const MethodTrial& find(const TrialResult& t, MethodId id) {
  for (const auto& m : t.methods) {
    if (m.id == id) return m;
  }
  throw std::out_of_range("method not evaluated");
}

bool same(double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); }

}  // namespace

TEST(Methods, NamesRoundTrip) {
  ASSERT_EQ(all_methods().size(), 8u);
  for (MethodId id : all_methods()) EXPECT_EQ(method_id_from_string(to_string(id)), id);
  EXPECT_EQ(to_string(MethodId::Claps), "CLAPS");
  EXPECT_EQ(parse_method_list("CLAPS,SS-EKF+CP"),
            (std::vector<MethodId>{MethodId::Claps, MethodId::SsEkfCp}));
  EXPECT_THROW(parse_method_list("CLAPS,bogus"), std::invalid_argument);
  EXPECT_EQ(score_kind_of(MethodId::Claps), ScoreKind::ClapsMahalanobisLie);
  EXPECT_EQ(score_kind_of(MethodId::SsPpCp), ScoreKind::L2SS);
  EXPECT_TRUE(is_conformal(MethodId::LiePpCp));
  EXPECT_FALSE(is_conformal(MethodId::InEkf2M));
  EXPECT_TRUE(uses_ss_predictor(MethodId::SsPpCp));
  EXPECT_FALSE(uses_ss_predictor(MethodId::LiePpCp));
}

TEST(Config, JsonRoundTrip) {
  ExperimentConfig c = ExperimentConfig::full();
  c.alpha = 0.2;
  c.methods = {MethodId::Claps, MethodId::InEkf};
  c.calibration.sampling = DatasetSpec::Sampling::Uniform;
  c.calibration.count = 123;
  c.world.seed = 7;
  const std::string text = config_to_json(c);
  const ExperimentConfig back = config_from_json(text);
  EXPECT_EQ(config_to_json(back), text);
  EXPECT_EQ(back.methods, c.methods);
  EXPECT_EQ(back.world.seed, 7u);
  EXPECT_EQ(back.calibration.size(), 123u);
}

TEST(Config, PartialFileKeepsBaseAndRejectsBadSchema) {
  const ExperimentConfig c = config_from_json(R"({"schema":"claps.config.v1","alpha":0.05})");
  EXPECT_EQ(c.alpha, 0.05);
  EXPECT_EQ(c.particles, ExperimentConfig::desk().particles);
  EXPECT_THROW(config_from_json(R"({"schema":"claps.config.v0"})"), SchemaError);
  EXPECT_ANY_THROW(config_from_json(R"({"schema":"claps.config.v1","alpha":1.5})"));
}

TEST(Dataset, JsonLinesRoundTripIsBitExact) {
  GridSpec g;
  g.speed.count = g.yaw_rate.count = g.accel.count = g.yaw_accel.count = 2;
  g.repetitions = 3;
  const auto records = gen_grid_dataset(g, WorldParams{});
  std::stringstream ss;
  write_dataset(ss, records, WorldParams{}, "dataset");
  const Dataset back = read_dataset(ss);
  EXPECT_EQ(back.header.schema, kDatasetSchema);
  EXPECT_EQ(back.header.master_seed, 42u);
  EXPECT_EQ(dataset_fingerprint(back.records), dataset_fingerprint(records));
  ASSERT_EQ(back.records.size(), records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    EXPECT_EQ(back.records[i].s1.pose.x(), records[i].s1.pose.x());
    EXPECT_EQ(back.records[i].s1.twist, records[i].s1.twist);
    EXPECT_EQ(back.records[i].seed, records[i].seed);
  }
  std::stringstream bad(R"({"schema":"claps.dataset.v9"})");
  EXPECT_THROW(read_dataset(bad), SchemaError);
}

TEST(Calibration, JsonRoundTripIncludingVacuous) {
  const ExperimentConfig c = tiny_config();
  const PredictorSuite suite(c);
  const auto cal = make_dataset(c.calibration, c.world, "calibration");
  auto fitted = fit_methods(all_methods(), suite, cal, c.alpha);
  // alpha this small needs more points than the set has.
  fitted.push_back(fit_method(MethodId::Claps, suite, cal, 1e-3));
  ASSERT_TRUE(fitted.back().cal.vacuous);
  const auto back = calibrations_from_json(calibrations_to_json(fitted));
  ASSERT_EQ(back.size(), fitted.size());
  for (std::size_t i = 0; i < fitted.size(); ++i) {
    EXPECT_EQ(back[i].id, fitted[i].id);
    EXPECT_EQ(back[i].cal.vacuous, fitted[i].cal.vacuous);
    EXPECT_TRUE(same(back[i].cal.q_hat, fitted[i].cal.q_hat));
    EXPECT_EQ(back[i].cal.predictor_fingerprint, fitted[i].cal.predictor_fingerprint);
    EXPECT_EQ(back[i].fixed_cov.has_value(), fitted[i].fixed_cov.has_value());
    EXPECT_EQ(back[i].bias, fitted[i].bias);
  }
  EXPECT_TRUE(std::isinf(back.back().cal.q_hat));
}

TEST(Fit, DataFitBaselinesCarryFixedCovariance) {
  const ExperimentConfig c = tiny_config();
  const PredictorSuite suite(c);
  const auto cal = make_dataset(c.calibration, c.world, "calibration");
  EXPECT_TRUE(fit_method(MethodId::InEkf2M, suite, cal, 0.1).fixed_cov.has_value());
  const FittedMethod mle = fit_method(MethodId::InEkfMle, suite, cal, 0.1);
  EXPECT_TRUE(mle.fixed_cov.has_value());
  EXPECT_GT(mle.bias.norm(), 0.0);
  const FittedMethod ekf = fit_method(MethodId::SsEkf, suite, cal, 0.1);
  EXPECT_EQ(ekf.cal.zeta, 1.0);
  EXPECT_GT(fit_method(MethodId::Claps, suite, cal, 0.1).cal.zeta, 1.0);
}

TEST(Evaluate, ThreadCountDoesNotChangeResults) {
  ExperimentConfig c = tiny_config();
  const PredictorSuite suite(c);
  const auto fitted = fit_methods(c.methods, suite, make_dataset(c.calibration, c.world, "calibration"), c.alpha);
  c.jobs = 1;
  const auto a = evaluate_trials(fitted, suite, c);
  c.jobs = 3;
  const auto b = evaluate_trials(fitted, suite, c);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t t = 0; t < a.size(); ++t) {
    EXPECT_EQ(a[t].trial, t);
    for (std::size_t m = 0; m < a[t].methods.size(); ++m) {
      EXPECT_EQ(a[t].methods[m].coverage, b[t].methods[m].coverage);
      EXPECT_EQ(a[t].methods[m].volume, b[t].methods[m].volume);
      EXPECT_TRUE(same(a[t].methods[m].iou, b[t].methods[m].iou));
    }
  }
}

TEST(Evaluate, MethodsAreIsolated) {
  ExperimentConfig all = tiny_config();
  ExperimentConfig one = all;
  one.methods = {MethodId::Claps};
  const MetricsReport ra = run_experiment(all);
  const MetricsReport rb = run_experiment(one);
  ASSERT_EQ(rb.methods.size(), 1u);
  for (std::size_t t = 0; t < ra.trials.size(); ++t) {
    const MethodTrial& x = find(ra.trials[t], MethodId::Claps);
    const MethodTrial& y = find(rb.trials[t], MethodId::Claps);
    EXPECT_EQ(x.coverage, y.coverage);
    EXPECT_EQ(x.volume, y.volume);
    EXPECT_EQ(x.iou, y.iou);
  }
  one.methods = {MethodId::SsEkfCp};
  const MetricsReport rc = run_experiment(one);
  EXPECT_TRUE(std::isnan(rc.methods[0].volume_ratio));
}

TEST(Evaluate, ZeroNoiseMatchedWorldCollapsesLieRegions) {
  ExperimentConfig c = tiny_config();
  c.world = WorldParams::matched(c.model_inertia);
  c.methods = {MethodId::Claps, MethodId::LiePpCp};
  const MetricsReport r = run_experiment(c);
  for (const MethodSummary& m : r.methods) {
    EXPECT_EQ(m.q_hat, 0.0) << to_string(m.id);
    EXPECT_EQ(m.coverage_transition, 1.0) << to_string(m.id);
    EXPECT_EQ(m.coverage_trial_mean, 1.0) << to_string(m.id);
    EXPECT_LT(m.mean_volume, 1e-12) << to_string(m.id);
  }
}

TEST(Evaluate, DeskRunIsFastAndWellFormed) {
  const auto start = std::chrono::steady_clock::now();
  const MetricsReport r = run_experiment(ExperimentConfig::desk());
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT_LT(seconds, 60.0);
  EXPECT_EQ(r.methods.size(), 8u);
  EXPECT_EQ(r.trials.size(), 16u);
  for (const MethodSummary& m : r.methods) {
    EXPECT_GE(m.coverage_trial_mean, 0.0);
    EXPECT_LE(m.coverage_trial_mean, 1.0);
    EXPECT_GT(m.mean_volume, 0.0);
  }
  std::ostringstream metrics, trials;
  write_metrics_csv(metrics, r);
  write_trials_csv(trials, r);
  const std::string m = metrics.str(), t = trials.str();
  EXPECT_EQ(std::count(m.begin(), m.end(), '\n'), 9);
  EXPECT_EQ(std::count(t.begin(), t.end(), '\n'), 1 + 16 * 8);
}

TEST(Bench, OneRowPerSupportedPairAndStep) {
  GridSpec g;
  g.speed.count = g.yaw_rate.count = g.accel.count = g.yaw_accel.count = 1;
  const std::vector<double> dts{0.05, 0.1};
  const auto rows = integrate_bench(g, dts, 0.2, default_model_inertia(), 10, 1e-4);
  EXPECT_EQ(rows.size(), 10u * dts.size());
  for (const BenchRow& row : rows) {
    EXPECT_GE(row.rmse, 0.0);
    EXPECT_GT(row.ns_per_step, 0.0);
  }
  EXPECT_NEAR(loglog_slope({1.0, 10.0, 100.0}, {2.0, 200.0, 20000.0}), 2.0, 1e-12);
}
