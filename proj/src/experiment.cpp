#include "claps/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <mutex>
#include <set>
#include <stdexcept>
#include <thread>

namespace claps {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

struct MethodInfo {
  MethodId id;
  std::string_view name;
  ScoreKind kind;
  bool conformal;
  bool ss;
};

constexpr MethodInfo kMethods[] = {
    {MethodId::SsEkf, "SS-EKF", ScoreKind::MahalanobisSS, false, true},
    {MethodId::InEkf, "InEKF", ScoreKind::ClapsMahalanobisLie, false, false},
    {MethodId::InEkf2M, "InEKF+2M", ScoreKind::ClapsMahalanobisLie, false, false},
    {MethodId::InEkfMle, "InEKF+MLE", ScoreKind::ClapsMahalanobisLie, false, false},
    {MethodId::SsPpCp, "SS-PP+CP", ScoreKind::L2SS, true, true},
    {MethodId::LiePpCp, "Lie-PP+CP", ScoreKind::L2Lie, true, false},
    {MethodId::SsEkfCp, "SS-EKF+CP", ScoreKind::MahalanobisSS, true, true},
    {MethodId::Claps, "CLAPS", ScoreKind::ClapsMahalanobisLie, true, false},
};

const MethodInfo& info(MethodId id) {
  for (const MethodInfo& m : kMethods) {
    if (m.id == id) return m;
  }
  throw std::invalid_argument("unknown method id");
}

void append_number(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g,", v);
  out += buf;
}

template <class Derived>
void append_matrix(std::string& out, const Eigen::MatrixBase<Derived>& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) append_number(out, m(i, j));
  }
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

std::string_view to_string(MethodId id) { return info(id).name; }

MethodId method_id_from_string(std::string_view name) {
  for (const MethodInfo& m : kMethods) {
    if (m.name == name) return m.id;
  }
  throw std::invalid_argument("unknown method: " + std::string(name));
}

const std::vector<MethodId>& all_methods() {
  static const std::vector<MethodId> ids = [] {
    std::vector<MethodId> out;
    for (const MethodInfo& m : kMethods) out.push_back(m.id);
    return out;
  }();
  return ids;
}

std::vector<MethodId> parse_method_list(std::string_view list) {
  std::vector<MethodId> out;
  std::size_t start = 0;
  while (start <= list.size()) {
    const std::size_t end = std::min(list.find(',', start), list.size());
    std::string_view item = list.substr(start, end - start);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    if (!item.empty()) {
      const MethodId id = method_id_from_string(item);
      if (std::find(out.begin(), out.end(), id) == out.end()) out.push_back(id);
    }
    start = end + 1;
  }
  if (out.empty()) throw std::invalid_argument("method list is empty");
  return out;
}

ScoreKind score_kind_of(MethodId id) { return info(id).kind; }
bool is_conformal(MethodId id) { return info(id).conformal; }
bool uses_ss_predictor(MethodId id) { return info(id).ss; }

std::size_t DatasetSpec::size() const {
  return sampling == Sampling::Grid ? grid.cases() * static_cast<std::size_t>(grid.repetitions)
                                    : count;
}

std::string_view to_string(DatasetSpec::Sampling s) {
  return s == DatasetSpec::Sampling::Grid ? "grid" : "uniform";
}

DatasetSpec::Sampling sampling_from_string(std::string_view name) {
  if (name == "grid") return DatasetSpec::Sampling::Grid;
  if (name == "uniform") return DatasetSpec::Sampling::Uniform;
  throw std::invalid_argument("unknown sampling mode: " + std::string(name));
}

ExperimentConfig ExperimentConfig::desk() {
  ExperimentConfig c;
  GridSpec g;
  g.speed = {0.1, 0.5, 2};
  g.yaw_rate = {0.0, 0.5, 2};
  g.accel = {0.0, 0.5, 2};
  g.yaw_accel = {0.0, 2.0, 2};
  g.repetitions = 10;
  c.calibration.grid = g;
  c.test.grid = g;
  c.test.grid.repetitions = 50;
  c.validation = g;
  c.validation.repetitions = 1;
  c.particles = 1000;
  c.mesh_samples = 500;
  return c;
}

ExperimentConfig ExperimentConfig::full() {
  ExperimentConfig c;
  c.calibration.grid = GridSpec{};  // 3^4 points x 500 repetitions
  c.test.grid = GridSpec{};
  c.test.grid.repetitions = 50;
  GridSpec v;
  v.speed = {0.1, 0.5, 5};
  v.yaw_rate = {0.0, 0.5, 5};
  v.accel = {0.0, 0.5, 5};
  v.yaw_accel = {0.0, 2.0, 5};
  v.repetitions = 1;
  c.validation = v;
  c.particles = 10000;
  c.mesh_samples = 5000;
  return c;
}

NoiseConfig ExperimentConfig::predictor_noise() const {
  return {predictor_noise_scale * world.q_cont};
}

Horizon ExperimentConfig::horizon() const { return {world.horizon, world.substeps()}; }

void ExperimentConfig::validate() const {
  world.validate();
  calibration.grid.validate();
  test.grid.validate();
  validation.validate();
  if (calibration.size() == 0) throw std::invalid_argument("config: calibration set is empty");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("config: alpha must lie in (0, 1)");
  if (!(predictor_noise_scale >= 0.0)) {
    throw std::invalid_argument("config: predictor_noise_scale must be >= 0");
  }
  if (methods.empty()) throw std::invalid_argument("config: no methods selected");
  if (std::set<MethodId>(methods.begin(), methods.end()).size() != methods.size()) {
    throw std::invalid_argument("config: duplicate methods");
  }
  if (particles < 1) throw std::invalid_argument("config: particles must be >= 1");
  if (mesh_samples < 4) throw std::invalid_argument("config: mesh_samples must be >= 4");
  if (!(iou_resolution > 0.0)) throw std::invalid_argument("config: iou_resolution must be > 0");
  if (jobs < 1) throw std::invalid_argument("config: jobs must be >= 1");
  const Eigen::LLT<Eigen::Matrix3d> llt(model_inertia);
  if (llt.info() != Eigen::Success) throw std::invalid_argument("config: model inertia not SPD");
}

PredictorSuite::PredictorSuite(const ExperimentConfig& config)
    : lie_model_(LieModel::unicycle(config.model_inertia)),
      ss_model_(config.model_inertia),
      noise_(config.predictor_noise()),
      horizon_(config.horizon()) {}

GaussianPrediction PredictorSuite::lie(const LieState& s0, const ControlInput& u) const {
  return inekf_predict(s0, u, lie_model_, noise_, horizon_);
}

GaussianPrediction PredictorSuite::ss(const LieState& s0, const ControlInput& u) const {
  return ekf_predict_ss(s0, u, ss_model_, noise_, horizon_);
}

GaussianPrediction PredictorSuite::predict(const FittedMethod& fitted, const LieState& s0,
                                           const ControlInput& u) const {
  const GaussianPrediction base = uses_ss_predictor(fitted.id) ? ss(s0, u) : lie(s0, u);
  if (fitted.fixed_cov) return with_fixed_covariance(base, *fitted.fixed_cov, fitted.bias);
  return base;
}

Predictor PredictorSuite::base(MethodId id) const {
  if (uses_ss_predictor(id)) {
    return [this](const LieState& s0, const ControlInput& u) { return ss(s0, u); };
  }
  return [this](const LieState& s0, const ControlInput& u) { return lie(s0, u); };
}

std::string PredictorSuite::fingerprint(MethodId id) const {
  std::string bytes(to_string(id));
  bytes += uses_ss_predictor(id) ? "|ss|" : "|lie|";
  append_matrix(bytes, lie_model_.inertia());
  append_matrix(bytes, noise_.q0);
  append_number(bytes, horizon_.duration);
  append_number(bytes, horizon_.substeps);
  return claps::fingerprint(bytes);
}

std::string dataset_fingerprint(const std::vector<TransitionRecord>& records) {
  std::string bytes;
  bytes.reserve(records.size() * 300);
  for (const TransitionRecord& r : records) {
    for (const LieState* s : {&r.s0, &r.s1}) {
      append_number(bytes, s->pose.x());
      append_number(bytes, s->pose.y());
      append_number(bytes, s->pose.theta());
      append_matrix(bytes, s->twist);
    }
    append_number(bytes, r.u_des.fx);
    append_number(bytes, r.u_des.tz);
    bytes += std::to_string(r.seed);
    bytes += ';';
  }
  return fingerprint(bytes);
}

FittedMethod fit_method(MethodId id, const PredictorSuite& suite,
                        const std::vector<TransitionRecord>& calibration, double alpha) {
  FittedMethod f;
  f.id = id;
  const ScoreKind kind = score_kind_of(id);
  const Predictor base = suite.base(id);
  bool uses_data = true;
  switch (id) {
    case MethodId::SsEkf:
    case MethodId::InEkf:
      f.cal = CalibrationResult::uncalibrated(alpha, kind);
      uses_data = false;
      break;
    case MethodId::InEkf2M:
      f.fixed_cov = second_moment_cov(calibration, base);
      f.cal = CalibrationResult::uncalibrated(alpha, kind);
      f.cal.n_cal = calibration.size();
      break;
    case MethodId::InEkfMle: {
      const BiasCovariance bc = mle_bias_cov(calibration, base);
      f.fixed_cov = bc.cov;
      f.bias = bc.bias;
      f.cal = CalibrationResult::uncalibrated(alpha, kind);
      f.cal.n_cal = calibration.size();
      break;
    }
    case MethodId::SsPpCp:
    case MethodId::LiePpCp:
    case MethodId::SsEkfCp:
    case MethodId::Claps:
      f.cal = calibrate(base, calibration, alpha, kind);
      break;
  }
  f.cal.predictor_fingerprint = suite.fingerprint(id);
  if (uses_data) f.cal.dataset_fingerprint = dataset_fingerprint(calibration);
  return f;
}

std::vector<FittedMethod> fit_methods(const std::vector<MethodId>& ids, const PredictorSuite& suite,
                                      const std::vector<TransitionRecord>& calibration,
                                      double alpha) {
  std::vector<FittedMethod> out;
  out.reserve(ids.size());
  for (MethodId id : ids) out.push_back(fit_method(id, suite, calibration, alpha));
  return out;
}

std::uint64_t particle_seed(const WorldParams& world, std::size_t trial) {
  return derive_seed(world.seed, "particles", trial);
}

std::uint64_t mesh_seed(const WorldParams& world, std::size_t trial) {
  return derive_seed(world.seed, "mesh-jitter", trial);
}

TrialResult evaluate_trial(std::size_t trial, const Case& c, const std::vector<FittedMethod>& fitted,
                           const PredictorSuite& suite, const ExperimentConfig& config) {
  TrialResult out;
  out.trial = trial;
  out.c = c;
  const std::vector<Pose> particles =
      mc_particles(c.s0, c.u, config.world, config.particles, particle_seed(config.world, trial));
  const Footprint particle_fp = particle_footprint(particles, config.iou_resolution);
  for (const FittedMethod& f : fitted) {
    const auto t0 = std::chrono::steady_clock::now();
    MethodTrial m;
    m.id = f.id;
    const GaussianPrediction pred = suite.predict(f, c.s0, c.u);
    m.coverage = empirical_coverage(particles, pred, f.cal);
    if (f.cal.vacuous) {
      m.volume = kInf;
      m.iou = kNaN;
    } else {
      const RegionMesh mesh = reconstruct_mesh(pred, f.cal, config.mesh_samples,
                                               mesh_seed(config.world, trial), config.mesh_jitter);
      m.volume = mesh.volume;
      m.iou = iou(footprint(mesh, config.iou_resolution), particle_fp);
    }
    m.seconds = seconds_since(t0);
    out.methods.push_back(m);
  }
  return out;
}

std::vector<TrialResult> evaluate_trials(const std::vector<FittedMethod>& fitted,
                                         const PredictorSuite& suite,
                                         const ExperimentConfig& config) {
  const std::size_t n = config.validation.cases();
  std::vector<TrialResult> results(n);
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        results[i] = evaluate_trial(i, grid_case(config.validation, i), fitted, suite, config);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        next = n;
      }
    }
  };
  const int jobs = std::max(1, std::min<int>(config.jobs, static_cast<int>(n)));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (int j = 0; j < jobs; ++j) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  if (error) std::rethrow_exception(error);
  return results;
}

double transition_coverage(const FittedMethod& fitted, const PredictorSuite& suite,
                           const std::vector<TransitionRecord>& test) {
  if (test.empty()) return kNaN;
  std::size_t hits = 0;
  for (const TransitionRecord& r : test) {
    hits += contains(r.s1.pose, suite.predict(fitted, r.s0, r.u_des), fitted.cal) ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(test.size());
}

MetricsReport summarize(const std::vector<FittedMethod>& fitted,
                        const std::vector<TrialResult>& trials,
                        const std::vector<double>& transition_coverages, std::size_t n_test,
                        double alpha) {
  if (transition_coverages.size() != fitted.size()) {
    throw std::invalid_argument("summarize: one transition coverage per method required");
  }
  MetricsReport report;
  report.alpha = alpha;
  report.trials = trials;
  std::ptrdiff_t claps = -1;
  for (std::size_t m = 0; m < fitted.size(); ++m) {
    if (fitted[m].id == MethodId::Claps) claps = static_cast<std::ptrdiff_t>(m);
  }
  for (std::size_t m = 0; m < fitted.size(); ++m) {
    MethodSummary s;
    s.id = fitted[m].id;
    s.vacuous = fitted[m].cal.vacuous;
    s.q_hat = fitted[m].cal.q_hat;
    s.zeta = fitted[m].cal.zeta;
    s.coverage_transition = transition_coverages[m];
    s.n_test = n_test;
    s.trials = trials.size();
    double coverage = 0.0, volume = 0.0, ratio = 0.0, iou_sum = 0.0;
    for (const TrialResult& t : trials) {
      const MethodTrial& mt = t.methods.at(m);
      coverage += mt.coverage;
      volume += mt.volume;
      iou_sum += mt.iou;
      s.seconds += mt.seconds;
      if (claps >= 0) {
        const MethodTrial& ref = t.methods.at(static_cast<std::size_t>(claps));
        ratio += mt.volume / ref.volume;
        if (ref.volume < mt.volume) ++s.claps_volume_wins;
        if (ref.iou > mt.iou) ++s.claps_iou_wins;
      }
    }
    const double count = static_cast<double>(trials.size());
    s.coverage_trial_mean = trials.empty() ? kNaN : coverage / count;
    s.mean_volume = trials.empty() ? kNaN : volume / count;
    s.mean_iou = trials.empty() ? kNaN : iou_sum / count;
    s.volume_ratio = (claps >= 0 && !trials.empty()) ? ratio / count : kNaN;
    report.methods.push_back(s);
  }
  return report;
}

std::vector<TransitionRecord> make_dataset(const DatasetSpec& spec, const WorldParams& world,
                                           std::string_view stream) {
  if (spec.sampling == DatasetSpec::Sampling::Grid) {
    return gen_grid_dataset(spec.grid, world, stream);
  }
  return gen_uniform_dataset(spec.grid, spec.count, world, stream);
}

MetricsReport run_experiment(const ExperimentConfig& config) {
  config.validate();
  const PredictorSuite suite(config);
  const auto calibration = make_dataset(config.calibration, config.world, "calibration");
  const auto fitted = fit_methods(config.methods, suite, calibration, config.alpha);
  const auto test = make_dataset(config.test, config.world, "test");
  std::vector<double> transition;
  for (const FittedMethod& f : fitted) transition.push_back(transition_coverage(f, suite, test));
  const auto trials = evaluate_trials(fitted, suite, config);
  return summarize(fitted, trials, transition, test.size(), config.alpha);
}

std::vector<BenchRow> integrate_bench(const GridSpec& grid, const std::vector<double>& dts,
                                      double duration, const Eigen::Matrix3d& inertia,
                                      int timing_calls, double reference_step) {
  grid.validate();
  if (!(duration > 0.0)) throw std::invalid_argument("integrate_bench: duration must be positive");
  const LieModel lie_model = LieModel::unicycle(inertia);
  const SSModel ss_model(inertia);
  const std::size_t n_cases = grid.cases();
  std::vector<Case> cases;
  std::vector<Pose> reference;
  for (std::size_t i = 0; i < n_cases; ++i) {
    cases.push_back(grid_case(grid, i));
    reference.push_back(
        reference_trajectory(cases.back().s0, cases.back().u, duration, lie_model, reference_step)
            .pose);
  }

  std::vector<BenchRow> rows;
  for (Space space : {Space::StateSpace, Space::Lie}) {
    for (Method method : {Method::FE, Method::SE, Method::Heun, Method::RK2, Method::RK4,
                          Method::CF4}) {
      if (!supports(method, space)) continue;
      for (double dt : dts) {
        double sum_sq = 0.0;
        for (std::size_t i = 0; i < n_cases; ++i) {
          Pose end;
          if (space == Space::Lie) {
            end = integrate(cases[i].s0, cases[i].u, duration, dt, method, lie_model).pose;
          } else {
            const SSState s = integrate(to_ss_state(cases[i].s0), cases[i].u, duration, dt,
                                        method, ss_model);
            end = to_lie_state(s).pose;
          }
          sum_sq += group_error(reference[i], end).squaredNorm();
        }
        BenchRow row;
        row.method = method;
        row.space = space;
        row.dt = dt;
        row.rmse = std::sqrt(sum_sq / (3.0 * static_cast<double>(n_cases)));
        if (timing_calls > 0) {
          const Case& c = cases.front();
          double sink = 0.0;
          const auto t0 = std::chrono::steady_clock::now();
          if (space == Space::Lie) {
            LieState s = c.s0;
            for (int k = 0; k < timing_calls; ++k) {
              s = step(s, c.u, dt, method, lie_model);
              if ((k & 63) == 63) s = c.s0;
            }
            sink = s.pose.x();
          } else {
            const SSState s0 = to_ss_state(c.s0);
            SSState s = s0;
            for (int k = 0; k < timing_calls; ++k) {
              s = step(s, c.u, dt, method, ss_model);
              if ((k & 63) == 63) s = s0;
            }
            sink = s.q(0);
          }
          row.ns_per_step = 1e9 * seconds_since(t0) / timing_calls;
          if (sink == kInf) row.ns_per_step = kNaN;  // keeps the loop observable
        }
        rows.push_back(row);
      }
    }
  }
  return rows;
}

double loglog_slope(const std::vector<double>& dts, const std::vector<double>& rmse) {
  if (dts.size() != rmse.size() || dts.size() < 2) {
    throw std::invalid_argument("loglog_slope: need at least two matching points");
  }
  const double n = static_cast<double>(dts.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < dts.size(); ++i) {
    const double x = std::log(dts[i]);
    const double y = std::log(rmse[i]);
    sx += x, sy += y, sxx += x * x, sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace claps
