#pragma once

#include "claps/conformal.hpp"
#include "claps/estimate.hpp"
#include "claps/regions.hpp"
#include "claps/simulate.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace claps {

/// The compared prediction-region methods.
enum class MethodId { SsEkf, InEkf, InEkf2M, InEkfMle, SsPpCp, LiePpCp, SsEkfCp, Claps };

std::string_view to_string(MethodId id);
MethodId method_id_from_string(std::string_view name);
/// All methods in table order.
const std::vector<MethodId>& all_methods();
/// Parses a comma-separated list of method names.
std::vector<MethodId> parse_method_list(std::string_view list);

ScoreKind score_kind_of(MethodId id);
/// True for the split-conformal methods.
bool is_conformal(MethodId id);
/// True when the method's mean comes from the state-space predictor.
bool uses_ss_predictor(MethodId id);

/// How a transition set is drawn: every grid point `repetitions` times, or
/// `count` cases uniform over the grid's bounding box.
struct DatasetSpec {
  enum class Sampling { Grid, Uniform };
  Sampling sampling = Sampling::Grid;
  GridSpec grid;
  std::size_t count = 0;

  std::size_t size() const;
};

std::string_view to_string(DatasetSpec::Sampling s);
DatasetSpec::Sampling sampling_from_string(std::string_view name);

struct ExperimentConfig {
  WorldParams world;
  /// Inertia of the approximate model shared by all predictors.
  Eigen::Matrix3d model_inertia = default_model_inertia();
  /// Predictor wrench covariance as a multiple of the world's Q_cont.
  double predictor_noise_scale = 0.25;
  DatasetSpec calibration;
  /// Held-out transitions from the calibration generator (per-transition coverage).
  DatasetSpec test;
  /// Validation cases; repetitions are ignored, each case is one trial.
  GridSpec validation;
  double alpha = 0.1;
  std::vector<MethodId> methods = all_methods();
  int particles = 1000;
  int mesh_samples = 500;
  bool mesh_jitter = false;
  double iou_resolution = 0.005;
  int jobs = 1;
  std::string output_dir = "out";

  /// Small end-to-end run: 160 calibration records, 16 trials of 1000 particles.
  static ExperimentConfig desk();
  /// Full-size grids: 40,500 calibration records and 625 validation trials.
  static ExperimentConfig full();

  NoiseConfig predictor_noise() const;
  Horizon horizon() const;
  void validate() const;
};

/// Everything a method needs at query time, fixed once offline.
struct FittedMethod {
  MethodId id = MethodId::Claps;
  CalibrationResult cal;
  /// Action-independent covariance and bias of the data-fit baselines.
  std::optional<Eigen::Matrix3d> fixed_cov;
  AlgebraVector bias = AlgebraVector::Zero();
};

/// Prediction models built from a config. Immutable and shareable across threads.
class PredictorSuite {
 public:
  explicit PredictorSuite(const ExperimentConfig& config);

  GaussianPrediction lie(const LieState& s0, const ControlInput& u) const;
  GaussianPrediction ss(const LieState& s0, const ControlInput& u) const;
  /// Prediction of `fitted`'s method, including any fixed covariance and bias.
  GaussianPrediction predict(const FittedMethod& fitted, const LieState& s0,
                             const ControlInput& u) const;
  /// Prediction of the method's base model, before any data fit.
  Predictor base(MethodId id) const;
  /// Identifies the predictor configuration (inertia, Q0, horizon) for provenance.
  std::string fingerprint(MethodId id) const;

 private:
  LieModel lie_model_;
  SSModel ss_model_;
  NoiseConfig noise_;
  Horizon horizon_;
};

/// Fingerprint of a record set (all numeric fields at full precision).
std::string dataset_fingerprint(const std::vector<TransitionRecord>& records);

/// Offline step for one method. Conformal methods run split calibration;
/// the others get the uncalibrated chi-square region, after a covariance fit
/// for InEKF+2M and InEKF+MLE.
FittedMethod fit_method(MethodId id, const PredictorSuite& suite,
                        const std::vector<TransitionRecord>& calibration, double alpha);

std::vector<FittedMethod> fit_methods(const std::vector<MethodId>& ids, const PredictorSuite& suite,
                                      const std::vector<TransitionRecord>& calibration,
                                      double alpha);

struct MethodTrial {
  MethodId id = MethodId::Claps;
  double coverage = 0.0;
  /// C-space mesh volume; +inf for vacuous regions.
  double volume = 0.0;
  /// Workspace IoU with the particle footprint; NaN for vacuous regions.
  double iou = 0.0;
  double seconds = 0.0;
};

struct TrialResult {
  std::size_t trial = 0;
  Case c;
  std::vector<MethodTrial> methods;
};

/// One validation case: particles, then coverage, mesh volume and IoU per method.
TrialResult evaluate_trial(std::size_t trial, const Case& c, const std::vector<FittedMethod>& fitted,
                           const PredictorSuite& suite, const ExperimentConfig& config);

/// All validation trials, `config.jobs` at a time. Results come back sorted
/// by trial index whatever the thread count.
std::vector<TrialResult> evaluate_trials(const std::vector<FittedMethod>& fitted,
                                         const PredictorSuite& suite,
                                         const ExperimentConfig& config);

/// Fraction of held-out transitions whose outcome lies in the method's region.
double transition_coverage(const FittedMethod& fitted, const PredictorSuite& suite,
                           const std::vector<TransitionRecord>& test);

struct MethodSummary {
  MethodId id = MethodId::Claps;
  bool vacuous = false;
  double q_hat = 0.0;
  double zeta = 0.0;
  double coverage_trial_mean = 0.0;
  double coverage_transition = 0.0;
  std::size_t n_test = 0;
  double mean_volume = 0.0;
  /// Mean over trials of volume / CLAPS volume; NaN when CLAPS is not evaluated.
  double volume_ratio = 0.0;
  double mean_iou = 0.0;
  /// Trials in which CLAPS is strictly smaller in volume / strictly larger in IoU.
  std::size_t claps_volume_wins = 0;
  std::size_t claps_iou_wins = 0;
  std::size_t trials = 0;
  double seconds = 0.0;
};

struct MetricsReport {
  double alpha = 0.1;
  std::vector<MethodSummary> methods;
  std::vector<TrialResult> trials;
};

MetricsReport summarize(const std::vector<FittedMethod>& fitted,
                        const std::vector<TrialResult>& trials,
                        const std::vector<double>& transition_coverages, std::size_t n_test,
                        double alpha);

/// Offline fit, held-out coverage and validation trials in one call.
MetricsReport run_experiment(const ExperimentConfig& config);

/// Transition sets of an experiment, each from its own named stream.
std::vector<TransitionRecord> make_dataset(const DatasetSpec& spec, const WorldParams& world,
                                           std::string_view stream);

/// Seeds of the per-trial streams.
std::uint64_t particle_seed(const WorldParams& world, std::size_t trial);
std::uint64_t mesh_seed(const WorldParams& world, std::size_t trial);

struct BenchRow {
  Method method = Method::FE;
  Space space = Space::Lie;
  double dt = 0.0;
  double rmse = 0.0;
  double ns_per_step = 0.0;
};

/// Integrator accuracy/speed study: every supported (method, space) pair and
/// step size over the cases of `grid` (one case per grid point), each
/// integrated for `duration` and compared against reference_trajectory().
/// RMSE is taken over all cases and the three exponential coordinates of
/// log(reference^-1 * result).
std::vector<BenchRow> integrate_bench(const GridSpec& grid, const std::vector<double>& dts,
                                      double duration, const Eigen::Matrix3d& inertia,
                                      int timing_calls = 50000,
                                      double reference_step = kReferenceStep);

/// Least-squares slope of log(rmse) against log(dt).
double loglog_slope(const std::vector<double>& dts, const std::vector<double>& rmse);

}  // namespace claps
