// Experiment harness: dataset generation, calibration, evaluation, region
// export and the integrator study.

#include "claps/experiment.hpp"
#include "claps/io.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace claps;

namespace {

struct CommonOptions {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  double alpha = 0.0;
  bool alpha_set = false;
  std::string methods;
  bool desk = false;
  bool full = false;
  int jobs = 0;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config_path, "JSON config file");
  cmd->add_option("--out", o.out_dir, "Output directory");
  cmd->add_option("--seed", o.seed, "Master seed override");
  cmd->add_option("--alpha", o.alpha, "Miscoverage level override");
  cmd->add_option("--methods", o.methods, "Comma-separated method list");
  auto* desk = cmd->add_flag("--desk", o.desk, "Desk-scale preset (default)");
  auto* full = cmd->add_flag("--full", o.full, "Full-scale preset");
  desk->excludes(full);
  cmd->add_option("--jobs", o.jobs, "Worker threads for trial evaluation");
}

ExperimentConfig resolve(const CommonOptions& o) {
  const ExperimentConfig preset = o.full ? ExperimentConfig::full() : ExperimentConfig::desk();
  ExperimentConfig c = o.config_path.empty() ? preset
                                             : config_from_json(read_text_file(o.config_path), preset);
  if (o.seed_set) c.world.seed = o.seed;
  if (o.alpha_set) c.alpha = o.alpha;
  if (!o.methods.empty()) c.methods = parse_method_list(o.methods);
  if (o.jobs > 0) c.jobs = o.jobs;
  if (!o.out_dir.empty()) c.output_dir = o.out_dir;
  c.validate();
  return c;
}

fs::path out_path(const ExperimentConfig& c, const std::string& name) {
  return fs::path(c.output_dir) / name;
}

void echo_config(const ExperimentConfig& c) {
  write_text_file(out_path(c, "config.json"), config_to_json(c));
}

void save_dataset(const fs::path& path, const std::vector<TransitionRecord>& records,
                  const WorldParams& world, std::string_view stream) {
  std::ostringstream os;
  write_dataset(os, records, world, stream);
  write_text_file(path, os.str());
}

Dataset load_dataset(const fs::path& path, const ExperimentConfig& c) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset " + path.string());
  Dataset d = read_dataset(in);
  if (d.header.master_seed != c.world.seed) {
    throw SchemaError("dataset " + path.string() + " was generated with a different master seed");
  }
  return d;
}

int cmd_gen_data(const ExperimentConfig& c) {
  echo_config(c);
  const auto calibration = make_dataset(c.calibration, c.world, "calibration");
  const auto test = make_dataset(c.test, c.world, "test");
  save_dataset(out_path(c, "calibration.jsonl"), calibration, c.world, "calibration");
  save_dataset(out_path(c, "test.jsonl"), test, c.world, "test");
  std::printf("wrote %zu calibration and %zu test records to %s\n", calibration.size(),
              test.size(), c.output_dir.c_str());
  return 0;
}

int cmd_calibrate(const ExperimentConfig& c, const std::string& data_path) {
  echo_config(c);
  const fs::path path = data_path.empty() ? out_path(c, "calibration.jsonl") : fs::path(data_path);
  const Dataset data = load_dataset(path, c);
  const PredictorSuite suite(c);
  const auto fitted = fit_methods(c.methods, suite, data.records, c.alpha);
  write_text_file(out_path(c, "calibration.json"), calibrations_to_json(fitted));
  for (const FittedMethod& f : fitted) {
    if (f.cal.vacuous) {
      std::printf("%-10s vacuous (n_cal=%zu too small for alpha=%g)\n",
                  std::string(to_string(f.id)).c_str(), f.cal.n_cal, f.cal.alpha);
    } else {
      std::printf("%-10s q_hat=%.6g zeta=%.6g\n", std::string(to_string(f.id)).c_str(),
                  f.cal.q_hat, f.cal.zeta);
    }
  }
  return 0;
}

std::vector<FittedMethod> select_calibrations(const ExperimentConfig& c, const fs::path& path) {
  const auto all = calibrations_from_json(read_text_file(path));
  const PredictorSuite suite(c);
  std::vector<FittedMethod> out;
  for (MethodId id : c.methods) {
    auto it = std::find_if(all.begin(), all.end(), [&](const FittedMethod& f) { return f.id == id; });
    if (it == all.end()) {
      throw SchemaError("no calibration for method " + std::string(to_string(id)) + " in " +
                        path.string());
    }
    if (it->cal.predictor_fingerprint != suite.fingerprint(id)) {
      throw SchemaError("calibration for " + std::string(to_string(id)) +
                        " was produced by a different predictor configuration");
    }
    out.push_back(*it);
  }
  return out;
}

int cmd_evaluate(const ExperimentConfig& c, const std::string& cal_path,
                 const std::string& test_path) {
  echo_config(c);
  const PredictorSuite suite(c);
  const auto fitted =
      select_calibrations(c, cal_path.empty() ? out_path(c, "calibration.json") : fs::path(cal_path));
  const fs::path tpath = test_path.empty() ? out_path(c, "test.jsonl") : fs::path(test_path);
  const Dataset test = load_dataset(tpath, c);
  std::vector<double> transition;
  for (const FittedMethod& f : fitted) transition.push_back(transition_coverage(f, suite, test.records));
  const auto trials = evaluate_trials(fitted, suite, c);
  const MetricsReport report = summarize(fitted, trials, transition, test.records.size(), c.alpha);

  std::ostringstream metrics, per_trial, timing;
  write_metrics_csv(metrics, report);
  write_trials_csv(per_trial, report);
  write_timing_csv(timing, report);
  const std::string table = format_metrics_table(report);
  write_text_file(out_path(c, "metrics.csv"), metrics.str());
  write_text_file(out_path(c, "trials.csv"), per_trial.str());
  write_text_file(out_path(c, "timing.csv"), timing.str());
  write_text_file(out_path(c, "metrics.txt"), table);
  std::fputs(table.c_str(), stdout);
  for (const MethodSummary& s : report.methods) {
    if (s.vacuous) std::printf("note: %s calibration is vacuous\n", std::string(to_string(s.id)).c_str());
  }
  return 0;
}

struct BoundaryOptions {
  double speed = 0.3;
  double yaw_rate = 0.25;
  double fx = 0.7;
  double tz = 0.007;
  std::string method = "CLAPS";
  int samples = 0;
  std::string calibration;
};

int cmd_boundary(const ExperimentConfig& c, const BoundaryOptions& b) {
  echo_config(c);
  const MethodId id = method_id_from_string(b.method);
  ExperimentConfig one = c;
  one.methods = {id};
  const auto fitted = select_calibrations(
      one, b.calibration.empty() ? out_path(c, "calibration.json") : fs::path(b.calibration));
  const FittedMethod& f = fitted.front();
  if (f.cal.vacuous) {
    std::printf("%s calibration is vacuous: the region is the whole space\n", b.method.c_str());
    return 0;
  }
  const PredictorSuite suite(c);
  LieState s0;
  s0.twist = Twist(b.speed, 0.0, b.yaw_rate);
  const ControlInput u{b.fx, b.tz};
  const GaussianPrediction pred = suite.predict(f, s0, u);
  const int n = b.samples > 0 ? b.samples : c.mesh_samples;
  const RegionMesh mesh = reconstruct_mesh(pred, f.cal, n, mesh_seed(c.world, 0), c.mesh_jitter);
  std::ostringstream vertices, triangles, fp;
  write_mesh_vertices_csv(vertices, mesh);
  write_mesh_triangles_csv(triangles, mesh);
  write_footprint_csv(fp, footprint(mesh, c.iou_resolution));
  write_text_file(out_path(c, "mesh_vertices.csv"), vertices.str());
  write_text_file(out_path(c, "mesh_triangles.csv"), triangles.str());
  write_text_file(out_path(c, "footprint.csv"), fp.str());
  std::printf("%s region: %zu vertices, %zu triangles, volume %.6g\n", b.method.c_str(),
              mesh.vertices.size(), mesh.triangles.size(), mesh.volume);
  return 0;
}

int cmd_integrate_bench(const ExperimentConfig& c, bool full, double duration, int timing_calls,
                        const std::vector<double>& dts) {
  echo_config(c);
  GridSpec grid = c.validation;
  if (!full) {
    grid.speed.count = grid.yaw_rate.count = grid.accel.count = grid.yaw_accel.count = 2;
  }
  const auto rows = integrate_bench(grid, dts, duration, c.model_inertia, timing_calls);
  std::ostringstream os;
  write_bench_csv(os, rows);
  write_text_file(out_path(c, "integrate_bench.csv"), os.str());
  std::fputs(os.str().c_str(), stdout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conformal prediction regions for a planar nonholonomic robot"};
  app.require_subcommand(1);

  CommonOptions gen_o, cal_o, eval_o, run_o, bnd_o, bench_o;
  auto* gen = app.add_subcommand("gen-data", "Generate calibration and test datasets");
  add_common(gen, gen_o);

  std::string data_path;
  auto* cal = app.add_subcommand("calibrate", "Fit every selected method on the calibration set");
  add_common(cal, cal_o);
  cal->add_option("--data", data_path, "Calibration dataset (default <out>/calibration.jsonl)");

  std::string cal_path, test_path;
  auto* eval = app.add_subcommand("evaluate", "Coverage, volume and IoU on the validation trials");
  add_common(eval, eval_o);
  eval->add_option("--calibration", cal_path, "Calibration file (default <out>/calibration.json)");
  eval->add_option("--test", test_path, "Held-out dataset (default <out>/test.jsonl)");

  auto* run = app.add_subcommand("run", "gen-data, calibrate and evaluate in one go");
  add_common(run, run_o);

  BoundaryOptions bnd;
  auto* boundary = app.add_subcommand("boundary", "Export one region mesh and its footprint");
  add_common(boundary, bnd_o);
  boundary->add_option("--speed", bnd.speed, "Initial forward speed (m/s)");
  boundary->add_option("--yaw-rate", bnd.yaw_rate, "Initial yaw rate (rad/s)");
  boundary->add_option("--fx", bnd.fx, "Commanded forward force (N)");
  boundary->add_option("--tz", bnd.tz, "Commanded yaw torque (N m)");
  boundary->add_option("--method", bnd.method, "Method name");
  boundary->add_option("--samples", bnd.samples, "Boundary samples (default from config)");
  boundary->add_option("--calibration", bnd.calibration, "Calibration file");

  double duration = 1.0;
  int timing_calls = 50000;
  std::vector<double> dts{1e-3, 3e-3, 1e-2, 3e-2, 1e-1};
  auto* bench = app.add_subcommand("integrate-bench", "Integrator accuracy and cost table");
  add_common(bench, bench_o);
  bench->add_option("--duration", duration, "Integration horizon (s)");
  bench->add_option("--timing-calls", timing_calls, "Steps timed per row");
  bench->add_option("--dt", dts, "Step sizes")->delimiter(',');

  CLI11_PARSE(app, argc, argv);

  auto mark = [](CLI::App* cmd, CommonOptions& o) {
    o.seed_set = cmd->count("--seed") > 0;
    o.alpha_set = cmd->count("--alpha") > 0;
  };
  try {
    if (gen->parsed()) {
      mark(gen, gen_o);
      return cmd_gen_data(resolve(gen_o));
    }
    if (cal->parsed()) {
      mark(cal, cal_o);
      return cmd_calibrate(resolve(cal_o), data_path);
    }
    if (eval->parsed()) {
      mark(eval, eval_o);
      return cmd_evaluate(resolve(eval_o), cal_path, test_path);
    }
    if (run->parsed()) {
      mark(run, run_o);
      const ExperimentConfig c = resolve(run_o);
      if (int rc = cmd_gen_data(c)) return rc;
      if (int rc = cmd_calibrate(c, "")) return rc;
      return cmd_evaluate(c, "", "");
    }
    if (boundary->parsed()) {
      mark(boundary, bnd_o);
      return cmd_boundary(resolve(bnd_o), bnd);
    }
    if (bench->parsed()) {
      mark(bench, bench_o);
      return cmd_integrate_bench(resolve(bench_o), bench_o.full, duration, timing_calls, dts);
    }
  } catch (const SchemaError& e) {
    std::fprintf(stderr, "schema error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
