#include "claps/io.hpp"

#include "json.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace claps {

using nlohmann::json;

namespace {

template <int R, int C>
json matrix_json(const Eigen::Matrix<double, R, C>& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

template <int R, int C>
Eigen::Matrix<double, R, C> matrix_from(const json& j, const char* what) {
  Eigen::Matrix<double, R, C> m;
  if (!j.is_array() || static_cast<int>(j.size()) != R) {
    throw SchemaError(std::string(what) + ": wrong matrix shape");
  }
  for (int i = 0; i < R; ++i) {
    if (!j[i].is_array() || static_cast<int>(j[i].size()) != C) {
      throw SchemaError(std::string(what) + ": wrong matrix shape");
    }
    for (int j2 = 0; j2 < C; ++j2) m(i, j2) = j[i][j2].get<double>();
  }
  return m;
}

json vec3(double a, double b, double c) { return json::array({a, b, c}); }

Eigen::Vector3d vec3_from(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) throw SchemaError(std::string(what) + ": expected 3 numbers");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json world_json(const WorldParams& w) {
  return {{"inertia", matrix_json(w.inertia)},
          {"q_cont", matrix_json(w.q_cont)},
          {"c_lin", w.c_lin},
          {"c_ang", w.c_ang},
          {"substep_hz", w.substep_hz},
          {"horizon", w.horizon},
          {"seed", w.seed},
          {"per_substep_noise", w.per_substep_noise}};
}

void world_from(const json& j, WorldParams& w) {
  if (j.contains("inertia")) w.inertia = matrix_from<3, 3>(j["inertia"], "world.inertia");
  if (j.contains("q_cont")) w.q_cont = matrix_from<2, 2>(j["q_cont"], "world.q_cont");
  w.c_lin = j.value("c_lin", w.c_lin);
  w.c_ang = j.value("c_ang", w.c_ang);
  w.substep_hz = j.value("substep_hz", w.substep_hz);
  w.horizon = j.value("horizon", w.horizon);
  w.seed = j.value("seed", w.seed);
  w.per_substep_noise = j.value("per_substep_noise", w.per_substep_noise);
}

json range_json(const LinRange& r) { return json::array({r.lo, r.hi, r.count}); }

void range_from(const json& j, const char* key, LinRange& r) {
  if (!j.contains(key)) return;
  const json& a = j[key];
  if (!a.is_array() || a.size() != 3) {
    throw SchemaError(std::string("grid.") + key + ": expected [lo, hi, count]");
  }
  r = {a[0].get<double>(), a[1].get<double>(), a[2].get<int>()};
}

json grid_json(const GridSpec& g) {
  return {{"speed", range_json(g.speed)},
          {"yaw_rate", range_json(g.yaw_rate)},
          {"accel", range_json(g.accel)},
          {"yaw_accel", range_json(g.yaw_accel)},
          {"repetitions", g.repetitions},
          {"command_mass", g.command_mass},
          {"command_inertia", g.command_inertia}};
}

void grid_from(const json& j, GridSpec& g) {
  range_from(j, "speed", g.speed);
  range_from(j, "yaw_rate", g.yaw_rate);
  range_from(j, "accel", g.accel);
  range_from(j, "yaw_accel", g.yaw_accel);
  g.repetitions = j.value("repetitions", g.repetitions);
  g.command_mass = j.value("command_mass", g.command_mass);
  g.command_inertia = j.value("command_inertia", g.command_inertia);
}

json dataset_spec_json(const DatasetSpec& d) {
  return {{"sampling", std::string(to_string(d.sampling))},
          {"grid", grid_json(d.grid)},
          {"count", d.count}};
}

void dataset_spec_from(const json& j, DatasetSpec& d) {
  if (j.contains("sampling")) d.sampling = sampling_from_string(j["sampling"].get<std::string>());
  if (j.contains("grid")) grid_from(j["grid"], d.grid);
  d.count = j.value("count", d.count);
}

void require_schema(const json& j, std::string_view expected) {
  if (!j.is_object() || !j.contains("schema")) throw SchemaError("missing schema field");
  const std::string got = j["schema"].get<std::string>();
  if (got != expected) {
    throw SchemaError("schema mismatch: expected " + std::string(expected) + ", got " + got);
  }
}

json parse(std::string_view text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw SchemaError(std::string(what) + ": " + e.what());
  }
}

json state_pose(const Pose& p) { return vec3(p.x(), p.y(), p.theta()); }
json state_twist(const Twist& t) { return vec3(t(0), t(1), t(2)); }

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace

void write_dataset(std::ostream& os, const std::vector<TransitionRecord>& records,
                   const WorldParams& world, std::string_view stream) {
  const json header = {{"schema", std::string(kDatasetSchema)},
                       {"world", world_json(world)},
                       {"master_seed", world.seed},
                       {"rng", std::string(kRngAlgorithm)},
                       {"stream", std::string(stream)},
                       {"count", records.size()}};
  os << header.dump() << '\n';
  for (const TransitionRecord& r : records) {
    const json line = {{"q0", state_pose(r.s0.pose)}, {"dq0", state_twist(r.s0.twist)},
                       {"u", json::array({r.u_des.fx, r.u_des.tz})},
                       {"q1", state_pose(r.s1.pose)}, {"dq1", state_twist(r.s1.twist)},
                       {"seed", r.seed}};
    os << line.dump() << '\n';
  }
}

Dataset read_dataset(std::istream& is) {
  Dataset out;
  std::string line;
  if (!std::getline(is, line)) throw SchemaError("dataset: missing header line");
  const json header = parse(line, "dataset header");
  require_schema(header, kDatasetSchema);
  out.header.schema = header["schema"].get<std::string>();
  if (header.contains("world")) world_from(header["world"], out.header.world);
  out.header.master_seed = header.value("master_seed", std::uint64_t{0});
  out.header.rng = header.value("rng", std::string());
  out.header.stream = header.value("stream", std::string());
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const json j = parse(line, "dataset record");
    try {
      TransitionRecord r;
      const Eigen::Vector3d q0 = vec3_from(j.at("q0"), "q0");
      const Eigen::Vector3d q1 = vec3_from(j.at("q1"), "q1");
      r.s0.pose = Pose(q0(0), q0(1), q0(2));
      r.s0.twist = vec3_from(j.at("dq0"), "dq0");
      r.s1.pose = Pose(q1(0), q1(1), q1(2));
      r.s1.twist = vec3_from(j.at("dq1"), "dq1");
      const json& u = j.at("u");
      if (!u.is_array() || u.size() != 2) throw SchemaError("u: expected 2 numbers");
      r.u_des = {u[0].get<double>(), u[1].get<double>()};
      r.seed = j.at("seed").get<std::uint64_t>();
      out.records.push_back(r);
    } catch (const json::exception& e) {
      throw SchemaError(std::string("dataset record: ") + e.what());
    }
  }
  if (header.contains("count") && header["count"].get<std::size_t>() != out.records.size()) {
    throw SchemaError("dataset: record count does not match header");
  }
  return out;
}

std::string config_to_json(const ExperimentConfig& c) {
  json methods = json::array();
  for (MethodId id : c.methods) methods.push_back(std::string(to_string(id)));
  const json j = {{"schema", std::string(kConfigSchema)},
                  {"world", world_json(c.world)},
                  {"model", {{"inertia", matrix_json(c.model_inertia)},
                             {"noise_scale", c.predictor_noise_scale}}},
                  {"calibration", dataset_spec_json(c.calibration)},
                  {"test", dataset_spec_json(c.test)},
                  {"validation", grid_json(c.validation)},
                  {"alpha", c.alpha},
                  {"methods", methods},
                  {"particles", c.particles},
                  {"mesh_samples", c.mesh_samples},
                  {"mesh_jitter", c.mesh_jitter},
                  {"iou_resolution", c.iou_resolution},
                  {"jobs", c.jobs},
                  {"output_dir", c.output_dir}};
  return j.dump(2) + "\n";
}

ExperimentConfig config_from_json(std::string_view text, const ExperimentConfig& base) {
  const json j = parse(text, "config");
  require_schema(j, kConfigSchema);
  ExperimentConfig c = base;
  try {
    if (j.contains("world")) world_from(j["world"], c.world);
    if (j.contains("model")) {
      const json& m = j["model"];
      if (m.contains("inertia")) c.model_inertia = matrix_from<3, 3>(m["inertia"], "model.inertia");
      c.predictor_noise_scale = m.value("noise_scale", c.predictor_noise_scale);
    }
    if (j.contains("calibration")) dataset_spec_from(j["calibration"], c.calibration);
    if (j.contains("test")) dataset_spec_from(j["test"], c.test);
    if (j.contains("validation")) grid_from(j["validation"], c.validation);
    c.alpha = j.value("alpha", c.alpha);
    if (j.contains("methods")) {
      c.methods.clear();
      for (const json& m : j["methods"]) c.methods.push_back(method_id_from_string(m.get<std::string>()));
    }
    c.particles = j.value("particles", c.particles);
    c.mesh_samples = j.value("mesh_samples", c.mesh_samples);
    c.mesh_jitter = j.value("mesh_jitter", c.mesh_jitter);
    c.iou_resolution = j.value("iou_resolution", c.iou_resolution);
    c.jobs = j.value("jobs", c.jobs);
    c.output_dir = j.value("output_dir", c.output_dir);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string calibrations_to_json(const std::vector<FittedMethod>& fitted) {
  json methods = json::array();
  for (const FittedMethod& f : fitted) {
    const CalibrationResult& c = f.cal;
    json m = {{"method", std::string(to_string(f.id))},
              {"score_kind", std::string(to_string(c.score_kind))},
              {"alpha", c.alpha},
              {"n_cal", c.n_cal},
              {"q_hat", c.vacuous ? json(nullptr) : json(c.q_hat)},
              {"zeta", c.vacuous ? json(nullptr) : json(c.zeta)},
              {"chi2_q", c.chi2_q},
              {"vacuous", c.vacuous},
              {"predictor_fingerprint", c.predictor_fingerprint},
              {"dataset_fingerprint", c.dataset_fingerprint}};
    if (f.fixed_cov) {
      m["fixed_cov"] = matrix_json(*f.fixed_cov);
      m["bias"] = vec3(f.bias(0), f.bias(1), f.bias(2));
    }
    methods.push_back(m);
  }
  const json j = {{"schema", std::string(kCalibrationSchema)}, {"methods", methods}};
  return j.dump(2) + "\n";
}

std::vector<FittedMethod> calibrations_from_json(std::string_view text) {
  const json j = parse(text, "calibration");
  require_schema(j, kCalibrationSchema);
  std::vector<FittedMethod> out;
  try {
    for (const json& m : j.at("methods")) {
      FittedMethod f;
      f.id = method_id_from_string(m.at("method").get<std::string>());
      CalibrationResult& c = f.cal;
      c.score_kind = score_kind_from_string(m.at("score_kind").get<std::string>());
      if (c.score_kind != score_kind_of(f.id)) {
        throw SchemaError("calibration: score kind does not match method " +
                          std::string(to_string(f.id)));
      }
      c.alpha = m.at("alpha").get<double>();
      c.n_cal = m.at("n_cal").get<std::size_t>();
      c.chi2_q = m.at("chi2_q").get<double>();
      c.vacuous = m.at("vacuous").get<bool>();
      const double inf = std::numeric_limits<double>::infinity();
      c.q_hat = c.vacuous ? inf : m.at("q_hat").get<double>();
      c.zeta = c.vacuous ? inf : m.at("zeta").get<double>();
      c.predictor_fingerprint = m.value("predictor_fingerprint", std::string());
      c.dataset_fingerprint = m.value("dataset_fingerprint", std::string());
      if (m.contains("fixed_cov")) {
        f.fixed_cov = matrix_from<3, 3>(m["fixed_cov"], "fixed_cov");
        f.bias = vec3_from(m.at("bias"), "bias");
      }
      out.push_back(f);
    }
  } catch (const json::exception& e) {
    throw SchemaError(std::string("calibration: ") + e.what());
  }
  return out;
}

void write_metrics_csv(std::ostream& os, const MetricsReport& report) {
  os << "method,alpha,vacuous,q_hat,zeta,coverage_trial_mean,coverage_transition,n_test,"
        "mean_volume,volume_ratio,mean_iou,claps_volume_wins,claps_iou_wins,trials\n";
  for (const MethodSummary& s : report.methods) {
    os << to_string(s.id) << ',' << num(report.alpha) << ',' << (s.vacuous ? 1 : 0) << ','
       << num(s.q_hat) << ',' << num(s.zeta) << ',' << num(s.coverage_trial_mean) << ','
       << num(s.coverage_transition) << ',' << s.n_test << ',' << num(s.mean_volume) << ','
       << num(s.volume_ratio) << ',' << num(s.mean_iou) << ',' << s.claps_volume_wins << ','
       << s.claps_iou_wins << ',' << s.trials << '\n';
  }
}

void write_trials_csv(std::ostream& os, const MetricsReport& report) {
  os << "trial,speed,yaw_rate,fx,tz,method,coverage,volume,iou\n";
  for (const TrialResult& t : report.trials) {
    for (const MethodTrial& m : t.methods) {
      os << t.trial << ',' << num(t.c.s0.twist(0)) << ',' << num(t.c.s0.twist(2)) << ','
         << num(t.c.u.fx) << ',' << num(t.c.u.tz) << ',' << to_string(m.id) << ','
         << num(m.coverage) << ',' << num(m.volume) << ',' << num(m.iou) << '\n';
    }
  }
}

void write_timing_csv(std::ostream& os, const MetricsReport& report) {
  os << "method,seconds\n";
  for (const MethodSummary& s : report.methods) os << to_string(s.id) << ',' << num(s.seconds) << '\n';
}

std::string format_metrics_table(const MetricsReport& report) {
  std::ostringstream os;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-10s %9s %9s %12s %10s %8s %10s\n", "method", "cov_trial",
                "cov_trans", "volume", "vol_ratio", "iou", "guarantee");
  os << buf;
  for (const MethodSummary& s : report.methods) {
    std::snprintf(buf, sizeof(buf), "%-10s %9.4f %9.4f %12.4e %10.3f %8.4f %10s\n",
                  std::string(to_string(s.id)).c_str(), s.coverage_trial_mean,
                  s.coverage_transition, s.mean_volume, s.volume_ratio, s.mean_iou,
                  is_conformal(s.id) ? "yes" : "no");
    os << buf;
  }
  return os.str();
}

void write_bench_csv(std::ostream& os, const std::vector<BenchRow>& rows) {
  os << "integrator,space,dt,rmse,ns_per_step\n";
  for (const BenchRow& r : rows) {
    os << to_string(r.method) << ',' << to_string(r.space) << ',' << num(r.dt) << ','
       << num(r.rmse) << ',' << num(r.ns_per_step) << '\n';
  }
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

}  // namespace claps
