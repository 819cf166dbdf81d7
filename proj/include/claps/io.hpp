#pragma once

#include "claps/experiment.hpp"
#include "claps/simulate.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace claps {

inline constexpr std::string_view kDatasetSchema = "claps.dataset.v1";
inline constexpr std::string_view kConfigSchema = "claps.config.v1";
inline constexpr std::string_view kCalibrationSchema = "claps.calibration.v1";

/// Malformed file or schema version mismatch.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DatasetHeader {
  std::string schema{kDatasetSchema};
  WorldParams world;
  std::uint64_t master_seed = 0;
  std::string rng{kRngAlgorithm};
  std::string stream;
};

struct Dataset {
  DatasetHeader header;
  std::vector<TransitionRecord> records;
};

/// JSON lines: a header object, then one record per line with fields
/// q0, dq0, u, q1, dq1, seed.
void write_dataset(std::ostream& os, const std::vector<TransitionRecord>& records,
                   const WorldParams& world, std::string_view stream);
Dataset read_dataset(std::istream& is);

/// Config JSON. Keys missing from the text keep the values of `base`.
std::string config_to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(std::string_view text,
                                  const ExperimentConfig& base = ExperimentConfig::desk());

/// Calibration artifacts of several methods in one JSON document. A vacuous
/// threshold is written as null with "vacuous": true.
std::string calibrations_to_json(const std::vector<FittedMethod>& fitted);
std::vector<FittedMethod> calibrations_from_json(std::string_view text);

/// Per-method summary, one row per method.
void write_metrics_csv(std::ostream& os, const MetricsReport& report);
/// Per-trial, per-method coverage, volume and IoU.
void write_trials_csv(std::ostream& os, const MetricsReport& report);
/// Wall-clock seconds per method; kept apart so the other files are reproducible byte for byte.
void write_timing_csv(std::ostream& os, const MetricsReport& report);
/// Aligned plain-text version of the summary.
std::string format_metrics_table(const MetricsReport& report);

void write_bench_csv(std::ostream& os, const std::vector<BenchRow>& rows);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace claps
