#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "glt/dataset.hpp"
#include "glt/energy.hpp"
#include "glt/sampler.hpp"
#include "json.hpp"

namespace glt {

enum class RunKind { Simulate, Reconstruct, Greedy };
std::string_view to_string(RunKind kind);
RunKind parse_run_kind(std::string_view name);

/// Where a reconstructing potential gets its target.
enum class TargetSource {
  Value,     // s0 given in the config (mean, variance)
  Dataset,   // computed from the configured generator dataset
  File,      // histogram CSV
  ReferenceNof,  // reference_nof_histogram()
};

struct PotentialEntry {
  CharacteristicKind kind = CharacteristicKind::Nof;
  Functional functional = Functional::Discrepancy;
  double theta = 0.0;
  TargetSource source = TargetSource::Dataset;
  double s0 = 0.0;
  std::filesystem::path target_file;
  std::string bins;  // parse_breaks syntax; empty means default bins
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::string preset;
  RunKind run = RunKind::Simulate;

  SamplerParams sampler;
  HardcoreParams hardcore;
  std::optional<PairPotentialSpec> pair;
  std::vector<PotentialEntry> potentials;

  std::uint64_t steps = 0;  // simulate
  StoppingCriterion stop;   // reconstruct
  GreedyParams greedy;
  std::size_t greedy_cells = 1057;  // M

  std::optional<std::size_t> initial_cells;
  std::filesystem::path initial_file;

  std::filesystem::path dataset;  // empty: bundled synthetic sample
  std::filesystem::path output_dir;
  std::uint64_t log_every = 1000;

  /// Throws ConfigError or InvalidParameter. Checks that referenced files
  /// exist.
  void validate() const;
  bool uses_dataset() const;
};

/// Sectioned key = value text, see README. Relative paths resolve against
/// `base_dir`. Unknown sections or keys are rejected.
ExperimentConfig parse_config(std::istream& in, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);
void write_config(std::ostream& out, const ExperimentConfig& config);

std::filesystem::path bundled_dataset_path();

struct PresetInfo {
  std::string name;
  std::string description;
};
const std::vector<PresetInfo>& preset_list();
/// Throws ConfigError for an unknown name. Aliases rt1, rt2, rt6 and rt7
/// resolve to rt1_regular, rt2_regular, rt6_1000 and rt7_1000_10000.
ExperimentConfig preset(std::string_view name);

/// Generator dataset turned into a periodic tessellation, for targets.
struct DataReference {
  Configuration configuration;
  ScaleReport scale;
  Tessellation tessellation;
};
DataReference load_data_reference(const std::filesystem::path& dataset, double r0);

/// Resolves targets into an energy model. `data` is required when a
/// potential draws its target from the dataset.
EnergyModel materialize_model(const ExperimentConfig& config, const DataReference* data);

struct ExperimentOutcome {
  RunResult result;
  nlohmann::json summary;
};

/// Runs the configured chain and writes config.ini, trace.csv,
/// potential_trace.csv, acceptance.csv, configuration.csv, geometry.txt,
/// histogram CSVs and summary.json into output_dir. The potential trace and
/// the summary report each potential's statistic |T - s0| (the discrepancy
/// for histogram targets) next to the potential value, its square root.
ExperimentOutcome run_experiment(const ExperimentConfig& config);

/// summary.json with the runtime field removed, for determinism checks.
std::string summary_without_runtime(const nlohmann::json& summary);

}  // namespace glt
