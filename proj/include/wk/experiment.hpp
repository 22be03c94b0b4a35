#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "wk/estimates.hpp"
#include "wk/geometry.hpp"
#include "wk/pde.hpp"
#include "wk/profiles.hpp"

namespace wk {

inline constexpr int kSchemaVersion = 1;

struct LadderSpec {
  double r_min = 0.01;
  double R = 1.0;     // upper limit of the decay integrals; M(R) is measured here
  int rungs = 12;
};

struct ResolutionSpec {
  double h_ang = 0.02;          // sphere sections for Lambda
  int capacity_nodes = 24;      // shell capacities (capacity and density Lambda)
  int cone_nodes = 16;
  int norm_nodes = 12;          // quadrature of the L_{nu,eps} norm
  int mu_nodes = 6;
};

struct PdeSpec {
  int cells_per_radius = 200;
  BoundaryData boundary;
  double forcing = 0.0;
  bool dump_solution = false;
};

struct ExperimentConfig {
  int schema_version = kSchemaVersion;
  std::string name;
  std::string description;
  DomainSpec domain;
  Coefficient coefficient;
  double p = 2.0;
  double alpha = 2.0;
  double theta = 2.0;
  double eps = 0.5;
  double delta = 0.1;
  double nu_margin = 1.0;
  std::vector<double> k_grid{1.0};
  QMethod q_method = QMethod::Auto;
  LadderSpec ladder;
  ResolutionSpec resolution;
  std::vector<Estimate> estimates;
  std::optional<PdeSpec> pde;
  std::optional<Example> catalog;
  int law_checks = 0;           // random capacity-law configurations, seeded
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
};

// Throws ConfigError with a message naming the offending field.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig parse_config_text(const std::string& text);
// A file path, or the name of a bundled example.
ExperimentConfig load_config(const std::string& path_or_name);

struct BundledExample {
  const char* name;
  const char* description;
  const char* json;
};

const std::vector<BundledExample>& bundled_examples();
const BundledExample* find_bundled(const std::string& name);

const char* to_string(Example e);
std::optional<Example> example_from_string(const std::string& s);

struct StageRecord {
  std::string name;
  std::string status;   // "ok", "failed", "skipped"
  std::string error;
};

struct RunResult {
  std::vector<StageRecord> stages;
  nlohmann::json summary;
  bool ok() const;
};

// Runs the pipeline geometry -> capacity/spectral -> profiles -> estimates ->
// pde -> verify and writes the bundle into `out`. Stage failures are recorded,
// never thrown; outputs are byte-identical for identical configs.
RunResult run_experiment(const ExperimentConfig& config, const std::filesystem::path& out);

struct CompareResult {
  std::vector<double> ladder;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> ratios;  // per column, B / A per rung (NaN where undefined)
  std::string table;                        // CSV
};

// Rung-wise ratios of matching profile, bound and measurement columns.
// Throws PreconditionError when the ladders differ.
CompareResult compare_bundles(const std::filesystem::path& a, const std::filesystem::path& b);

}  // namespace wk
