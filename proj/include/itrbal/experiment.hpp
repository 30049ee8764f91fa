#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "itrbal/dataset.hpp"
#include "itrbal/simulation.hpp"
#include "itrbal/tuning.hpp"

namespace itrbal {

/// Registered weighting/rule methods for benchmark runs.
std::vector<std::string> registered_methods();
bool is_registered_method(const std::string& name);

struct ExperimentConfig {
  std::vector<ScenarioConfig> scenarios;  ///< per-scenario seed is ignored
  std::vector<std::string> methods = {"balance", "overlap", "importance", "ipw"};
  int replications = 50;
  TuningConfig tuning;
  std::string output_dir = ".";
  int m_test = 100000;
  std::uint64_t master_seed = 1;
  /// balance_fixed hyperparameters
  double fixed_alpha = 0.5;
  double fixed_lambda = 1.0;
  double learn_ridge = 1e-4;
  int workers = 0;  ///< 0: ITRBAL_WORKERS env var, else hardware concurrency
};

void validate(const ExperimentConfig& cfg);

struct ResultRow {
  std::string scenario;
  double kappa = 0.0;
  std::string method;
  int replication = 0;
  double regret = std::numeric_limits<double>::quiet_NaN();
  double accuracy = std::numeric_limits<double>::quiet_NaN();
  double value = std::numeric_limits<double>::quiet_NaN();
  double value2 = std::numeric_limits<double>::quiet_NaN();
  double ess = std::numeric_limits<double>::quiet_NaN();
  double alpha_selected = std::numeric_limits<double>::quiet_NaN();
  double lambda_selected = std::numeric_limits<double>::quiet_NaN();
  double wall_time_ms = 0.0;
  bool failed = false;
  std::string error;
};

struct ExperimentResult {
  std::vector<ResultRow> rows;
  int n_failed = 0;
};

/// Runs the full benchmark: generate, weight with every method, learn,
/// evaluate on a per-scenario shared target test sample against the
/// grid-searched optimal linear rule. Rows come back in deterministic
/// (scenario, replication, method) order regardless of scheduling;
/// per-replication failures are recorded as failed rows and do not stop
/// the run.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// Computes one method on one generated dataset (used by the CLI too).
WeightSolution compute_method_weights(const std::string& method, const Dataset& d,
                                      const KernelSpec& spec, const OracleFunctions* oracle,
                                      const TuningConfig& tuning, double fixed_alpha,
                                      double fixed_lambda);

/// results CSV (one row per scenario x method x replication); all numeric
/// cells carry full precision.
void write_results_csv(const std::vector<ResultRow>& rows, const std::string& path);
std::vector<ResultRow> read_results_csv(const std::string& path);

/// Aggregate CSV (per-cell median and interquartile range), a short text
/// summary, and a plotting script next to the data. Idempotent.
void emit_report(const std::vector<ResultRow>& rows, const std::string& out_dir);

}  // namespace itrbal
