#pragma once

#include <string>
#include <vector>

#include "blindmimo/harness/config.hpp"
#include "blindmimo/harness/results.hpp"

namespace blindmimo::harness {

/// Per-trial values of one receiver or estimator: values[snr_index][trial].
struct TrialCurve {
  std::string name;
  std::vector<std::vector<double>> values;
  std::vector<int> failures;  // per SNR point: decodes that threw

  Estimate at(std::size_t snr_index) const { return estimate(values.at(snr_index)); }
};

struct BerSweepOutcome {
  ResultTable table;
  std::vector<double> snr_db;
  std::vector<TrialCurve> curves;  // "blind", "blind-k<k>", then baselines in config order

  const TrialCurve& curve(const std::string& name) const;
};

struct TapErrorOutcome {
  ResultTable table;
  std::vector<double> snr_db;
  /// Indicator of a wrong dominant tap; names are the estimator, with "-u<k>" for multi-user.
  std::vector<TrialCurve> curves;

  const TrialCurve& curve(const std::string& name) const;
};

struct TemporalEntry {
  double speed_kmh = 0.0;
  double time_ms = 0.0;  // 0 for the cold-start symbol
  double eta = 1.0;
  int iterations = 0;    // reported count (configured count for the cold start)
  bool matched = false;  // parity with the baseline reached within the iteration cap
};

struct TemporalOutcome {
  ResultTable table;
  std::vector<TemporalEntry> entries;
  /// Smallest observed cold-start count at parity, or 0 when none was reached.
  int cold_min_iterations = 0;
};

struct UtilizationOutcome {
  ResultTable table;
  double blind_utilization = 0.0;
  bool found = false;
  int matched_pilots = 0;
  double matched_density = 0.0;
  double baseline_utilization = 0.0;
};

/// Parity test used throughout: mean(a - b) <= 3 standard errors of the paired difference.
bool within_three_se(const std::vector<double>& a, const std::vector<double>& b);

BerSweepOutcome run_ber_sweep(const ExperimentConfig& cfg);
TapErrorOutcome run_tap_error(const ExperimentConfig& cfg);
TemporalOutcome run_temporal(const ExperimentConfig& cfg);
UtilizationOutcome run_utilization(const ExperimentConfig& cfg);

/// Dispatches on cfg.kind.
ResultTable run_experiment(const ExperimentConfig& cfg);

/// Violations of the experiment's built-in expectations, read back from the table.
std::vector<std::string> check_table(const ExperimentConfig& cfg, const ResultTable& table);

}  // namespace blindmimo::harness
