#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

namespace blindmimo::harness {

/// Mean and standard error of a sample (standard error 0 for fewer than two values).
struct Estimate {
  double mean = 0.0;
  double stderr_ = 0.0;
  int count = 0;
};

Estimate estimate(const std::vector<double>& samples);
/// Estimate of the per-trial difference a - b for paired samples of equal length.
Estimate paired_difference(const std::vector<double>& a, const std::vector<double>& b);

/// Values are rounded to nine significant digits on insertion, so CSV and JSON agree
/// and a JSON round trip is exact.
double round_sig9(double x);

struct ResultRow {
  std::string experiment;
  std::string receiver;
  std::optional<double> snr_db;
  std::string metric;
  double value = 0.0;
  std::optional<double> stderr_;
  int trials = 0;
  std::uint64_t seed = 0;

  bool operator==(const ResultRow&) const = default;
};

struct ResultTable {
  std::vector<ResultRow> rows;
  nlohmann::json metadata = nlohmann::json::object();

  void add(ResultRow row);
  /// Rows matching receiver and metric, in insertion order.
  std::vector<const ResultRow*> find(const std::string& receiver, const std::string& metric) const;
};

enum class OutputFormat { Csv, Json };

inline constexpr const char* kCsvHeader = "experiment,receiver,snr_db,metric,value,stderr,trials,seed";

void write_csv(const ResultTable& table, std::ostream& out);
nlohmann::json table_to_json(const ResultTable& table);
ResultTable table_from_json(const nlohmann::json& doc);

/// Writes the table to `path`; failures are reported with the path.
void emit_results(const ResultTable& table, const std::string& path, OutputFormat format);
ResultTable load_results_json(const std::string& path);

}  // namespace blindmimo::harness
