#include "blindmimo/harness/results.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <stdexcept>

namespace blindmimo::harness {

using nlohmann::json;

Estimate estimate(const std::vector<double>& samples) {
  Estimate e;
  e.count = static_cast<int>(samples.size());
  if (samples.empty()) return e;
  double sum = 0.0;
  for (double s : samples) sum += s;
  e.mean = sum / e.count;
  if (e.count > 1) {
    double ss = 0.0;
    for (double s : samples) ss += (s - e.mean) * (s - e.mean);
    e.stderr_ = std::sqrt(ss / (e.count - 1) / e.count);
  }
  return e;
}

Estimate paired_difference(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("paired samples differ in length");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  return estimate(d);
}

double round_sig9(double x) {
  if (!std::isfinite(x) || x == 0.0) return x;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return std::strtod(buf, nullptr);
}

void ResultTable::add(ResultRow row) {
  row.value = round_sig9(row.value);
  if (row.stderr_) row.stderr_ = round_sig9(*row.stderr_);
  if (row.snr_db) row.snr_db = round_sig9(*row.snr_db);
  rows.push_back(std::move(row));
}

std::vector<const ResultRow*> ResultTable::find(const std::string& receiver,
                                                const std::string& metric) const {
  std::vector<const ResultRow*> out;
  for (const auto& r : rows)
    if (r.receiver == receiver && r.metric == metric) out.push_back(&r);
  return out;
}

namespace {

std::string format_double(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (std::isnan(x)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return buf;
}

// Labels are plain identifiers; quote anything that would break the CSV grammar.
std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

json double_to_json(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (std::isnan(x)) return "nan";
  return x;
}

double double_from_json(const json& v) {
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf") return INFINITY;
    if (s == "-inf") return -INFINITY;
    if (s == "nan") return NAN;
    throw std::runtime_error("bad numeric string '" + s + "'");
  }
  return v.get<double>();
}

}  // namespace

void write_csv(const ResultTable& table, std::ostream& out) {
  out << kCsvHeader << '\n';
  for (const auto& r : table.rows) {
    out << csv_field(r.experiment) << ',' << csv_field(r.receiver) << ','
        << (r.snr_db ? format_double(*r.snr_db) : "") << ',' << csv_field(r.metric) << ','
        << format_double(r.value) << ',' << (r.stderr_ ? format_double(*r.stderr_) : "") << ','
        << r.trials << ',' << r.seed << '\n';
  }
}

json table_to_json(const ResultTable& table) {
  json rows = json::array();
  for (const auto& r : table.rows) {
    rows.push_back({{"experiment", r.experiment},
                    {"receiver", r.receiver},
                    {"snr_db", r.snr_db ? double_to_json(*r.snr_db) : json(nullptr)},
                    {"metric", r.metric},
                    {"value", double_to_json(r.value)},
                    {"stderr", r.stderr_ ? double_to_json(*r.stderr_) : json(nullptr)},
                    {"trials", r.trials},
                    {"seed", r.seed}});
  }
  return json{{"metadata", table.metadata}, {"rows", rows}};
}

ResultTable table_from_json(const json& doc) {
  ResultTable t;
  if (doc.contains("metadata")) t.metadata = doc.at("metadata");
  for (const auto& r : doc.at("rows")) {
    ResultRow row;
    row.experiment = r.at("experiment").get<std::string>();
    row.receiver = r.at("receiver").get<std::string>();
    if (!r.at("snr_db").is_null()) row.snr_db = double_from_json(r.at("snr_db"));
    row.metric = r.at("metric").get<std::string>();
    row.value = double_from_json(r.at("value"));
    if (!r.at("stderr").is_null()) row.stderr_ = double_from_json(r.at("stderr"));
    row.trials = r.at("trials").get<int>();
    row.seed = r.at("seed").get<std::uint64_t>();
    t.rows.push_back(std::move(row));
  }
  return t;
}

void emit_results(const ResultTable& table, const std::string& path, OutputFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  if (format == OutputFormat::Csv)
    write_csv(table, out);
  else
    out << table_to_json(table).dump(2) << '\n';
  out.flush();
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

ResultTable load_results_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  json doc;
  try {
    in >> doc;
    return table_from_json(doc);
  } catch (const json::exception& e) {
    throw std::runtime_error("malformed results in '" + path + "': " + e.what());
  }
}

}  // namespace blindmimo::harness
