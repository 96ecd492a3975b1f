#include "blindmimo/harness/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "blindmimo/waveform.hpp"

namespace blindmimo::harness {

using nlohmann::json;

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::BerSweep: return "ber-sweep";
    case ExperimentKind::TapError: return "tap-error";
    case ExperimentKind::Temporal: return "temporal";
    case ExperimentKind::Utilization: return "utilization";
  }
  return "unknown";
}

namespace {

ExperimentKind kind_from_string(const std::string& s, const std::string& path) {
  if (s == "ber-sweep" || s == "ber") return ExperimentKind::BerSweep;
  if (s == "tap-error") return ExperimentKind::TapError;
  if (s == "temporal") return ExperimentKind::Temporal;
  if (s == "utilization") return ExperimentKind::Utilization;
  throw ConfigError(path, "unknown experiment '" + s + "'");
}

std::string init_name(InitMethod m) {
  switch (m) {
    case InitMethod::Variance: return "variance";
    case InitMethod::Circularity: return "circularity";
    case InitMethod::GivenTap: return "given-tap";
  }
  return "";
}

InitMethod init_from_string(const std::string& s, const std::string& path) {
  if (s == "variance") return InitMethod::Variance;
  if (s == "circularity") return InitMethod::Circularity;
  if (s == "given-tap") return InitMethod::GivenTap;
  throw ConfigError(path, "expected variance, circularity or given-tap");
}

std::string derotation_name(Derotation d) {
  switch (d) {
    case Derotation::InLoop: return "in-loop";
    case Derotation::LambdaOnly: return "lambda-only";
    case Derotation::Cluster: return "cluster";
  }
  return "";
}

Derotation derotation_from_string(const std::string& s, const std::string& path) {
  if (s == "in-loop") return Derotation::InLoop;
  if (s == "lambda-only") return Derotation::LambdaOnly;
  if (s == "cluster") return Derotation::Cluster;
  throw ConfigError(path, "expected in-loop, lambda-only or cluster");
}

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

std::string index_path(const std::string& path, std::size_t i) {
  return path + "[" + std::to_string(i) + "]";
}

// Typed reads of one JSON object; finish() rejects keys that were never read.
class ObjectReader {
 public:
  ObjectReader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(path_, "expected an object");
  }

  const json* find(const std::string& key) {
    seen_.insert(key);
    const auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  std::string field(const std::string& key) const { return join(path_, key); }

  void read(const std::string& key, int& out) {
    if (const json* v = find(key)) out = as_int(*v, field(key));
  }
  void read(const std::string& key, double& out) {
    if (const json* v = find(key)) out = as_double(*v, field(key));
  }
  void read(const std::string& key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) throw ConfigError(field(key), "expected true or false");
      out = v->get<bool>();
    }
  }
  void read(const std::string& key, std::string& out) {
    if (const json* v = find(key)) out = as_string(*v, field(key));
  }
  void read(const std::string& key, std::uint64_t& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<long long>() >= 0))
        throw ConfigError(field(key), "expected a nonnegative integer");
      out = v->get<std::uint64_t>();
    }
  }
  void read(const std::string& key, std::vector<int>& out) {
    if (const json* v = find(key)) {
      const auto p = field(key);
      if (!v->is_array()) throw ConfigError(p, "expected an array of integers");
      out.clear();
      for (std::size_t i = 0; i < v->size(); ++i) out.push_back(as_int((*v)[i], index_path(p, i)));
    }
  }
  void read(const std::string& key, std::vector<double>& out) {
    if (const json* v = find(key)) {
      const auto p = field(key);
      if (!v->is_array()) throw ConfigError(p, "expected an array of numbers");
      out.clear();
      for (std::size_t i = 0; i < v->size(); ++i) out.push_back(as_double((*v)[i], index_path(p, i)));
    }
  }
  void read(const std::string& key, std::vector<std::string>& out) {
    if (const json* v = find(key)) {
      const auto p = field(key);
      out.clear();
      if (v->is_string()) {
        out.push_back(v->get<std::string>());
        return;
      }
      if (!v->is_array()) throw ConfigError(p, "expected a string or an array of strings");
      for (std::size_t i = 0; i < v->size(); ++i) out.push_back(as_string((*v)[i], index_path(p, i)));
    }
  }

  void finish() const {
    for (const auto& [key, value] : obj_.items())
      if (!seen_.count(key)) throw ConfigError(field(key), "unknown key");
  }

  static int as_int(const json& v, const std::string& path) {
    if (!v.is_number_integer()) throw ConfigError(path, "expected an integer");
    const auto x = v.get<long long>();
    if (x < -1000000000LL || x > 1000000000LL) throw ConfigError(path, "integer out of range");
    return static_cast<int>(x);
  }
  // Numbers, or the string "inf" for a noiseless point.
  static double as_double(const json& v, const std::string& path) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string() && v.get<std::string>() == "inf") return kNoiselessSnr;
    throw ConfigError(path, "expected a number");
  }
  static std::string as_string(const json& v, const std::string& path) {
    if (!v.is_string()) throw ConfigError(path, "expected a string");
    return v.get<std::string>();
  }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

json number_or_inf(double x) {
  if (std::isinf(x) && x > 0) return "inf";
  return x;
}

bool known_receiver(const std::string& r) {
  return r == "blind" || r == "mrc-linear" || r == "mrc-fft" || r == "mmse";
}

}  // namespace

std::vector<PowerDelayProfile> ExperimentConfig::profiles() const {
  std::vector<PowerDelayProfile> out;
  for (int u = 0; u < users; ++u) {
    const std::size_t i = pdp.size() == 1 ? 0 : static_cast<std::size_t>(u);
    try {
      out.push_back(pdp_by_name(pdp.at(i)));
    } catch (const InvalidArgument& e) {
      throw ConfigError(pdp.size() == 1 ? "pdp" : index_path("pdp", i), e.what());
    }
  }
  return out;
}

std::vector<int> ExperimentConfig::tap_grid() const {
  if (!delays.empty()) return delays;
  int max_delay = 0;
  for (const auto& p : profiles()) max_delay = std::max(max_delay, p.delays.back());
  std::vector<int> grid(static_cast<std::size_t>(max_delay + 1));
  for (int d = 0; d <= max_delay; ++d) grid[static_cast<std::size_t>(d)] = d;
  return grid;
}

int ExperimentConfig::baseline_l_max() const {
  if (baseline.l_max > 0) return baseline.l_max;
  int max_delay = 0;
  for (const auto& p : profiles()) max_delay = std::max(max_delay, p.delays.back());
  return max_delay + 1;
}

BlindConfig ExperimentConfig::blind_config() const {
  BlindConfig b;
  b.iterations = blind.iterations;
  b.mu = blind.mu;
  b.derotate_at = blind.derotate_at;
  b.qam_order = m;
  b.delays = tap_grid();
  b.init = blind.init;
  b.derotation = blind.derotation;
  b.histogram_bins = blind.histogram_bins;
  b.mixing_fallback = blind.mixing_fallback;
  if (users == 1)
    b.pilots = {rotational_pilots(n, blind.rotational_pilots, m)};
  else
    b.pilots = multiuser_rotational_pilots(n, users, m);
  // The harness knows the true profiles, so the given-tap mode gets the real dominant delay.
  for (const auto& p : profiles()) b.given_taps.push_back(p.dominant_delay());
  return b;
}

void ExperimentConfig::validate() const {
  if (name.empty()) throw ConfigError("name", "must not be empty");
  if (n < 8) throw ConfigError("n", "must be at least 8");
  if (n > 1024 && !allow_large)
    throw ConfigError("n", "sizes above 1024 need allow_large (CLI: --large)");
  if (n_r < 1) throw ConfigError("n_r", "must be positive");
  if (!is_supported_order(m)) throw ConfigError("m", "supported orders are 4, 16, 64 and 256");
  if (users < 1 || users > 16) throw ConfigError("users", "must lie in 1..16");
  if (pdp.empty()) throw ConfigError("pdp", "must not be empty");
  if (pdp.size() != 1 && static_cast<int>(pdp.size()) != users)
    throw ConfigError("pdp", "give one profile or one per user");
  const auto profs = profiles();
  const auto grid = tap_grid();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid[i] < 0 || grid[i] >= n) throw ConfigError(index_path("delays", i), "delay outside 0..n-1");
    if (i > 0 && grid[i] <= grid[i - 1])
      throw ConfigError(index_path("delays", i), "delays must be strictly ascending");
  }
  for (std::size_t u = 0; u < profs.size(); ++u)
    for (int d : profs[u].delays) {
      if (d >= n) throw ConfigError("pdp", "profile delay " + std::to_string(d) + " exceeds n");
      if (!std::binary_search(grid.begin(), grid.end(), d))
        throw ConfigError("delays", "profile delay " + std::to_string(d) + " is not on the tap grid");
    }
  if (!(correlation >= 0.0 && correlation < 1.0)) throw ConfigError("correlation", "must lie in [0, 1)");
  if (snr_db.empty()) throw ConfigError("snr_db", "must not be empty");
  for (std::size_t i = 0; i < snr_db.size(); ++i)
    if (std::isnan(snr_db[i]) || (std::isinf(snr_db[i]) && snr_db[i] < 0))
      throw ConfigError(index_path("snr_db", i), "must be a number or \"inf\"");
  if (!gains_db.empty() && static_cast<int>(gains_db.size()) != users)
    throw ConfigError("gains_db", "give one gain per user");
  if (trials < 1) throw ConfigError("trials", "must be at least 1");

  // Blind receiver.
  if (blind.iterations < 1) throw ConfigError("blind.iterations", "must be at least 1");
  if (!(blind.mu > 0.0 && blind.mu < 1.0)) throw ConfigError("blind.mu", "must lie in (0, 1)");
  if (blind.derotate_at < 1 || blind.derotate_at >= blind.iterations)
    throw ConfigError("blind.derotate_at", "must lie in 1..iterations-1");
  if (blind.rotational_pilots < 1 || blind.rotational_pilots > n)
    throw ConfigError("blind.rotational_pilots", "must lie in 1..n");
  if (users > 1 && blind.rotational_pilots != 1)
    throw ConfigError("blind.rotational_pilots", "multi-user runs use one pilot per user");
  if (users > 1 && blind.derotation == Derotation::Cluster)
    throw ConfigError("blind.derotation", "cluster de-rotation is single-user only");
  if (users > 1 && blind.init == InitMethod::Variance)
    throw ConfigError("blind.init", "multi-user runs use circularity or given-tap");
  if (blind.histogram_bins < 2) throw ConfigError("blind.histogram_bins", "must be at least 2");
  if (users > 1 && users * static_cast<int>(grid.size()) > n_r)
    throw ConfigError("users", "users times taps must not exceed n_r");
  for (std::size_t i = 0; i < blind.report_at.size(); ++i) {
    const int k = blind.report_at[i];
    if (blind.derotation != Derotation::InLoop)
      throw ConfigError("blind.report_at", "needs the in-loop schedule");
    if (k < blind.derotate_at || k > blind.iterations)
      throw ConfigError(index_path("blind.report_at", i), "must lie in derotate_at..iterations");
  }

  // Baseline.
  const int l_max = baseline_l_max();
  if (baseline.l_max < 0) throw ConfigError("baseline.l_max", "must be nonnegative");
  auto check_total = [&](int total, const std::string& path) {
    if (total < users || total > n || total % users != 0)
      throw ConfigError(path, "must be a multiple of users no larger than n");
    if (total / users < std::max(l_max, 2))
      throw ConfigError(path, "each user needs at least max(l_max, 2) pilots");
  };
  check_total(baseline.pilots, "baseline.pilots");

  switch (kind) {
    case ExperimentKind::BerSweep:
      if (receivers.empty()) throw ConfigError("receivers", "must not be empty");
      for (std::size_t i = 0; i < receivers.size(); ++i) {
        const auto& r = receivers[i];
        if (!known_receiver(r))
          throw ConfigError(index_path("receivers", i), "unknown receiver '" + r + "'");
        if (users > 1 && (r == "mrc-linear" || r == "mrc-fft"))
          throw ConfigError(index_path("receivers", i), "MRC receivers are single-user only");
        if (std::count(receivers.begin(), receivers.end(), r) > 1)
          throw ConfigError(index_path("receivers", i), "listed twice");
      }
      break;
    case ExperimentKind::TapError:
      if (estimators.empty()) throw ConfigError("estimators", "must not be empty");
      for (std::size_t i = 0; i < estimators.size(); ++i) {
        const auto& e = estimators[i];
        if (e != "variance" && e != "circularity")
          throw ConfigError(index_path("estimators", i), "expected variance or circularity");
      }
      break;
    case ExperimentKind::Temporal:
      if (users != 1) throw ConfigError("users", "temporal runs are single-user");
      if (temporal.speeds_kmh.empty()) throw ConfigError("temporal.speeds_kmh", "must not be empty");
      for (std::size_t i = 0; i < temporal.speeds_kmh.size(); ++i)
        if (!(temporal.speeds_kmh[i] >= 0.0 && std::isfinite(temporal.speeds_kmh[i])))
          throw ConfigError(index_path("temporal.speeds_kmh", i), "must be finite and nonnegative");
      if (temporal.times_ms.empty()) throw ConfigError("temporal.times_ms", "must not be empty");
      for (std::size_t i = 0; i < temporal.times_ms.size(); ++i)
        if (!(temporal.times_ms[i] > 0.0 && std::isfinite(temporal.times_ms[i])))
          throw ConfigError(index_path("temporal.times_ms", i), "must be positive");
      if (!(temporal.carrier_hz > 0.0)) throw ConfigError("temporal.carrier_hz", "must be positive");
      if (temporal.cold_iterations <= blind.derotate_at)
        throw ConfigError("temporal.cold_iterations", "must exceed blind.derotate_at");
      if (temporal.max_iterations < 1) throw ConfigError("temporal.max_iterations", "must be at least 1");
      break;
    case ExperimentKind::Utilization:
      if (utilization.pilot_ladder.empty())
        throw ConfigError("utilization.pilot_ladder", "must not be empty");
      for (std::size_t i = 0; i < utilization.pilot_ladder.size(); ++i) {
        const auto p = index_path("utilization.pilot_ladder", i);
        check_total(utilization.pilot_ladder[i], p);
        if (i > 0 && utilization.pilot_ladder[i] <= utilization.pilot_ladder[i - 1])
          throw ConfigError(p, "ladder must be strictly ascending");
      }
      break;
  }
}

ExperimentConfig default_config(ExperimentKind kind) {
  ExperimentConfig c;
  c.kind = kind;
  c.name = to_string(kind);
  switch (kind) {
    case ExperimentKind::BerSweep:
      break;
    case ExperimentKind::TapError:
      c.trials = 500;
      break;
    case ExperimentKind::Temporal:
      c.correlation = 0.7;
      c.blind.iterations = 20;
      break;
    case ExperimentKind::Utilization:
      c.utilization.pilot_ladder = {32, 64, 104, 128, 160, 208, 256, 320, 416, 512};
      break;
  }
  return c;
}

ExperimentConfig parse_config(const json& doc, std::optional<ExperimentKind> expected) {
  ObjectReader top(doc, "");
  std::string kind_name;
  top.read("experiment", kind_name);
  if (kind_name.empty() && !expected) throw ConfigError("experiment", "required");
  const ExperimentKind kind = kind_name.empty() ? *expected : kind_from_string(kind_name, "experiment");
  if (expected && kind != *expected)
    throw ConfigError("experiment", "config is for '" + to_string(kind) + "', not '" + to_string(*expected) + "'");
  ExperimentConfig c = default_config(kind);
  top.read("name", c.name);
  top.read("seed", c.seed);
  top.read("n", c.n);
  top.read("n_r", c.n_r);
  top.read("m", c.m);
  top.read("users", c.users);
  top.read("pdp", c.pdp);
  top.read("delays", c.delays);
  top.read("correlation", c.correlation);
  top.read("snr_db", c.snr_db);
  top.read("gains_db", c.gains_db);
  top.read("trials", c.trials);
  top.read("receivers", c.receivers);
  top.read("estimators", c.estimators);
  top.read("allow_large", c.allow_large);

  if (const json* b = top.find("blind")) {
    ObjectReader r(*b, "blind");
    r.read("iterations", c.blind.iterations);
    r.read("mu", c.blind.mu);
    r.read("derotate_at", c.blind.derotate_at);
    std::string s;
    r.read("init", s);
    if (!s.empty()) c.blind.init = init_from_string(s, "blind.init");
    s.clear();
    r.read("derotation", s);
    if (!s.empty()) c.blind.derotation = derotation_from_string(s, "blind.derotation");
    r.read("rotational_pilots", c.blind.rotational_pilots);
    r.read("histogram_bins", c.blind.histogram_bins);
    r.read("mixing_fallback", c.blind.mixing_fallback);
    r.read("report_at", c.blind.report_at);
    r.finish();
  }
  if (const json* b = top.find("baseline")) {
    ObjectReader r(*b, "baseline");
    r.read("pilots", c.baseline.pilots);
    r.read("l_max", c.baseline.l_max);
    r.finish();
  }
  if (const json* t = top.find("temporal")) {
    ObjectReader r(*t, "temporal");
    r.read("speeds_kmh", c.temporal.speeds_kmh);
    r.read("times_ms", c.temporal.times_ms);
    r.read("carrier_hz", c.temporal.carrier_hz);
    r.read("cold_iterations", c.temporal.cold_iterations);
    r.read("max_iterations", c.temporal.max_iterations);
    r.finish();
  }
  if (const json* u = top.find("utilization")) {
    ObjectReader r(*u, "utilization");
    r.read("pilot_ladder", c.utilization.pilot_ladder);
    r.finish();
  }
  top.finish();
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path, std::optional<ExperimentKind> expected) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ConfigError("", "malformed JSON in '" + path + "': " + e.what());
  }
  return parse_config(doc, expected);
}

json to_json(const ExperimentConfig& c) {
  json snr = json::array();
  for (double s : c.snr_db) snr.push_back(number_or_inf(s));
  return json{
      {"experiment", to_string(c.kind)},
      {"name", c.name},
      {"seed", c.seed},
      {"n", c.n},
      {"n_r", c.n_r},
      {"m", c.m},
      {"users", c.users},
      {"pdp", c.pdp},
      {"delays", c.tap_grid()},
      {"correlation", c.correlation},
      {"snr_db", snr},
      {"gains_db", c.gains_db},
      {"trials", c.trials},
      {"receivers", c.receivers},
      {"estimators", c.estimators},
      {"allow_large", c.allow_large},
      {"blind",
       {{"iterations", c.blind.iterations},
        {"mu", c.blind.mu},
        {"derotate_at", c.blind.derotate_at},
        {"init", init_name(c.blind.init)},
        {"derotation", derotation_name(c.blind.derotation)},
        {"rotational_pilots", c.blind.rotational_pilots},
        {"histogram_bins", c.blind.histogram_bins},
        {"mixing_fallback", c.blind.mixing_fallback},
        {"report_at", c.blind.report_at}}},
      {"baseline", {{"pilots", c.baseline.pilots}, {"l_max", c.baseline_l_max()}}},
      {"temporal",
       {{"speeds_kmh", c.temporal.speeds_kmh},
        {"times_ms", c.temporal.times_ms},
        {"carrier_hz", c.temporal.carrier_hz},
        {"cold_iterations", c.temporal.cold_iterations},
        {"max_iterations", c.temporal.max_iterations}}},
      {"utilization", {{"pilot_ladder", c.utilization.pilot_ladder}}},
  };
}

}  // namespace blindmimo::harness
