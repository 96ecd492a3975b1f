#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "blindmimo/blind_rx.hpp"
#include "blindmimo/channel.hpp"

namespace blindmimo::harness {

/// Invalid configuration; `field()` is a dotted path such as "blind.mu" or "snr_db[2]".
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error(field.empty() ? message : field + ": " + message),
        field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

enum class ExperimentKind { BerSweep, TapError, Temporal, Utilization };

std::string to_string(ExperimentKind kind);

struct BlindSettings {
  int iterations = 10;
  double mu = 0.1;
  int derotate_at = 4;
  InitMethod init = InitMethod::Variance;
  Derotation derotation = Derotation::InLoop;
  int rotational_pilots = 1;  // per user; only single-user runs may use more than one
  int histogram_bins = 64;
  bool mixing_fallback = false;
  /// Extra iteration counts reported from the same run (in-loop schedule only).
  std::vector<int> report_at;
};

struct BaselineSettings {
  int pilots = 104;  // total across users
  int l_max = 0;     // 0: largest PDP delay + 1
};

struct TemporalSettings {
  std::vector<double> speeds_kmh{5.0, 10.0};
  std::vector<double> times_ms{5.0, 10.0};
  double carrier_hz = kDefaultCarrierHz;
  int cold_iterations = 20;
  int max_iterations = 20;
};

struct UtilizationSettings {
  std::vector<int> pilot_ladder;  // baseline totals, ascending
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::BerSweep;
  std::string name;  // seeds the random streams and labels every row
  std::uint64_t seed = 1;
  int n = 1024;
  int n_r = 64;
  int m = 64;
  int users = 1;
  std::vector<std::string> pdp{"peda"};  // one name per user, or one shared by all
  std::vector<int> delays;               // blind tap grid; empty means 0..max PDP delay
  double correlation = 0.0;
  std::vector<double> snr_db{0, 2, 4, 6, 8, 10};
  std::vector<double> gains_db;  // per user, empty for equal power
  int trials = 200;
  std::vector<std::string> receivers{"blind", "mrc-fft"};
  std::vector<std::string> estimators{"variance", "circularity"};
  BlindSettings blind;
  BaselineSettings baseline;
  TemporalSettings temporal;
  UtilizationSettings utilization;
  bool allow_large = false;

  /// Per-user profiles, resolved and validated.
  std::vector<PowerDelayProfile> profiles() const;
  std::vector<int> tap_grid() const;
  int baseline_l_max() const;
  /// Receiver configuration with pilots laid out for this experiment.
  BlindConfig blind_config() const;
  /// Throws ConfigError with a field path.
  void validate() const;
};

/// Parses and validates; unknown keys are rejected. `expected` supplies the experiment kind
/// when the document omits it and must agree with it otherwise.
ExperimentConfig parse_config(const nlohmann::json& doc,
                              std::optional<ExperimentKind> expected = std::nullopt);
ExperimentConfig load_config(const std::string& path,
                             std::optional<ExperimentKind> expected = std::nullopt);
/// Full echo of the effective configuration (all fields, defaults included).
nlohmann::json to_json(const ExperimentConfig& cfg);

/// Default configuration for an experiment kind, as used by the CLI without --config.
ExperimentConfig default_config(ExperimentKind kind);

}  // namespace blindmimo::harness
