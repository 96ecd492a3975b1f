#pragma once

#include <limits>
#include <string>
#include <vector>

#include "blindmimo/numerics.hpp"
#include "blindmimo/rng.hpp"
#include "blindmimo/types.hpp"
#include "blindmimo/waveform.hpp"

namespace blindmimo {

inline constexpr double kSpeedOfLight = 299792458.0;
/// Carrier that puts J0(2 pi f_d t) at 0.96/0.87 for 5 km/h and 0.87/0.53 for 10 km/h
/// at t = 5 ms / 10 ms (to two decimals).
inline constexpr double kDefaultCarrierHz = 2.5e9;
inline constexpr double kDefaultSymbolSpacingS = 5e-3;
/// Sentinel SNR meaning "no noise".
inline constexpr double kNoiselessSnr = std::numeric_limits<double>::infinity();

struct PowerDelayProfile {
  std::string name;
  std::vector<int> delays;     // ascending, distinct, in samples
  std::vector<double> powers;  // sums to one

  int taps() const { return static_cast<int>(delays.size()); }
  /// Delay of the strongest tap (smallest delay on ties).
  int dominant_delay() const;
};

/// Normalizes powers and validates ordering.
PowerDelayProfile make_pdp(std::string name, std::vector<int> delays, std::vector<double> powers);

/// Built-in names: "flat", "ped4", "ped4-dom<k>", "peda", "peda-dom<k>" (k = 0..3), "tdla30-4096".
/// Anything else is read as a JSON file of {delay_samples, power_linear} objects.
PowerDelayProfile pdp_by_name(const std::string& name_or_path);
PowerDelayProfile load_pdp_file(const std::string& path);

struct SpatialCorrelation {
  int n_r = 0;
  double coefficient = 0.0;
  RMatrix matrix;
  RMatrix sqrt_factor;  // symmetric square root
};

SpatialCorrelation exponential_corr(int n_r, double r);

struct TimeChannel {
  CMatrix h;  // taps x N_r, row i belongs to pdp.delays[i]
  PowerDelayProfile pdp;
};

TimeChannel sample_time_channel(const PowerDelayProfile& pdp, const SpatialCorrelation& corr,
                                Rng& rng);

double doppler_hz(double speed_kmh, double carrier_hz = kDefaultCarrierHz);
double temporal_coefficient(double f_d, int k, double t_sym);

/// H_k = eta H_0 + sqrt(1 - eta^2) diag(sqrt(rho)) G R^{1/2}.
TimeChannel evolve_channel(const TimeChannel& h0, double eta, const SpatialCorrelation& corr,
                           Rng& rng);

/// Spreads a channel's tap rows onto the tap grid of f (zero rows where the PDP has no tap).
CMatrix embed_channel(const TimeChannel& ch, const DftSubmatrix& f);

struct ReceivedMatrix {
  CMatrix y;
  double noise_variance = 0.0;
};

/// Noise variance for a per-user, per-antenna SNR in dB (unit signal power).
double noise_variance_for_snr(double snr_db);

/// Sum over users of diag(x_u) F H_u, each scaled by an amplitude from gains_db (default 0 dB).
CMatrix noiseless_signal(const std::vector<const FreqSymbolGrid*>& grids,
                         const std::vector<const TimeChannel*>& channels, const DftSubmatrix& f,
                         const std::vector<double>& gains_db = {});

CMatrix draw_noise(Rng& rng, int n, int n_r, double variance);

ReceivedMatrix apply_channel(const std::vector<const FreqSymbolGrid*>& grids,
                             const std::vector<const TimeChannel*>& channels,
                             const DftSubmatrix& f, double snr_db, Rng& rng,
                             const std::vector<double>& gains_db = {});

}  // namespace blindmimo
