#pragma once

#include <vector>

#include "blindmimo/rng.hpp"
#include "blindmimo/types.hpp"
#include "blindmimo/waveform.hpp"

namespace blindmimo {

/// Disjoint, equi-spaced pilot sets of the conventional receivers, one per user.
struct PilotGrid {
  int n = 0;
  std::vector<PilotSpec> users;

  int total() const;
  double density() const { return static_cast<double>(total()) / n; }
  /// Subcarriers user `u` leaves empty because other users' pilots sit there.
  std::vector<int> muted_for(int u) const;
};

/// `total` pilots at floor((k + 1/2) N / total); user u takes every users-th slot starting
/// at u. Pilot symbols are random unit-energy QPSK drawn from rng.
PilotGrid baseline_pilot_grid(int n, int total, int users, Rng& rng);

/// Per-pilot LS channel rows y_p / x(p). Rows follow pilots.positions.
CMatrix ls_pilot_estimates(const CMatrix& y, const PilotSpec& pilots);

/// Piecewise-linear interpolation per antenna, flat beyond the outermost pilots.
CMatrix interpolate_linear(const CMatrix& estimates, const std::vector<int>& positions, int n);

/// Delay-domain interpolation: least-squares fit of delays 0..l_max-1 to the pilot estimates,
/// then evaluation on all n subcarriers. With pilot spacing dividing n this equals inverse DFT,
/// truncation to l_max taps, and forward DFT.
CMatrix interpolate_fft(const CMatrix& estimates, const std::vector<int>& positions, int n, int l_max);

/// Per-subcarrier MRC with the given frequency-domain channel (N x N_r).
CVector mrc_combine(const CMatrix& y, const CMatrix& h_f);

/// Per subcarrier n with H_n = [h_1(n) ... h_U(n)] (N_r x U):
///   x(n) = (H_n^H H_n + sigma2 I)^{-1} H_n^H y_n,
/// and, when `unbiased`, each entry divided by the diagonal of (H^H H + sigma2 I)^{-1} H^H H.
CMatrix mmse_equalize_multi(const CMatrix& y, const std::vector<CMatrix>& h_f, double sigma2,
                            bool unbiased = true);

enum class Interpolation { Linear, Fft };

/// LS at pilots, interpolation, then MRC.
CVector baseline_decode_single(const CMatrix& y, const PilotSpec& pilots, Interpolation interp,
                               int l_max);

/// LS at each user's pilots, FFT interpolation, then MMSE. Returns N x U.
CMatrix baseline_decode_multi(const CMatrix& y, const PilotGrid& grid, double sigma2, int l_max,
                              bool unbiased = true);

}  // namespace blindmimo
