#pragma once

// Instance builders and comparison helpers shared by the unit and acceptance tests.

#include <cmath>
#include <vector>

#include "blindmimo/blind_rx.hpp"
#include "blindmimo/channel.hpp"
#include "blindmimo/numerics.hpp"
#include "blindmimo/rng.hpp"
#include "blindmimo/waveform.hpp"

namespace testsupport {

using namespace blindmimo;

inline double rel_err(const CMatrix& a, const CMatrix& b) {
  const double scale = std::max(b.norm(), 1e-300);
  return (a - b).norm() / scale;
}

inline CMatrix random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  CMatrix m(rows, cols);
  fill_complex_normal(rng, m);
  return m;
}

inline CVector random_vector(Rng& rng, Eigen::Index n) {
  CMatrix m = random_matrix(rng, n, 1);
  return m.col(0);
}

/// One or more users on a shared tap grid, noiseless unless snr_db is finite.
struct Instance {
  DftSubmatrix f;
  std::vector<FreqSymbolGrid> grids;
  std::vector<TimeChannel> channels;
  CMatrix h_true;  // stacked per user on the grid: user u occupies rows u*L..u*L+L-1
  ReceivedMatrix y;

  const CMatrix h_user(int u) const { return h_true.middleRows(u * f.taps(), f.taps()); }
  CMatrix x_true() const {
    CMatrix x(f.n, static_cast<Eigen::Index>(grids.size()));
    for (std::size_t u = 0; u < grids.size(); ++u) x.col(static_cast<Eigen::Index>(u)) = grids[u].symbols;
    return x;
  }
};

inline Instance make_instance(Rng& rng, int n, int n_r, int m, const std::vector<PowerDelayProfile>& pdps,
                              const std::vector<PilotSpec>& pilots, double snr_db = kNoiselessSnr,
                              double corr = 0.0) {
  Instance inst;
  std::vector<int> delays;
  for (const auto& p : pdps)
    for (int d : p.delays) delays.push_back(d);
  std::sort(delays.begin(), delays.end());
  delays.erase(std::unique(delays.begin(), delays.end()), delays.end());
  inst.f = build_dft_submatrix(n, delays);
  const SpatialCorrelation sc = exponential_corr(n_r, corr);
  const int users = static_cast<int>(pdps.size());
  inst.h_true = CMatrix::Zero(users * inst.f.taps(), n_r);
  for (int u = 0; u < users; ++u) {
    std::vector<int> muted;
    for (int v = 0; v < users; ++v)
      if (v != u)
        for (int p : pilots[static_cast<std::size_t>(v)].positions) muted.push_back(p);
    inst.grids.push_back(build_tx_symbol(rng, n, m, pilots[static_cast<std::size_t>(u)], muted));
  }
  for (int u = 0; u < users; ++u) {
    inst.channels.push_back(sample_time_channel(pdps[static_cast<std::size_t>(u)], sc, rng));
    inst.h_true.middleRows(u * inst.f.taps(), inst.f.taps()) = embed_channel(inst.channels.back(), inst.f);
  }
  std::vector<const FreqSymbolGrid*> g;
  std::vector<const TimeChannel*> c;
  for (int u = 0; u < users; ++u) {
    g.push_back(&inst.grids[static_cast<std::size_t>(u)]);
    c.push_back(&inst.channels[static_cast<std::size_t>(u)]);
  }
  inst.y = apply_channel(g, c, inst.f, snr_db, rng);
  return inst;
}

inline Instance single_user(Rng& rng, int n, int n_r, int m, const std::string& pdp = "ped4",
                            double snr_db = kNoiselessSnr, double corr = 0.0) {
  return make_instance(rng, n, n_r, m, {pdp_by_name(pdp)}, {rotational_pilots(n, 1, m)}, snr_db, corr);
}

/// Peda profiles with the dominant tap at a different delay for each user.
inline std::vector<PowerDelayProfile> distinct_profiles(int users) {
  std::vector<PowerDelayProfile> p;
  for (int u = 0; u < users; ++u) p.push_back(pdp_by_name("peda-dom" + std::to_string(u % 4)));
  return p;
}

inline BlindConfig single_config(const Instance& inst, int m, int iterations = 10) {
  BlindConfig cfg;
  cfg.iterations = iterations;
  cfg.qam_order = m;
  cfg.delays = inst.f.delays;
  cfg.pilots = {inst.grids[0].pilots};
  return cfg;
}

inline BlindConfig multi_config(const Instance& inst, int m, int iterations = 20) {
  BlindConfig cfg;
  cfg.iterations = iterations;
  cfg.qam_order = m;
  cfg.delays = inst.f.delays;
  cfg.init = InitMethod::Circularity;
  for (const auto& g : inst.grids) cfg.pilots.push_back(g.pilots);
  return cfg;
}

inline long long user_errors(const Instance& inst, const DecodeResult& r) {
  long long e = 0;
  for (std::size_t u = 0; u < inst.grids.size(); ++u) e += count_bit_errors(inst.grids[u], r.users[u].symbols);
  return e;
}

}  // namespace testsupport
