#include "blindmimo/harness/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>

#include "blindmimo/baseline_rx.hpp"
#include "blindmimo/blind_rx.hpp"

#ifndef BLINDMIMO_VERSION
#define BLINDMIMO_VERSION "unknown"
#endif

namespace blindmimo::harness {

namespace {

// Fixed per-experiment state shared read-only by all trials.
struct Scene {
  const ExperimentConfig& cfg;
  std::vector<PowerDelayProfile> profiles;
  SpatialCorrelation corr;
  DftSubmatrix f;
  BlindConfig blind;
  int l_max;
  std::vector<std::vector<int>> blind_muted;

  explicit Scene(const ExperimentConfig& c)
      : cfg(c),
        profiles(c.profiles()),
        corr(exponential_corr(c.n_r, c.correlation)),
        f(build_dft_submatrix(c.n, c.tap_grid())),
        blind(c.blind_config()),
        l_max(c.baseline_l_max()) {
    for (int u = 0; u < c.users; ++u) {
      std::vector<int> muted;
      for (int v = 0; v < c.users; ++v)
        if (v != u)
          for (int p : blind.pilots[static_cast<std::size_t>(v)].positions) muted.push_back(p);
      std::sort(muted.begin(), muted.end());
      blind_muted.push_back(std::move(muted));
    }
  }
};

// Random content of one trial: data labels, channels and noise, drawn in that order.
struct Draw {
  std::vector<std::vector<int>> labels;
  std::vector<TimeChannel> channels;
  CMatrix noise;
  double sigma2 = 0.0;
};

Draw draw_trial(const Scene& s, Rng& rng, double sigma2) {
  Draw d;
  d.sigma2 = sigma2;
  for (int u = 0; u < s.cfg.users; ++u) d.labels.push_back(random_labels(rng, s.cfg.n, s.cfg.m));
  for (int u = 0; u < s.cfg.users; ++u)
    d.channels.push_back(sample_time_channel(s.profiles[static_cast<std::size_t>(u)], s.corr, rng));
  d.noise = draw_noise(rng, s.cfg.n, s.cfg.n_r, sigma2);
  return d;
}

std::vector<FreqSymbolGrid> blind_grids(const Scene& s, const std::vector<std::vector<int>>& labels) {
  std::vector<FreqSymbolGrid> g;
  for (int u = 0; u < s.cfg.users; ++u) {
    const auto uu = static_cast<std::size_t>(u);
    g.push_back(build_grid_from_labels(s.cfg.n, s.cfg.m, s.blind.pilots[uu], s.blind_muted[uu], labels[uu]));
  }
  return g;
}

std::vector<FreqSymbolGrid> baseline_grids(const Scene& s, const PilotGrid& grid,
                                           const std::vector<std::vector<int>>& labels) {
  std::vector<FreqSymbolGrid> g;
  for (int u = 0; u < s.cfg.users; ++u) {
    const auto uu = static_cast<std::size_t>(u);
    g.push_back(build_grid_from_labels(s.cfg.n, s.cfg.m, grid.users[uu], grid.muted_for(u), labels[uu]));
  }
  return g;
}

ReceivedMatrix receive(const Scene& s, const std::vector<FreqSymbolGrid>& grids,
                       const std::vector<TimeChannel>& channels, const Draw& d) {
  std::vector<const FreqSymbolGrid*> gp;
  std::vector<const TimeChannel*> cp;
  for (const auto& g : grids) gp.push_back(&g);
  for (const auto& c : channels) cp.push_back(&c);
  ReceivedMatrix r;
  r.y = noiseless_signal(gp, cp, s.f, s.cfg.gains_db) + d.noise;
  r.noise_variance = d.sigma2;
  return r;
}

double user_ber(const FreqSymbolGrid& g, const CVector& symbols) {
  if (g.bits.empty()) return 0.0;
  return static_cast<double>(count_bit_errors(g, symbols)) / static_cast<double>(g.bits.size());
}

double mean_ber(const std::vector<FreqSymbolGrid>& grids, const CMatrix& symbols) {
  double sum = 0.0;
  for (std::size_t u = 0; u < grids.size(); ++u)
    sum += user_ber(grids[u], symbols.col(static_cast<Eigen::Index>(u)));
  return sum / static_cast<double>(grids.size());
}

double mean_ber(const std::vector<FreqSymbolGrid>& grids, const DecodeResult& r) {
  CMatrix symbols(grids.front().n, static_cast<Eigen::Index>(grids.size()));
  for (std::size_t u = 0; u < grids.size(); ++u)
    symbols.col(static_cast<Eigen::Index>(u)) = r.users[u].symbols;
  return mean_ber(grids, symbols);
}

// A decode that fails outright is scored as guessing.
constexpr double kFailedBer = 0.5;

PilotGrid trial_pilot_grid(const Scene& s, int total, std::size_t point, int trial) {
  Rng prng = make_stream(s.cfg.seed, s.cfg.name + "/pilots", point, static_cast<std::uint64_t>(trial));
  return baseline_pilot_grid(s.cfg.n, total, s.cfg.users, prng);
}

// Runs fn(trial) for every trial; each call writes only its own slots, so the result does not
// depend on scheduling. Unexpected errors are rethrown in trial order.
template <class Fn>
void for_trials(int trials, Fn&& fn) {
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(trials));
#pragma omp parallel for schedule(dynamic)
  for (int t = 0; t < trials; ++t) {
    try {
      fn(t);
    } catch (...) {
      errors[static_cast<std::size_t>(t)] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

TrialCurve make_curve(std::string name, std::size_t points, int trials) {
  TrialCurve c;
  c.name = std::move(name);
  c.values.assign(points, std::vector<double>(static_cast<std::size_t>(trials), 0.0));
  c.failures.assign(points, 0);
  return c;
}

// Per-trial failure flags are summed after the parallel loop.
struct FailureFlags {
  std::vector<std::uint8_t> flags;
  explicit FailureFlags(int trials) : flags(static_cast<std::size_t>(trials), 0) {}
  int count() const { return static_cast<int>(std::count(flags.begin(), flags.end(), 1)); }
};

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", x);
  return buf;
}

nlohmann::json metadata(const ExperimentConfig& cfg) {
  return {{"config", to_json(cfg)}, {"seed", cfg.seed}, {"code_version", BLINDMIMO_VERSION}};
}

ResultRow mc_row(const ExperimentConfig& cfg, const std::string& receiver, double snr,
                 const std::string& metric, const Estimate& e) {
  return {cfg.name, receiver, snr, metric, e.mean, e.stderr_, e.count, cfg.seed};
}

ResultRow exact_row(const ExperimentConfig& cfg, const std::string& receiver,
                    std::optional<double> snr, const std::string& metric, double value) {
  return {cfg.name, receiver, snr, metric, value, std::nullopt, cfg.trials, cfg.seed};
}

const TrialCurve& find_curve(const std::vector<TrialCurve>& curves, const std::string& name) {
  for (const auto& c : curves)
    if (c.name == name) return c;
  throw InvalidArgument("no curve named '" + name + "'");
}

bool is_baseline(const std::string& r) { return r != "blind"; }

}  // namespace

bool within_three_se(const std::vector<double>& a, const std::vector<double>& b) {
  const Estimate d = paired_difference(a, b);
  return d.mean <= 3.0 * d.stderr_;
}

const TrialCurve& BerSweepOutcome::curve(const std::string& name) const { return find_curve(curves, name); }
const TrialCurve& TapErrorOutcome::curve(const std::string& name) const { return find_curve(curves, name); }

BerSweepOutcome run_ber_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  const Scene scene(cfg);
  const std::size_t points = cfg.snr_db.size();
  const bool has_blind = std::count(cfg.receivers.begin(), cfg.receivers.end(), "blind") > 0;
  std::vector<std::string> baselines;
  for (const auto& r : cfg.receivers)
    if (is_baseline(r)) baselines.push_back(r);

  BerSweepOutcome out;
  out.snr_db = cfg.snr_db;
  if (has_blind) {
    out.curves.push_back(make_curve("blind", points, cfg.trials));
    for (int k : cfg.blind.report_at)
      out.curves.push_back(make_curve("blind-k" + std::to_string(k), points, cfg.trials));
  }
  const std::size_t first_baseline = out.curves.size();
  for (const auto& b : baselines) out.curves.push_back(make_curve(b, points, cfg.trials));
  const auto& report_at = cfg.blind.report_at;

  for (std::size_t si = 0; si < points; ++si) {
    const double sigma2 = noise_variance_for_snr(cfg.snr_db[si]);
    std::vector<FailureFlags> fails(out.curves.size(), FailureFlags(cfg.trials));
    for_trials(cfg.trials, [&](int t) {
      const auto tt = static_cast<std::size_t>(t);
      Rng rng = make_stream(cfg.seed, cfg.name, si, tt);
      const Draw d = draw_trial(scene, rng, sigma2);

      if (has_blind) {
        const auto grids = blind_grids(scene, d.labels);
        const ReceivedMatrix y = receive(scene, grids, d.channels, d);
        std::vector<double> at_k(report_at.size(), kFailedBer);
        IterationObserver observer;
        if (!report_at.empty())
          observer = [&](int k, const CMatrix& xs) {
            for (std::size_t i = 0; i < report_at.size(); ++i)
              if (report_at[i] == k) at_k[i] = mean_ber(grids, xs);
          };
        double ber = kFailedBer;
        try {
          const DecodeResult r = cfg.users == 1 ? blind_decode_single(y, scene.blind, observer)
                                                : blind_decode_multi(y, scene.blind, observer);
          ber = mean_ber(grids, r);
        } catch (const std::runtime_error&) {
          for (std::size_t c = 0; c < first_baseline; ++c) fails[c].flags[tt] = 1;
          std::fill(at_k.begin(), at_k.end(), kFailedBer);
        }
        out.curves[0].values[si][tt] = ber;
        for (std::size_t i = 0; i < report_at.size(); ++i) out.curves[1 + i].values[si][tt] = at_k[i];
      }

      if (baselines.empty()) return;
      const PilotGrid grid = trial_pilot_grid(scene, cfg.baseline.pilots, si, t);
      const auto grids = baseline_grids(scene, grid, d.labels);
      const ReceivedMatrix y = receive(scene, grids, d.channels, d);
      for (std::size_t b = 0; b < baselines.size(); ++b) {
        auto& slot = out.curves[first_baseline + b].values[si][tt];
        try {
          const auto& name = baselines[b];
          if (name == "mmse") {
            slot = mean_ber(grids, baseline_decode_multi(y.y, grid, sigma2, scene.l_max));
          } else {
            const auto interp = name == "mrc-fft" ? Interpolation::Fft : Interpolation::Linear;
            slot = user_ber(grids[0], baseline_decode_single(y.y, grid.users[0], interp, scene.l_max));
          }
        } catch (const std::runtime_error&) {
          slot = kFailedBer;
          fails[first_baseline + b].flags[tt] = 1;
        }
      }
    });
    for (std::size_t c = 0; c < out.curves.size(); ++c) out.curves[c].failures[si] = fails[c].count();
  }

  out.table.metadata = metadata(cfg);
  for (std::size_t si = 0; si < points; ++si) {
    const double snr = cfg.snr_db[si];
    for (const auto& c : out.curves) {
      out.table.add(mc_row(cfg, c.name, snr, "ber", c.at(si)));
      out.table.add(exact_row(cfg, c.name, snr, "failures", c.failures[si]));
    }
    if (has_blind)
      for (std::size_t b = 0; b < baselines.size(); ++b)
        out.table.add(mc_row(cfg, "blind-vs-" + baselines[b], snr, "ber_difference",
                             paired_difference(out.curves[0].values[si],
                                               out.curves[first_baseline + b].values[si])));
  }
  return out;
}

TapErrorOutcome run_tap_error(const ExperimentConfig& cfg) {
  cfg.validate();
  const Scene scene(cfg);
  const std::size_t points = cfg.snr_db.size();
  const int users = cfg.users;
  auto curve_name = [&](const std::string& est, int u) {
    return users == 1 ? est : est + "-u" + std::to_string(u);
  };

  TapErrorOutcome out;
  out.snr_db = cfg.snr_db;
  for (int u = 0; u < users; ++u)
    for (const auto& e : cfg.estimators) out.curves.push_back(make_curve(curve_name(e, u), points, cfg.trials));
  const std::size_t per_user = cfg.estimators.size();

  for (std::size_t si = 0; si < points; ++si) {
    const double sigma2 = noise_variance_for_snr(cfg.snr_db[si]);
    FailureFlags fails(cfg.trials);
    for_trials(cfg.trials, [&](int t) {
      const auto tt = static_cast<std::size_t>(t);
      Rng rng = make_stream(cfg.seed, cfg.name, si, tt);
      const Draw d = draw_trial(scene, rng, sigma2);
      const auto grids = blind_grids(scene, d.labels);
      const ReceivedMatrix y = receive(scene, grids, d.channels, d);
      try {
        const SvdBasis svd = top_left_singular_vectors(y.y, users);
        CMatrix z = svd.left_vectors.leftCols(1);
        if (users > 1) {
          const CoefficientMatrix a = estimate_coefficient_matrix(
              svd, scene.blind.pilots, std::numeric_limits<double>::infinity());
          const bool pseudo = a.condition > scene.blind.max_mixing_condition;
          if (pseudo && !scene.blind.mixing_fallback)
            throw IllConditionedMixing("ill-conditioned mixing matrix", a.condition);
          z = unmix(svd, a, pseudo);
        }
        for (int u = 0; u < users; ++u) {
          const int truth = scene.profiles[static_cast<std::size_t>(u)].dominant_delay();
          for (std::size_t e = 0; e < per_user; ++e) {
            const CVector col = z.col(u);
            const int tap = cfg.estimators[e] == "variance"
                                ? initial_point_variance(col, scene.f, cfg.blind.histogram_bins).tap
                                : initial_point_circularity(col, scene.f).tap;
            out.curves[static_cast<std::size_t>(u) * per_user + e].values[si][tt] = tap != truth ? 1.0 : 0.0;
          }
        }
      } catch (const std::runtime_error&) {
        fails.flags[tt] = 1;
        for (auto& c : out.curves) c.values[si][tt] = 1.0;
      }
    });
    for (auto& c : out.curves) c.failures[si] = fails.count();
  }

  out.table.metadata = metadata(cfg);
  const bool both = per_user == 2;
  for (std::size_t si = 0; si < points; ++si) {
    const double snr = cfg.snr_db[si];
    for (const auto& c : out.curves) {
      out.table.add(mc_row(cfg, c.name, snr, "tap_error", c.at(si)));
      out.table.add(exact_row(cfg, c.name, snr, "failures", c.failures[si]));
    }
    if (!both) continue;
    // The hull statistic should never lose to the histogram statistic.
    for (int u = 0; u < users; ++u) {
      const auto& var = out.curve(curve_name("variance", u)).values[si];
      const auto& circ = out.curve(curve_name("circularity", u)).values[si];
      const auto label = curve_name("circularity-vs-variance", u);
      const Estimate diff = paired_difference(circ, var);
      out.table.add(mc_row(cfg, label, snr, "error_difference", diff));
      out.table.add(exact_row(cfg, label, snr, "ordering_violation", within_three_se(circ, var) ? 0.0 : 1.0));
    }
  }
  return out;
}

TemporalOutcome run_temporal(const ExperimentConfig& cfg) {
  cfg.validate();
  const Scene scene(cfg);
  const auto& tc = cfg.temporal;
  const std::size_t points = cfg.snr_db.size();
  const std::size_t speeds = tc.speeds_kmh.size();
  const std::size_t times = tc.times_ms.size();
  const int kmax = tc.max_iterations;
  const int kcold = tc.cold_iterations;

  BlindConfig cold_cfg = scene.blind;
  cold_cfg.iterations = kcold;
  BlindConfig warm_cfg = scene.blind;
  warm_cfg.iterations = kmax;
  const int kd_main = std::min({warm_cfg.derotate_at, 2, kmax});

  // cold[k-1], warm[s][t][k-1]; baselines per symbol.
  std::vector<TrialCurve> cold;
  for (int k = 1; k <= kcold; ++k) cold.push_back(make_curve("cold-k" + std::to_string(k), points, cfg.trials));
  TrialCurve base0 = make_curve("mrc-fft-t0", points, cfg.trials);
  std::vector<std::vector<std::vector<TrialCurve>>> warm(speeds, std::vector<std::vector<TrialCurve>>(times));
  std::vector<std::vector<TrialCurve>> base(speeds);
  std::vector<std::vector<double>> etas(speeds, std::vector<double>(times));
  for (std::size_t s = 0; s < speeds; ++s) {
    const double fd = doppler_hz(tc.speeds_kmh[s], tc.carrier_hz);
    for (std::size_t ti = 0; ti < times; ++ti) {
      etas[s][ti] = temporal_coefficient(fd, 1, tc.times_ms[ti] * 1e-3);
      for (int k = 1; k <= kmax; ++k) warm[s][ti].push_back(make_curve("warm", points, cfg.trials));
      base[s].push_back(make_curve("base", points, cfg.trials));
    }
  }

  std::size_t failures = 0;
  for (std::size_t si = 0; si < points; ++si) {
    const double sigma2 = noise_variance_for_snr(cfg.snr_db[si]);
    FailureFlags fails(cfg.trials);
    for_trials(cfg.trials, [&](int t) {
      const auto tt = static_cast<std::size_t>(t);
      Rng rng = make_stream(cfg.seed, cfg.name, si, tt);
      const Draw d0 = draw_trial(scene, rng, sigma2);
      const PilotGrid grid = trial_pilot_grid(scene, cfg.baseline.pilots, si, t);

      auto baseline_ber = [&](const Draw& d, const std::vector<TimeChannel>& ch) {
        const auto g = baseline_grids(scene, grid, d.labels);
        const ReceivedMatrix y = receive(scene, g, ch, d);
        return user_ber(g[0], baseline_decode_single(y.y, grid.users[0], Interpolation::Fft, scene.l_max));
      };

      // Cold start on the first symbol.
      const auto g0 = blind_grids(scene, d0.labels);
      const ReceivedMatrix y0 = receive(scene, g0, d0.channels, d0);
      for (auto& c : cold) c.values[si][tt] = kFailedBer;
      CMatrix h_prev;
      try {
        const DecodeResult r = blind_decode_single(y0, cold_cfg, [&](int k, const CMatrix& xs) {
          cold[static_cast<std::size_t>(k - 1)].values[si][tt] = mean_ber(g0, xs);
        });
        h_prev = r.users[0].h_hat;
      } catch (const std::runtime_error&) {
        fails.flags[tt] = 1;
      }
      base0.values[si][tt] = baseline_ber(d0, d0.channels);

      for (std::size_t s = 0; s < speeds; ++s) {
        Rng rs = make_stream(cfg.seed, cfg.name + "/speed" + std::to_string(s), si, tt);
        for (std::size_t ti = 0; ti < times; ++ti) {
          Draw d;
          d.sigma2 = sigma2;
          d.channels = {evolve_channel(d0.channels[0], etas[s][ti], scene.corr, rs)};
          d.labels = {random_labels(rs, cfg.n, cfg.m)};
          d.noise = draw_noise(rs, cfg.n, cfg.n_r, sigma2);
          auto& curves = warm[s][ti];
          for (auto& c : curves) c.values[si][tt] = kFailedBer;
          base[s][ti].values[si][tt] = baseline_ber(d, d.channels);
          if (h_prev.size() == 0) continue;
          const auto g = blind_grids(scene, d.labels);
          const ReceivedMatrix y = receive(scene, g, d.channels, d);
          auto record = [&](int k, const CMatrix& xs) {
            curves[static_cast<std::size_t>(k - 1)].values[si][tt] = mean_ber(g, xs);
          };
          try {
            warm_start_decode(y, h_prev, warm_cfg, record);
            // Counts below the main run's de-rotation point follow a different schedule.
            for (int k = 1; k < kd_main; ++k) {
              BlindConfig short_cfg = scene.blind;
              short_cfg.iterations = k;
              const DecodeResult r = warm_start_decode(y, h_prev, short_cfg);
              curves[static_cast<std::size_t>(k - 1)].values[si][tt] = user_ber(g[0], r.users[0].symbols);
            }
          } catch (const std::runtime_error&) {
            fails.flags[tt] = 1;
          }
        }
      }
    });
    failures += static_cast<std::size_t>(fails.count());
  }

  auto parity_everywhere = [&](const TrialCurve& c, const TrialCurve& b) {
    for (std::size_t si = 0; si < points; ++si)
      if (!within_three_se(c.values[si], b.values[si])) return false;
    return true;
  };

  TemporalOutcome out;
  out.table.metadata = metadata(cfg);
  for (int k = cold_cfg.derotate_at; k <= kcold; ++k)
    if (parity_everywhere(cold[static_cast<std::size_t>(k - 1)], base0)) {
      out.cold_min_iterations = k;
      break;
    }
  out.table.add(exact_row(cfg, "blind-cold", std::nullopt, "min_iterations", out.cold_min_iterations));
  out.table.add(exact_row(cfg, "blind-cold", std::nullopt, "failures", static_cast<double>(failures)));
  for (std::size_t si = 0; si < points; ++si) {
    out.table.add(mc_row(cfg, "blind-cold", cfg.snr_db[si], "ber", cold.back().at(si)));
    out.table.add(mc_row(cfg, "mrc-fft-t0ms", cfg.snr_db[si], "ber", base0.at(si)));
  }

  for (std::size_t s = 0; s < speeds; ++s) {
    const std::string who = "blind-" + fmt(tc.speeds_kmh[s]) + "kmh";
    out.entries.push_back({tc.speeds_kmh[s], 0.0, 1.0, kcold, out.cold_min_iterations > 0});
    out.table.add(exact_row(cfg, who, std::nullopt, "iterations_t0ms", kcold));
    for (std::size_t ti = 0; ti < times; ++ti) {
      const std::string at = "t" + fmt(tc.times_ms[ti]) + "ms";
      TemporalEntry e{tc.speeds_kmh[s], tc.times_ms[ti], etas[s][ti], kmax, false};
      for (int k = 1; k <= kmax; ++k)
        if (parity_everywhere(warm[s][ti][static_cast<std::size_t>(k - 1)], base[s][ti])) {
          e.iterations = k;
          e.matched = true;
          break;
        }
      out.entries.push_back(e);
      out.table.add(exact_row(cfg, who, std::nullopt, "eta_" + at, e.eta));
      out.table.add(exact_row(cfg, who, std::nullopt, "iterations_" + at, e.iterations));
      out.table.add(exact_row(cfg, who, std::nullopt, "matched_" + at, e.matched ? 1.0 : 0.0));
      const auto& chosen = warm[s][ti][static_cast<std::size_t>(e.iterations - 1)];
      for (std::size_t si = 0; si < points; ++si) {
        out.table.add(mc_row(cfg, who + "-" + at, cfg.snr_db[si], "ber", chosen.at(si)));
        out.table.add(mc_row(cfg, "mrc-fft-" + fmt(tc.speeds_kmh[s]) + "kmh-" + at, cfg.snr_db[si], "ber",
                             base[s][ti].at(si)));
      }
    }
  }
  return out;
}

UtilizationOutcome run_utilization(const ExperimentConfig& cfg) {
  cfg.validate();
  const Scene scene(cfg);
  const std::size_t points = cfg.snr_db.size();
  const auto& ladder = cfg.utilization.pilot_ladder;
  const std::string baseline = cfg.users == 1 ? "mrc-fft" : "mmse";

  TrialCurve blind = make_curve("blind", points, cfg.trials);
  std::vector<TrialCurve> rungs;
  for (int total : ladder) rungs.push_back(make_curve(baseline + "-p" + std::to_string(total), points, cfg.trials));
  double blind_util = 0.0;

  for (std::size_t si = 0; si < points; ++si) {
    const double sigma2 = noise_variance_for_snr(cfg.snr_db[si]);
    FailureFlags fails(cfg.trials);
    for_trials(cfg.trials, [&](int t) {
      const auto tt = static_cast<std::size_t>(t);
      Rng rng = make_stream(cfg.seed, cfg.name, si, tt);
      const Draw d = draw_trial(scene, rng, sigma2);
      const auto grids = blind_grids(scene, d.labels);
      const ReceivedMatrix y = receive(scene, grids, d.channels, d);
      try {
        const DecodeResult r = cfg.users == 1 ? blind_decode_single(y, scene.blind)
                                              : blind_decode_multi(y, scene.blind);
        blind.values[si][tt] = mean_ber(grids, r);
      } catch (const std::runtime_error&) {
        blind.values[si][tt] = kFailedBer;
        fails.flags[tt] = 1;
      }
      for (std::size_t i = 0; i < ladder.size(); ++i) {
        const PilotGrid grid = trial_pilot_grid(scene, ladder[i], si, t);
        const auto g = baseline_grids(scene, grid, d.labels);
        const ReceivedMatrix yb = receive(scene, g, d.channels, d);
        try {
          rungs[i].values[si][tt] =
              cfg.users == 1
                  ? user_ber(g[0], baseline_decode_single(yb.y, grid.users[0], Interpolation::Fft, scene.l_max))
                  : mean_ber(g, baseline_decode_multi(yb.y, grid, sigma2, scene.l_max));
        } catch (const std::runtime_error&) {
          rungs[i].values[si][tt] = kFailedBer;
        }
      }
    });
    blind.failures[si] = fails.count();
  }
  {
    Rng rng = make_stream(cfg.seed, cfg.name, 0, 0);
    const Draw d = draw_trial(scene, rng, 0.0);
    blind_util = blind_grids(scene, d.labels).front().utilization();
  }

  UtilizationOutcome out;
  out.blind_utilization = blind_util;
  for (std::size_t i = 0; i < ladder.size() && !out.found; ++i) {
    bool ok = true;
    for (std::size_t si = 0; si < points && ok; ++si)
      ok = within_three_se(rungs[i].values[si], blind.values[si]);
    if (ok) {
      out.found = true;
      out.matched_pilots = ladder[i];
      out.matched_density = static_cast<double>(ladder[i]) / cfg.n;
      out.baseline_utilization = 1.0 - out.matched_density;
    }
  }

  out.table.metadata = metadata(cfg);
  out.table.add(exact_row(cfg, "blind", std::nullopt, "utilization", out.blind_utilization));
  out.table.add(exact_row(cfg, baseline, std::nullopt, "search_failed", out.found ? 0.0 : 1.0));
  if (out.found) {
    out.table.add(exact_row(cfg, baseline, std::nullopt, "matched_pilots", out.matched_pilots));
    out.table.add(exact_row(cfg, baseline, std::nullopt, "matched_density", out.matched_density));
    out.table.add(exact_row(cfg, baseline, std::nullopt, "utilization", out.baseline_utilization));
  }
  for (std::size_t si = 0; si < points; ++si) {
    const double snr = cfg.snr_db[si];
    out.table.add(mc_row(cfg, "blind", snr, "ber", blind.at(si)));
    out.table.add(exact_row(cfg, "blind", snr, "failures", blind.failures[si]));
    for (const auto& r : rungs) {
      out.table.add(mc_row(cfg, r.name, snr, "ber", r.at(si)));
      out.table.add(mc_row(cfg, r.name, snr, "ber_minus_blind", paired_difference(r.values[si], blind.values[si])));
    }
  }
  return out;
}

ResultTable run_experiment(const ExperimentConfig& cfg) {
  switch (cfg.kind) {
    case ExperimentKind::BerSweep: return run_ber_sweep(cfg).table;
    case ExperimentKind::TapError: return run_tap_error(cfg).table;
    case ExperimentKind::Temporal: return run_temporal(cfg).table;
    case ExperimentKind::Utilization: return run_utilization(cfg).table;
  }
  throw InvalidArgument("unknown experiment kind");
}

std::vector<std::string> check_table(const ExperimentConfig& cfg, const ResultTable& table) {
  std::vector<std::string> v;
  auto where = [](const ResultRow& r) {
    return r.receiver + (r.snr_db ? " at " + fmt(*r.snr_db) + " dB" : std::string());
  };
  for (const auto& r : table.rows) {
    if (r.metric == "ber_difference" && r.value > 3.0 * r.stderr_.value_or(0.0))
      v.push_back(where(r) + ": blind BER above baseline by more than 3 standard errors");
    if (r.metric == "ordering_violation" && r.value != 0.0)
      v.push_back(where(r) + ": circularity error exceeds variance error");
    if (r.metric.rfind("matched_t", 0) == 0 && r.value == 0.0)
      v.push_back(where(r) + ": warm start never reached parity (" + r.metric + ")");
    if (r.metric == "search_failed" && r.value != 0.0)
      v.push_back(where(r) + ": baseline cannot match blind BER on the pilot ladder");
  }
  if (cfg.kind == ExperimentKind::Temporal)
    for (const auto& r : table.rows)
      if (r.metric.rfind("iterations_t", 0) == 0 && r.metric != "iterations_t0ms" &&
          r.value >= cfg.temporal.cold_iterations)
        v.push_back(where(r) + ": warm start is not cheaper than the cold start (" + r.metric + ")");
  return v;
}

}  // namespace blindmimo::harness
