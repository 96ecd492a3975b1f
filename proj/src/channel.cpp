#include "blindmimo/channel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include <json.hpp>

#include "blindmimo/kernels.hpp"

namespace blindmimo {

int PowerDelayProfile::dominant_delay() const {
  if (delays.empty()) throw InvalidArgument("empty power-delay profile");
  std::size_t best = 0;
  for (std::size_t i = 1; i < powers.size(); ++i)
    if (powers[i] > powers[best]) best = i;
  return delays[best];
}

PowerDelayProfile make_pdp(std::string name, std::vector<int> delays, std::vector<double> powers) {
  if (delays.empty() || delays.size() != powers.size())
    throw InvalidArgument("profile '" + name + "' needs matching, nonempty delays and powers");
  for (std::size_t i = 0; i < delays.size(); ++i) {
    if (delays[i] < 0) throw InvalidArgument("profile '" + name + "' has a negative delay");
    if (i > 0 && delays[i] <= delays[i - 1])
      throw InvalidArgument("profile '" + name + "' delays must be strictly ascending");
    if (!(powers[i] >= 0.0) || !std::isfinite(powers[i]))
      throw InvalidArgument("profile '" + name + "' has an invalid tap power");
  }
  const double total = std::accumulate(powers.begin(), powers.end(), 0.0);
  if (!(total > 0.0)) throw InvalidArgument("profile '" + name + "' has zero total power");
  for (auto& p : powers) p /= total;
  return {std::move(name), std::move(delays), std::move(powers)};
}

PowerDelayProfile load_pdp_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open power-delay profile '" + path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument("malformed power-delay profile '" + path + "': " + e.what());
  }
  if (!doc.is_array()) throw InvalidArgument("power-delay profile '" + path + "' must be an array");
  std::vector<std::pair<int, double>> taps;
  for (const auto& t : doc) {
    if (!t.is_object() || !t.contains("delay_samples") || !t.contains("power_linear") ||
        t.size() != 2)
      throw InvalidArgument("profile '" + path + "' entries need exactly delay_samples and power_linear");
    const auto& d = t.at("delay_samples");
    if (!d.is_number_integer())
      throw InvalidArgument("profile '" + path + "': delay_samples must be an integer");
    taps.emplace_back(d.get<int>(), t.at("power_linear").get<double>());
  }
  std::sort(taps.begin(), taps.end());
  std::vector<int> delays;
  std::vector<double> powers;
  for (const auto& [d, p] : taps) {
    delays.push_back(d);
    powers.push_back(p);
  }
  return make_pdp(path, std::move(delays), std::move(powers));
}

PowerDelayProfile pdp_by_name(const std::string& name) {
  if (name == "flat") return make_pdp(name, {0}, {1.0});
  if (name == "ped4") return make_pdp(name, {0, 1, 2, 3}, {1.0, 0.5, 0.25, 0.125});
  if (name.rfind("ped4-dom", 0) == 0 && name.size() == 9 && name[8] >= '0' && name[8] <= '3') {
    // Same four delays; the dominant tap moves and the others decay cyclically after it.
    const int k = name[8] - '0';
    std::vector<double> powers(4);
    for (int j = 0; j < 4; ++j) powers[static_cast<std::size_t>((k + j) % 4)] = std::pow(0.5, j);
    return make_pdp(name, {0, 1, 2, 3}, std::move(powers));
  }
  if (name == "peda" || (name.rfind("peda-dom", 0) == 0 && name.size() == 9 && name[8] >= '0' &&
                          name[8] <= '3')) {
    // Pedestrian-A relative powers (0, -9.7, -19.2, -22.8 dB) on sample-spaced delays 0..3;
    // the -dom<k> variants put the strongest tap at delay k with the rest following cyclically.
    const int k = name.size() == 9 ? name[8] - '0' : 0;
    const double db[4] = {0.0, -9.7, -19.2, -22.8};
    std::vector<double> powers(4);
    for (int j = 0; j < 4; ++j) powers[static_cast<std::size_t>((k + j) % 4)] = std::pow(10.0, db[j] / 10.0);
    return make_pdp(name, {0, 1, 2, 3}, std::move(powers));
  }
  if (name == "tdla30-4096") {
    // Exponential profile with 30 ns decay constant sampled at 4096 x 30 kHz.
    const double ts = 1.0 / (4096.0 * 30e3);
    std::vector<int> delays(12);
    std::vector<double> powers(12);
    for (int d = 0; d < 12; ++d) {
      delays[static_cast<std::size_t>(d)] = d;
      powers[static_cast<std::size_t>(d)] = std::exp(-d * ts / 30e-9);
    }
    return make_pdp(name, std::move(delays), std::move(powers));
  }
  return load_pdp_file(name);
}

SpatialCorrelation exponential_corr(int n_r, double r) {
  if (n_r < 1) throw InvalidArgument("antenna count must be positive");
  if (!(r >= 0.0 && r < 1.0))
    throw InvalidArgument("correlation coefficient must lie in [0, 1)");
  SpatialCorrelation c;
  c.n_r = n_r;
  c.coefficient = r;
  c.matrix.resize(n_r, n_r);
  for (int i = 0; i < n_r; ++i)
    for (int j = 0; j < n_r; ++j) c.matrix(i, j) = std::pow(r, std::abs(i - j));
  if (r == 0.0) {
    c.sqrt_factor = RMatrix::Identity(n_r, n_r);
  } else {
    Eigen::SelfAdjointEigenSolver<RMatrix> eig(c.matrix);
    const RVector root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    c.sqrt_factor = eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
  }
  return c;
}

namespace {

CMatrix scaled_gaussian(const PowerDelayProfile& pdp, const SpatialCorrelation& corr, Rng& rng) {
  CMatrix g(pdp.taps(), corr.n_r);
  fill_complex_normal(rng, g);
  for (int i = 0; i < pdp.taps(); ++i) g.row(i) *= std::sqrt(pdp.powers[static_cast<std::size_t>(i)]);
  if (corr.coefficient != 0.0) g = g * corr.sqrt_factor.cast<cplx>();
  return g;
}

}  // namespace

TimeChannel sample_time_channel(const PowerDelayProfile& pdp, const SpatialCorrelation& corr,
                                Rng& rng) {
  return {scaled_gaussian(pdp, corr, rng), pdp};
}

double doppler_hz(double speed_kmh, double carrier_hz) {
  return speed_kmh / 3.6 * carrier_hz / kSpeedOfLight;
}

double temporal_coefficient(double f_d, int k, double t_sym) {
  if (f_d < 0 || k < 0 || !(t_sym > 0)) throw InvalidArgument("invalid temporal coefficient input");
  return std::cyl_bessel_j(0.0, 2.0 * std::numbers::pi * f_d * k * t_sym);
}

TimeChannel evolve_channel(const TimeChannel& h0, double eta, const SpatialCorrelation& corr,
                           Rng& rng) {
  if (!(std::abs(eta) <= 1.0)) throw InvalidArgument("temporal coefficient must satisfy |eta| <= 1");
  if (h0.h.cols() != corr.n_r) throw InvalidArgument("antenna count differs from correlation model");
  const CMatrix fresh = scaled_gaussian(h0.pdp, corr, rng);
  return {eta * h0.h + std::sqrt(1.0 - eta * eta) * fresh, h0.pdp};
}

CMatrix embed_channel(const TimeChannel& ch, const DftSubmatrix& f) {
  CMatrix out = CMatrix::Zero(f.taps(), ch.h.cols());
  for (int i = 0; i < ch.pdp.taps(); ++i) {
    const int d = ch.pdp.delays[static_cast<std::size_t>(i)];
    const auto it = std::find(f.delays.begin(), f.delays.end(), d);
    if (it == f.delays.end())
      throw InvalidArgument("channel tap delay " + std::to_string(d) + " missing from the tap grid");
    out.row(it - f.delays.begin()) = ch.h.row(i);
  }
  return out;
}

double noise_variance_for_snr(double snr_db) {
  if (std::isinf(snr_db) && snr_db > 0) return 0.0;
  return std::pow(10.0, -snr_db / 10.0);
}

CMatrix noiseless_signal(const std::vector<const FreqSymbolGrid*>& grids,
                         const std::vector<const TimeChannel*>& channels, const DftSubmatrix& f,
                         const std::vector<double>& gains_db) {
  if (grids.empty() || grids.size() != channels.size())
    throw InvalidArgument("need one channel per user");
  if (!gains_db.empty() && gains_db.size() != grids.size())
    throw InvalidArgument("need one gain per user");
  const Eigen::Index nr = channels.front()->h.cols();
  CMatrix y = CMatrix::Zero(f.n, nr);
  for (std::size_t u = 0; u < grids.size(); ++u) {
    if (grids[u]->n != f.n) throw InvalidArgument("user grid size differs from DFT size");
    if (channels[u]->h.cols() != nr) throw InvalidArgument("users disagree on antenna count");
    const double amp = gains_db.empty() ? 1.0 : std::pow(10.0, gains_db[u] / 20.0);
    const CMatrix b = kernels::synthesize(f.columns, embed_channel(*channels[u], f));
    const CVector xs = amp * grids[u]->symbols;
    for (Eigen::Index c = 0; c < nr; ++c) y.col(c) += xs.cwiseProduct(b.col(c));
  }
  return y;
}

CMatrix draw_noise(Rng& rng, int n, int n_r, double variance) {
  CMatrix w(n, n_r);
  if (variance > 0.0) {
    fill_complex_normal(rng, w, variance);
  } else {
    w.setZero();
  }
  return w;
}

ReceivedMatrix apply_channel(const std::vector<const FreqSymbolGrid*>& grids,
                             const std::vector<const TimeChannel*>& channels,
                             const DftSubmatrix& f, double snr_db, Rng& rng,
                             const std::vector<double>& gains_db) {
  ReceivedMatrix out;
  out.y = noiseless_signal(grids, channels, f, gains_db);
  out.noise_variance = noise_variance_for_snr(snr_db);
  out.y += draw_noise(rng, f.n, static_cast<int>(out.y.cols()), out.noise_variance);
  return out;
}

}  // namespace blindmimo
