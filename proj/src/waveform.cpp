#include "blindmimo/waveform.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <string>

namespace blindmimo {

namespace {

int gray_decode(int g) {
  int i = 0;
  for (; g; g >>= 1) i ^= g;
  return i;
}

int gray_encode(int i) { return i ^ (i >> 1); }

QamConstellation make_constellation(int m) {
  QamConstellation c;
  c.order = m;
  c.bits_per_symbol = std::countr_zero(static_cast<unsigned>(m));
  c.side = 1 << (c.bits_per_symbol / 2);
  // Mean energy of a side x side grid at odd levels is 2 (s^2 - 1) / 3.
  c.scale = std::sqrt(3.0 / (2.0 * (m - 1)));
  const int half = c.bits_per_symbol / 2;
  c.points.resize(static_cast<std::size_t>(m));
  for (int label = 0; label < m; ++label) {
    const int i = gray_decode(label >> half);
    const int q = gray_decode(label & ((1 << half) - 1));
    c.points[static_cast<std::size_t>(label)] =
        c.scale * cplx(c.side - 1 - 2 * i, c.side - 1 - 2 * q);
  }
  return c;
}

int axis_index(double v, const QamConstellation& c) {
  // Level of index i is (s-1-2i) scale; round half up toward the smaller level.
  const double t = ((c.side - 1) - v / c.scale) / 2.0;
  const double idx = std::floor(t + 0.5);
  return static_cast<int>(std::clamp(idx, 0.0, static_cast<double>(c.side - 1)));
}

}  // namespace

bool is_supported_order(int m) { return m == 4 || m == 16 || m == 64 || m == 256; }

const QamConstellation& qam(int m) {
  static const std::array<QamConstellation, 4> table = {
      make_constellation(4), make_constellation(16), make_constellation(64),
      make_constellation(256)};
  switch (m) {
    case 4: return table[0];
    case 16: return table[1];
    case 64: return table[2];
    case 256: return table[3];
    default: throw InvalidArgument("unsupported QAM order " + std::to_string(m));
  }
}

int QamConstellation::nearest_label(cplx z) const {
  const int half = bits_per_symbol / 2;
  const int i = axis_index(z.real(), *this);
  const int q = axis_index(z.imag(), *this);
  return (gray_encode(i) << half) | gray_encode(q);
}

CVector qam_modulate(const Bits& bits, int m) {
  const auto& c = qam(m);
  const std::size_t k = static_cast<std::size_t>(c.bits_per_symbol);
  if (bits.size() % k != 0)
    throw InvalidArgument("bit count " + std::to_string(bits.size()) +
                          " not divisible by " + std::to_string(k));
  CVector out(static_cast<Eigen::Index>(bits.size() / k));
  for (Eigen::Index s = 0; s < out.size(); ++s) {
    int label = 0;
    for (std::size_t b = 0; b < k; ++b) label = (label << 1) | (bits[static_cast<std::size_t>(s) * k + b] & 1);
    out(s) = c.points[static_cast<std::size_t>(label)];
  }
  return out;
}

Bits qam_demodulate(const CVector& symbols, int m) {
  const auto& c = qam(m);
  const int k = c.bits_per_symbol;
  Bits out;
  out.reserve(static_cast<std::size_t>(symbols.size() * k));
  for (Eigen::Index s = 0; s < symbols.size(); ++s) {
    const int label = c.nearest_label(symbols(s));
    for (int b = k - 1; b >= 0; --b) out.push_back(static_cast<std::uint8_t>((label >> b) & 1));
  }
  return out;
}

cplx nearest_constellation_point(cplx z, int m) { return qam(m).nearest_point(z); }

PilotSpec rotational_pilots(int n, int eta, int m) {
  if (eta < 1 || eta > n)
    throw InvalidArgument("pilot count " + std::to_string(eta) + " outside [1, " +
                          std::to_string(n) + "]");
  PilotSpec p;
  const cplx value = qam(m).corner();
  for (int k = 0; k < eta; ++k) {
    p.positions.push_back(static_cast<int>(std::floor((k + 0.5) * n / eta)));
    p.values.push_back(value);
  }
  return p;
}

std::vector<PilotSpec> multiuser_rotational_pilots(int n, int users, int m) {
  if (users < 1 || users > n) throw InvalidArgument("user count out of range");
  std::vector<PilotSpec> out(static_cast<std::size_t>(users));
  const cplx value = qam(m).corner();
  for (int u = 0; u < users; ++u) {
    out[static_cast<std::size_t>(u)].positions = {static_cast<int>(std::floor((u + 0.5) * n / users))};
    out[static_cast<std::size_t>(u)].values = {value};
  }
  return out;
}

FreqSymbolGrid build_grid_from_labels(int n, int m, const PilotSpec& pilots,
                                      const std::vector<int>& muted,
                                      const std::vector<int>& labels) {
  const auto& c = qam(m);
  if (n < 1) throw InvalidArgument("subcarrier count must be positive");
  if (static_cast<int>(labels.size()) != n) throw InvalidArgument("need one label per subcarrier");
  if (pilots.positions.size() != pilots.values.size())
    throw InvalidArgument("pilot positions and values differ in length");

  FreqSymbolGrid g;
  g.n = n;
  g.m = m;
  g.pilots = pilots;
  g.symbols = CVector::Zero(n);
  g.roles.assign(static_cast<std::size_t>(n), SymbolRole::Data);
  for (std::size_t i = 0; i < pilots.positions.size(); ++i) {
    const int p = pilots.positions[i];
    if (p < 0 || p >= n) throw InvalidArgument("pilot position " + std::to_string(p) + " out of range");
    if (g.roles[static_cast<std::size_t>(p)] != SymbolRole::Data)
      throw InvalidArgument("pilot collision at subcarrier " + std::to_string(p));
    g.roles[static_cast<std::size_t>(p)] = SymbolRole::Pilot;
    g.symbols(p) = pilots.values[i];
  }
  for (int p : muted) {
    if (p < 0 || p >= n) throw InvalidArgument("muted position " + std::to_string(p) + " out of range");
    if (g.roles[static_cast<std::size_t>(p)] == SymbolRole::Pilot)
      throw InvalidArgument("muted subcarrier " + std::to_string(p) + " collides with own pilot");
    g.roles[static_cast<std::size_t>(p)] = SymbolRole::Muted;
  }
  const int k = c.bits_per_symbol;
  for (int i = 0; i < n; ++i) {
    if (g.roles[static_cast<std::size_t>(i)] != SymbolRole::Data) continue;
    const int label = labels[static_cast<std::size_t>(i)];
    if (label < 0 || label >= m) throw InvalidArgument("label out of range");
    g.data_positions.push_back(i);
    g.symbols(i) = c.points[static_cast<std::size_t>(label)];
    for (int b = k - 1; b >= 0; --b) g.bits.push_back(static_cast<std::uint8_t>((label >> b) & 1));
  }
  return g;
}

std::vector<int> random_labels(Rng& rng, int n, int m) {
  std::uniform_int_distribution<int> pick(0, m - 1);
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (auto& l : labels) l = pick(rng);
  return labels;
}

FreqSymbolGrid build_tx_symbol(Rng& rng, int n, int m, const PilotSpec& pilots,
                               const std::vector<int>& muted) {
  qam(m);
  return build_grid_from_labels(n, m, pilots, muted, random_labels(rng, n, m));
}

long long count_bit_errors(const FreqSymbolGrid& tx, const CVector& decided) {
  if (decided.size() != tx.n) throw InvalidArgument("decision vector length differs from grid");
  const auto& c = qam(tx.m);
  const int k = c.bits_per_symbol;
  long long errors = 0;
  for (std::size_t d = 0; d < tx.data_positions.size(); ++d) {
    const int label = c.nearest_label(decided(tx.data_positions[d]));
    for (int b = 0; b < k; ++b) {
      const int bit = (label >> (k - 1 - b)) & 1;
      errors += bit != tx.bits[d * static_cast<std::size_t>(k) + static_cast<std::size_t>(b)];
    }
  }
  return errors;
}

}  // namespace blindmimo
