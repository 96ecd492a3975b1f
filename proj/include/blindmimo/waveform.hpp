#pragma once

#include <vector>

#include "blindmimo/rng.hpp"
#include "blindmimo/types.hpp"

namespace blindmimo {

// Wire format of the Gray map: a label of log2(M) bits is read MSB first. The
// first half Gray-codes the in-phase index i, the second half the quadrature
// index q, and the point is scale * ((s-1-2i) + j(s-1-2q)) with s = sqrt(M).
// Label 0 is therefore the first-quadrant corner, e.g. QPSK 00 -> (1+j)/sqrt(2).
struct QamConstellation {
  int order = 0;
  int bits_per_symbol = 0;
  int side = 0;
  double scale = 0.0;
  std::vector<cplx> points;  // indexed by label

  int nearest_label(cplx z) const;
  cplx nearest_point(cplx z) const { return points[static_cast<std::size_t>(nearest_label(z))]; }
  /// Maximum-energy first-quadrant corner.
  cplx corner() const { return points.front(); }
};

/// Shared immutable constellation for M in {4, 16, 64, 256}.
const QamConstellation& qam(int m);
bool is_supported_order(int m);

CVector qam_modulate(const Bits& bits, int m);
/// Nearest-point hard decision; ties go to the smaller real part, then the smaller imaginary part.
Bits qam_demodulate(const CVector& symbols, int m);
cplx nearest_constellation_point(cplx z, int m);

struct PilotSpec {
  std::vector<int> positions;  // sorted, distinct
  std::vector<cplx> values;

  int count() const { return static_cast<int>(positions.size()); }
};

/// eta rotational pilots at floor((k + 1/2) N / eta), each carrying the constellation corner.
PilotSpec rotational_pilots(int n, int eta, int m);

/// One rotational pilot per user at floor((u + 1/2) N / N_u).
std::vector<PilotSpec> multiuser_rotational_pilots(int n, int users, int m);

enum class SymbolRole : std::uint8_t { Data, Pilot, Muted };

/// Diagonal of X_f for one user, with the bits carried on its data subcarriers.
struct FreqSymbolGrid {
  int n = 0;
  int m = 0;
  CVector symbols;
  PilotSpec pilots;
  std::vector<SymbolRole> roles;
  std::vector<int> data_positions;  // ascending; bits are laid out in this order
  Bits bits;

  int data_count() const { return static_cast<int>(data_positions.size()); }
  double utilization() const { return static_cast<double>(data_count()) / n; }
};

/// Builds a grid from one label per subcarrier; labels at pilot and muted positions are ignored.
/// `muted` lists subcarriers this user leaves empty (other users' pilots).
FreqSymbolGrid build_grid_from_labels(int n, int m, const PilotSpec& pilots,
                                      const std::vector<int>& muted,
                                      const std::vector<int>& labels);

/// Uniform random data on every non-pilot, non-muted subcarrier.
FreqSymbolGrid build_tx_symbol(Rng& rng, int n, int m, const PilotSpec& pilots,
                               const std::vector<int>& muted = {});

std::vector<int> random_labels(Rng& rng, int n, int m);

/// Bit errors between the grid's payload and hard decisions on its data subcarriers.
long long count_bit_errors(const FreqSymbolGrid& tx, const CVector& decided);

}  // namespace blindmimo
