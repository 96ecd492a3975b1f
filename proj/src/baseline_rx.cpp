#include "blindmimo/baseline_rx.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "blindmimo/kernels.hpp"
#include "blindmimo/numerics.hpp"

namespace blindmimo {

int PilotGrid::total() const {
  int t = 0;
  for (const auto& u : users) t += u.count();
  return t;
}

std::vector<int> PilotGrid::muted_for(int u) const {
  std::vector<int> muted;
  for (std::size_t v = 0; v < users.size(); ++v)
    if (static_cast<int>(v) != u)
      muted.insert(muted.end(), users[v].positions.begin(), users[v].positions.end());
  std::sort(muted.begin(), muted.end());
  return muted;
}

PilotGrid baseline_pilot_grid(int n, int total, int users, Rng& rng) {
  if (users < 1) throw InvalidArgument("user count must be positive");
  if (total < users || total > n || total % users != 0)
    throw InvalidArgument("pilot total " + std::to_string(total) +
                          " must be a multiple of the user count and at most N");
  PilotGrid g;
  g.n = n;
  g.users.resize(static_cast<std::size_t>(users));
  std::uniform_int_distribution<int> pick(0, 3);
  const auto& qpsk = qam(4);
  for (int k = 0; k < total; ++k) {
    auto& spec = g.users[static_cast<std::size_t>(k % users)];
    spec.positions.push_back(static_cast<int>(std::floor((k + 0.5) * n / total)));
    spec.values.push_back(qpsk.points[static_cast<std::size_t>(pick(rng))]);
  }
  return g;
}

CMatrix ls_pilot_estimates(const CMatrix& y, const PilotSpec& pilots) {
  CMatrix est(pilots.count(), y.cols());
  for (int i = 0; i < pilots.count(); ++i) {
    const cplx v = pilots.values[static_cast<std::size_t>(i)];
    if (std::abs(v) == 0.0) throw InvalidArgument("pilot value must be nonzero");
    const int p = pilots.positions[static_cast<std::size_t>(i)];
    if (p < 0 || p >= y.rows()) throw InvalidArgument("pilot position out of range");
    est.row(i) = y.row(p) / v;
  }
  return est;
}

CMatrix interpolate_linear(const CMatrix& estimates, const std::vector<int>& positions, int n) {
  const auto count = static_cast<Eigen::Index>(positions.size());
  if (count < 2) throw InvalidArgument("linear interpolation needs at least 2 pilots");
  if (estimates.rows() != count) throw InvalidArgument("one estimate row per pilot required");
  for (Eigen::Index i = 1; i < count; ++i)
    if (positions[static_cast<std::size_t>(i)] <= positions[static_cast<std::size_t>(i - 1)])
      throw InvalidArgument("pilot positions must be ascending");
  CMatrix h(n, estimates.cols());
  Eigen::Index seg = 0;
  for (int m = 0; m < n; ++m) {
    if (m <= positions.front()) {
      h.row(m) = estimates.row(0);
      continue;
    }
    if (m >= positions.back()) {
      h.row(m) = estimates.row(count - 1);
      continue;
    }
    while (positions[static_cast<std::size_t>(seg + 1)] < m) ++seg;
    const double p0 = positions[static_cast<std::size_t>(seg)];
    const double p1 = positions[static_cast<std::size_t>(seg + 1)];
    const double t = (m - p0) / (p1 - p0);
    h.row(m) = (1.0 - t) * estimates.row(seg) + t * estimates.row(seg + 1);
  }
  return h;
}

CMatrix interpolate_fft(const CMatrix& estimates, const std::vector<int>& positions, int n, int l_max) {
  const auto count = static_cast<Eigen::Index>(positions.size());
  if (estimates.rows() != count) throw InvalidArgument("one estimate row per pilot required");
  if (l_max < 1 || l_max > count)
    throw InvalidArgument("delay window " + std::to_string(l_max) + " needs 1 <= l_max <= pilots");
  if (count >= 2) {
    int lo = n, hi = 0;
    for (Eigen::Index i = 1; i < count; ++i) {
      const int gap = positions[static_cast<std::size_t>(i)] - positions[static_cast<std::size_t>(i - 1)];
      if (gap <= 0) throw InvalidArgument("pilot positions must be ascending");
      lo = std::min(lo, gap);
      hi = std::max(hi, gap);
    }
    if (hi - lo > 1) throw InvalidArgument("FFT interpolation needs equi-spaced pilots");
  }
  std::vector<int> delays(static_cast<std::size_t>(l_max));
  for (int d = 0; d < l_max; ++d) delays[static_cast<std::size_t>(d)] = d;
  const DftSubmatrix full = build_dft_submatrix(n, delays);
  CMatrix fp(count, l_max);
  for (Eigen::Index i = 0; i < count; ++i) fp.row(i) = full.columns.row(positions[static_cast<std::size_t>(i)]);
  const CMatrix taps = solve_hermitian(fp.adjoint() * fp, fp.adjoint() * estimates, 0.0);
  return kernels::synthesize(full.columns, taps);
}

CVector mrc_combine(const CMatrix& y, const CMatrix& h_f) { return kernels::mrc(y, h_f); }

CMatrix mmse_equalize_multi(const CMatrix& y, const std::vector<CMatrix>& h_f, double sigma2,
                            bool unbiased) {
  if (sigma2 < 0) throw InvalidArgument("noise variance must be nonnegative");
  return kernels::per_row_ls(y, h_f, sigma2, unbiased);
}

CVector baseline_decode_single(const CMatrix& y, const PilotSpec& pilots, Interpolation interp,
                               int l_max) {
  const CMatrix est = ls_pilot_estimates(y, pilots);
  const int n = static_cast<int>(y.rows());
  const CMatrix h = interp == Interpolation::Linear ? interpolate_linear(est, pilots.positions, n)
                                                    : interpolate_fft(est, pilots.positions, n, l_max);
  return mrc_combine(y, h);
}

CMatrix baseline_decode_multi(const CMatrix& y, const PilotGrid& grid, double sigma2, int l_max,
                              bool unbiased) {
  std::vector<CMatrix> hs;
  for (const auto& spec : grid.users)
    hs.push_back(interpolate_fft(ls_pilot_estimates(y, spec), spec.positions, grid.n, l_max));
  return mmse_equalize_multi(y, hs, sigma2, unbiased);
}

}  // namespace blindmimo
