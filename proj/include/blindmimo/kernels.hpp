#pragma once

#include <vector>

#include "blindmimo/types.hpp"

// Hot loops of the receivers. The default namespace holds the OpenMP versions;
// `reference` holds straightforward serial versions used as test oracles and
// benchmark baselines. Parallel reductions split rows into fixed-size blocks and
// sum block partials in index order, so results do not depend on thread count.
// Inside an enclosing parallel region (trial-level parallelism) the pragmas fall
// back to one thread because nested parallelism is left disabled.

namespace blindmimo::kernels {

/// Per-row flags written by the combiners.
struct CombineReport {
  int zero_rows = 0;  // subcarriers whose combining denominator was zero
};

/// G = F^H diag(w) F for real nonnegative weights w (length N). L x L.
CMatrix weighted_gram(const CMatrix& f, const RVector& w);

/// C = F^H diag(conj(x)) Y. L x N_r.
CMatrix correlate(const CMatrix& f, const CVector& x, const CMatrix& y);

/// B = F H. N x N_r.
CMatrix synthesize(const CMatrix& f, const CMatrix& h);

/// Per-row MRC: x(n) = sum_r y(n,r) conj(b(n,r)) / sum_r |b(n,r)|^2. Zero-energy rows give 0.
CVector mrc(const CMatrix& y, const CMatrix& b, CombineReport* report = nullptr);

/// Gram of A = [diag(x_1) F, ..., diag(x_U) F] where xs is N x U. (U L) x (U L).
CMatrix joint_gram(const CMatrix& f, const CMatrix& xs);

/// A^H Y for the same A. (U L) x N_r.
CMatrix joint_correlate(const CMatrix& f, const CMatrix& xs, const CMatrix& y);

/// Per-row regularized LS for y_n = B_n^T x_n, where row u of B_n is bs[u].row(n):
/// x_n = (conj(B_n) B_n^T + mu I)^{-1} conj(B_n) y_n. Returns N x U.
/// When `unbiased` is set each output is divided by the diagonal of W_n B_n^T, the
/// usual bias removal for MMSE detection.
CMatrix per_row_ls(const CMatrix& y, const std::vector<CMatrix>& bs, double mu,
                   bool unbiased = false, CombineReport* report = nullptr);

/// Combining step of alternating minimization with B_u = F H_u never formed.
/// One user: MRC. Several users: per_row_ls with `mu` (no bias removal).
/// `residual` is ||Y - sum_u diag(x_u) B_u||_F at the returned estimate.
struct CombineOutput {
  CMatrix x;  // N x U
  int zero_rows = 0;
  double residual = 0.0;
};
CombineOutput combine_factored(const CMatrix& y, const CMatrix& f, const std::vector<CMatrix>& hs,
                               double mu);

namespace reference {
CombineOutput combine_factored(const CMatrix& y, const CMatrix& f, const std::vector<CMatrix>& hs,
                               double mu);
CMatrix weighted_gram(const CMatrix& f, const RVector& w);
CMatrix correlate(const CMatrix& f, const CVector& x, const CMatrix& y);
CMatrix synthesize(const CMatrix& f, const CMatrix& h);
CVector mrc(const CMatrix& y, const CMatrix& b, CombineReport* report = nullptr);
CMatrix joint_gram(const CMatrix& f, const CMatrix& xs);
CMatrix joint_correlate(const CMatrix& f, const CMatrix& xs, const CMatrix& y);
CMatrix per_row_ls(const CMatrix& y, const std::vector<CMatrix>& bs, double mu,
                   bool unbiased = false, CombineReport* report = nullptr);
}  // namespace reference

/// Number of threads the parallel kernels may use (1 without OpenMP).
int max_threads();
void set_threads(int n);

}  // namespace blindmimo::kernels
