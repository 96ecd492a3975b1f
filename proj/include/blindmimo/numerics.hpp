#pragma once

#include <vector>

#include "blindmimo/types.hpp"

namespace blindmimo {

/// Columns of the N-point DFT matrix selected by integer tap delays.
/// Column i holds w^(m * delays[i]) for m = 0..n-1 with w = exp(-j 2 pi / n).
struct DftSubmatrix {
  int n = 0;
  std::vector<int> delays;
  CMatrix columns;

  int taps() const { return static_cast<int>(delays.size()); }
};

/// Dominant left singular vectors (as columns) and their singular values.
struct SvdBasis {
  CMatrix left_vectors;
  RVector singular_values;

  int rank() const { return static_cast<int>(singular_values.size()); }
};

DftSubmatrix build_dft_submatrix(int n, const std::vector<int>& delays);

/// k dominant left singular vectors of y. The global phase of each vector is unspecified.
SvdBasis top_left_singular_vectors(const CMatrix& y, int k);

/// Solves (F^H X^H X F + mu I) H = F^H X^H Y by Cholesky, with X = diag(x_hat).
/// Returns the L x N_r time-domain channel.
CMatrix regularized_ls_channel(const CVector& x_hat, const DftSubmatrix& f,
                               const CMatrix& y, double mu);

/// Solves (G + mu I) Z = R for Hermitian positive semidefinite G.
/// Throws SingularSystem when the regularized matrix is not safely positive definite.
CMatrix solve_hermitian(const CMatrix& gram, const CMatrix& rhs, double mu);

}  // namespace blindmimo
