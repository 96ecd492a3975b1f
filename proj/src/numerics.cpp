#include "blindmimo/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <string>

#include "blindmimo/kernels.hpp"

namespace blindmimo {

DftSubmatrix build_dft_submatrix(int n, const std::vector<int>& delays) {
  if (n < 1) throw InvalidArgument("DFT size must be positive, got " + std::to_string(n));
  std::set<int> seen;
  for (int d : delays) {
    if (d < 0 || d >= n)
      throw InvalidArgument("tap delay " + std::to_string(d) + " outside [0, " +
                            std::to_string(n - 1) + "]");
    if (!seen.insert(d).second)
      throw InvalidArgument("duplicate tap delay " + std::to_string(d));
  }

  // Twiddle table indexed by (m * d) mod n keeps every entry exact to one rounding.
  std::vector<cplx> twiddle(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    const double angle = -2.0 * std::numbers::pi * static_cast<double>(k) / n;
    twiddle[static_cast<std::size_t>(k)] = std::polar(1.0, angle);
  }

  DftSubmatrix out;
  out.n = n;
  out.delays = delays;
  out.columns.resize(n, static_cast<Eigen::Index>(delays.size()));
  for (std::size_t i = 0; i < delays.size(); ++i) {
    const long long d = delays[i];
    for (int m = 0; m < n; ++m)
      out.columns(m, static_cast<Eigen::Index>(i)) =
          twiddle[static_cast<std::size_t>((m * d) % n)];
  }
  return out;
}

SvdBasis top_left_singular_vectors(const CMatrix& y, int k) {
  const Eigen::Index n = y.rows();
  const Eigen::Index nr = y.cols();
  if (k < 1 || k > std::min(n, nr))
    throw InvalidArgument("singular vector count " + std::to_string(k) + " outside [1, " +
                          std::to_string(std::min(n, nr)) + "]");

  SvdBasis out;
  if (n <= nr) {
    Eigen::BDCSVD<CMatrix> svd(y, Eigen::ComputeThinU);
    out.left_vectors = svd.matrixU().leftCols(k);
    out.singular_values = svd.singularValues().head(k);
    return out;
  }

  // Very tall Y with a clear spectrum: eigenvectors of the small Gram Y^H Y, lifted by Y.
  // Squaring the condition number is harmless while the wanted values stay well above zero.
  if (n >= 4 * nr) {
    const CMatrix gram = y.adjoint() * y;
    Eigen::SelfAdjointEigenSolver<CMatrix> eig(gram);
    if (eig.info() == Eigen::Success) {
      const RVector& lam = eig.eigenvalues();  // ascending
      const double top = lam(nr - 1);
      if (top > 0 && lam(nr - k) > 1e-8 * top) {
        CMatrix u(n, k);
        RVector sv(k);
        for (int i = 0; i < k; ++i) {
          sv(i) = std::sqrt(lam(nr - 1 - i));
          u.col(i).noalias() = y * eig.eigenvectors().col(nr - 1 - i);
          u.col(i) /= sv(i);
          // One Gram-Schmidt pass restores orthogonality lost to rounding.
          for (int j = 0; j < i; ++j) u.col(i) -= u.col(j).dot(u.col(i)) * u.col(j);
          u.col(i).normalize();
        }
        out.left_vectors = std::move(u);
        out.singular_values = std::move(sv);
        return out;
      }
    }
  }

  // Tall Y: factor Y = QR, decompose the small R, then lift only k vectors through Q.
  Eigen::HouseholderQR<CMatrix> qr(y);
  const CMatrix r = qr.matrixQR().topRows(nr).triangularView<Eigen::Upper>();
  Eigen::BDCSVD<CMatrix> svd(r, Eigen::ComputeFullU);
  CMatrix lifted = CMatrix::Zero(n, k);
  lifted.topRows(nr) = svd.matrixU().leftCols(k);
  lifted.applyOnTheLeft(qr.householderQ());
  out.left_vectors = std::move(lifted);
  out.singular_values = svd.singularValues().head(k);
  return out;
}

CMatrix solve_hermitian(const CMatrix& gram, const CMatrix& rhs, double mu) {
  if (mu < 0) throw InvalidArgument("regularization must be nonnegative");
  CMatrix m = gram;
  m.diagonal().array() += mu;
  Eigen::LLT<CMatrix> llt(m);
  if (llt.info() != Eigen::Success || !(llt.rcond() > 1e-14))
    throw SingularSystem("regularized Gram matrix is singular");
  return llt.solve(rhs);
}

CMatrix regularized_ls_channel(const CVector& x_hat, const DftSubmatrix& f,
                               const CMatrix& y, double mu) {
  if (x_hat.size() != f.n || y.rows() != f.n)
    throw InvalidArgument("dimension mismatch in channel solve: x " +
                          std::to_string(x_hat.size()) + ", F " + std::to_string(f.n) +
                          ", Y " + std::to_string(y.rows()));
  const RVector w = x_hat.cwiseAbs2();
  const CMatrix gram = kernels::weighted_gram(f.columns, w);
  const CMatrix rhs = kernels::correlate(f.columns, x_hat, y);
  return solve_hermitian(gram, rhs, mu);
}

}  // namespace blindmimo
