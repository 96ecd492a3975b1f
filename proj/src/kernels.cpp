#include "blindmimo/kernels.hpp"

#include <algorithm>
#include <atomic>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace blindmimo::kernels {

namespace {

constexpr Eigen::Index kRowBlock = 128;
// Below this many multiply-adds a parallel region costs more than it saves.
constexpr double kParallelWork = 65536.0;

using SmallMatrix = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, 0, 16, 16>;
using SmallVector = Eigen::Matrix<cplx, Eigen::Dynamic, 1, 0, 16, 1>;

Eigen::Index block_count(Eigen::Index rows) { return (rows + kRowBlock - 1) / kRowBlock; }

void check_rows(const CMatrix& a, Eigen::Index rows, const char* what) {
  if (a.rows() != rows) throw InvalidArgument(std::string("row count mismatch in ") + what);
}

// Per-subcarrier Gram entries and right-hand sides, built with column sweeps.
struct RowSystems {
  std::vector<CVector> gram;  // upper triangle, index u * users + v for v >= u
  std::vector<CVector> rhs;
};

RowSystems build_row_systems(const CMatrix& y, const std::vector<CMatrix>& bs, bool parallel) {
  const auto users = static_cast<Eigen::Index>(bs.size());
  RowSystems sys;
  sys.gram.resize(static_cast<std::size_t>(users * users));
  sys.rhs.resize(static_cast<std::size_t>(users));
  const Eigen::Index jobs = users * users + users;
#pragma omp parallel for schedule(static) if (parallel)
  for (Eigen::Index job = 0; job < jobs; ++job) {
    if (job >= users * users) {
      const Eigen::Index u = job - users * users;
      sys.rhs[static_cast<std::size_t>(u)] =
          bs[static_cast<std::size_t>(u)].conjugate().cwiseProduct(y).rowwise().sum();
      continue;
    }
    const Eigen::Index u = job / users;
    const Eigen::Index v = job % users;
    if (v < u) continue;
    sys.gram[static_cast<std::size_t>(job)] =
        bs[static_cast<std::size_t>(u)].conjugate().cwiseProduct(bs[static_cast<std::size_t>(v)]).rowwise().sum();
  }
  return sys;
}

// Solves one subcarrier's system; returns false when the matrix is singular.
bool solve_row(const RowSystems& sys, Eigen::Index users, Eigen::Index n, double mu, bool unbiased,
               cplx* out, bool* zero_row) {
  SmallMatrix g(users, users);
  SmallVector rhs(users);
  double energy = 0.0;
  for (Eigen::Index u = 0; u < users; ++u) {
    rhs(u) = sys.rhs[static_cast<std::size_t>(u)](n);
    for (Eigen::Index v = u; v < users; ++v) {
      g(u, v) = sys.gram[static_cast<std::size_t>(u * users + v)](n);
      g(v, u) = std::conj(g(u, v));
    }
    energy += g(u, u).real();
  }
  *zero_row = energy == 0.0;
  if (*zero_row && mu > 0) {
    for (Eigen::Index u = 0; u < users; ++u) out[u] = 0.0;
    return true;
  }
  SmallMatrix m = g;
  m.diagonal().array() += mu;
  Eigen::LLT<SmallMatrix> llt(m);
  if (llt.info() != Eigen::Success) return false;
  SmallVector x = llt.solve(rhs);
  if (unbiased) {
    const SmallMatrix wb = llt.solve(g);
    for (Eigen::Index u = 0; u < users; ++u)
      if (std::abs(wb(u, u)) > 0) x(u) /= wb(u, u);
  }
  for (Eigen::Index u = 0; u < users; ++u) out[u] = x(u);
  return true;
}

void check_users(const std::vector<CMatrix>& bs, const CMatrix& y) {
  if (bs.empty() || bs.size() > 16)
    throw InvalidArgument("per-row solve supports 1 to 16 users");
  for (const auto& b : bs)
    if (b.rows() != y.rows() || b.cols() != y.cols())
      throw InvalidArgument("per-row solve: channel shape differs from Y");
}

}  // namespace

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_threads(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

CMatrix weighted_gram(const CMatrix& f, const RVector& w) {
  check_rows(f, w.size(), "weighted_gram");
  const Eigen::Index n = f.rows();
  const Eigen::Index l = f.cols();
  const Eigen::Index blocks = block_count(n);
  std::vector<CMatrix> partial(static_cast<std::size_t>(blocks));
  const bool par = static_cast<double>(n * l * l) >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
  for (Eigen::Index b = 0; b < blocks; ++b) {
    const Eigen::Index start = b * kRowBlock;
    const Eigen::Index len = std::min(kRowBlock, n - start);
    const auto fb = f.middleRows(start, len);
    partial[static_cast<std::size_t>(b)] =
        fb.adjoint() * (w.segment(start, len).cast<cplx>().asDiagonal() * fb);
  }
  CMatrix g = CMatrix::Zero(l, l);
  for (const auto& p : partial) g += p;
  return g;
}

CMatrix correlate(const CMatrix& f, const CVector& x, const CMatrix& y) {
  check_rows(f, x.size(), "correlate");
  check_rows(y, x.size(), "correlate");
  const Eigen::Index nr = y.cols();
  const CMatrix fx_h = (x.asDiagonal() * f).adjoint();  // F^H diag(conj x)
  CMatrix c(f.cols(), nr);
  const bool par = static_cast<double>(f.rows() * f.cols() * nr) >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
  for (Eigen::Index r = 0; r < nr; ++r) c.col(r).noalias() = fx_h * y.col(r);
  return c;
}

CMatrix synthesize(const CMatrix& f, const CMatrix& h) {
  if (f.cols() != h.rows()) throw InvalidArgument("synthesize: F and H shapes disagree");
  const Eigen::Index n = f.rows();
  CMatrix b(n, h.cols());
  const Eigen::Index blocks = block_count(n);
  const bool par = static_cast<double>(n * h.rows() * h.cols()) >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
  for (Eigen::Index blk = 0; blk < blocks; ++blk) {
    const Eigen::Index start = blk * kRowBlock;
    const Eigen::Index len = std::min(kRowBlock, n - start);
    b.middleRows(start, len).noalias() = f.middleRows(start, len) * h;
  }
  return b;
}

CVector mrc(const CMatrix& y, const CMatrix& b, CombineReport* report) {
  if (y.rows() != b.rows() || y.cols() != b.cols())
    throw InvalidArgument("mrc: Y and B shapes disagree");
  const Eigen::Index n = y.rows();
  const Eigen::Index nr = y.cols();
  // Column sweeps over row blocks keep the access pattern contiguous.
  CVector num = CVector::Zero(n);
  RVector den = RVector::Zero(n);
  const Eigen::Index blocks = block_count(n);
  const bool par = static_cast<double>(n * nr) >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
  for (Eigen::Index blk = 0; blk < blocks; ++blk) {
    const Eigen::Index start = blk * kRowBlock;
    const Eigen::Index len = std::min(kRowBlock, n - start);
    for (Eigen::Index r = 0; r < nr; ++r) {
      const auto bc = b.col(r).segment(start, len);
      num.segment(start, len) += y.col(r).segment(start, len).cwiseProduct(bc.conjugate());
      den.segment(start, len) += bc.cwiseAbs2();
    }
  }
  CVector x(n);
  int zero_rows = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (den(i) > 0.0) {
      x(i) = num(i) / den(i);
    } else {
      x(i) = 0.0;
      ++zero_rows;
    }
  }
  if (report) report->zero_rows = zero_rows;
  return x;
}

CMatrix joint_gram(const CMatrix& f, const CMatrix& xs) {
  check_rows(f, xs.rows(), "joint_gram");
  const Eigen::Index users = xs.cols();
  const Eigen::Index l = f.cols();
  CMatrix g(users * l, users * l);
  std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;
  for (Eigen::Index u = 0; u < users; ++u)
    for (Eigen::Index v = u; v < users; ++v) pairs.emplace_back(u, v);
  const Eigen::Index count = static_cast<Eigen::Index>(pairs.size());
  const bool par = static_cast<double>(count * f.rows() * l * l) >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
  for (Eigen::Index p = 0; p < count; ++p) {
    const auto [u, v] = pairs[static_cast<std::size_t>(p)];
    const CVector w = xs.col(u).conjugate().cwiseProduct(xs.col(v));
    const CMatrix block = f.adjoint() * (w.asDiagonal() * f);
    g.block(u * l, v * l, l, l) = block;
    if (u != v) g.block(v * l, u * l, l, l) = block.adjoint();
  }
  return g;
}

CMatrix joint_correlate(const CMatrix& f, const CMatrix& xs, const CMatrix& y) {
  check_rows(f, xs.rows(), "joint_correlate");
  check_rows(y, xs.rows(), "joint_correlate");
  const Eigen::Index users = xs.cols();
  const Eigen::Index l = f.cols();
  CMatrix c(users * l, y.cols());
  for (Eigen::Index u = 0; u < users; ++u)
    c.middleRows(u * l, l) = correlate(f, xs.col(u), y);
  return c;
}

CMatrix per_row_ls(const CMatrix& y, const std::vector<CMatrix>& bs, double mu, bool unbiased,
                   CombineReport* report) {
  check_users(bs, y);
  const Eigen::Index n = y.rows();
  const Eigen::Index users = static_cast<Eigen::Index>(bs.size());
  const bool par = static_cast<double>(n * y.cols() * users * users) >= kParallelWork;
  const RowSystems sys = build_row_systems(y, bs, par);
  CMatrix out(n, users);
  std::vector<cplx> row_out(static_cast<std::size_t>(n * users));
  std::atomic<bool> singular{false};
  int zero_rows = 0;
#pragma omp parallel for schedule(static) reduction(+ : zero_rows) if (par)
  for (Eigen::Index i = 0; i < n; ++i) {
    bool zero = false;
    if (!solve_row(sys, users, i, mu, unbiased, &row_out[static_cast<std::size_t>(i * users)], &zero))
      singular = true;
    if (zero) ++zero_rows;
  }
  if (singular) throw SingularSystem("per-subcarrier system is rank deficient");
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index u = 0; u < users; ++u)
      out(i, u) = row_out[static_cast<std::size_t>(i * users + u)];
  if (report) report->zero_rows = zero_rows;
  return out;
}

namespace {

// Row systems from the factors: rhs_u(n) = sum_l conj F(n,l) (Y H_u^H)(n,l) and
// gram_uv(n) = sum_l conj F(n,l) (F M_uv^T)(n,l) with M_uv = conj(H_u) H_v^T.
RowSystems factored_row_systems(const CMatrix& y, const CMatrix& f, const std::vector<CMatrix>& hs,
                                bool parallel) {
  const auto users = static_cast<Eigen::Index>(hs.size());
  RowSystems sys;
  sys.gram.resize(static_cast<std::size_t>(users * users));
  sys.rhs.resize(static_cast<std::size_t>(users));
  const CMatrix fc = f.conjugate();
  const Eigen::Index jobs = users * users + users;
#pragma omp parallel for schedule(static) if (parallel)
  for (Eigen::Index job = 0; job < jobs; ++job) {
    if (job >= users * users) {
      const Eigen::Index u = job - users * users;
      const CMatrix p = y * hs[static_cast<std::size_t>(u)].adjoint();
      sys.rhs[static_cast<std::size_t>(u)] = fc.cwiseProduct(p).rowwise().sum();
      continue;
    }
    const Eigen::Index u = job / users;
    const Eigen::Index v = job % users;
    if (v < u) continue;
    const CMatrix m = hs[static_cast<std::size_t>(u)].conjugate() * hs[static_cast<std::size_t>(v)].transpose();
    const CMatrix fm = f * m.transpose();
    sys.gram[static_cast<std::size_t>(job)] = fc.cwiseProduct(fm).rowwise().sum();
  }
  return sys;
}

// ||Y||^2 - 2 Re sum_u conj(x_u) . rhs_u + sum_n x_n^H G_n x_n, clamped at zero.
double factored_residual(double y_norm2, const RowSystems& sys, const CMatrix& x) {
  const Eigen::Index users = x.cols();
  double r = y_norm2;
  for (Eigen::Index u = 0; u < users; ++u) {
    r -= 2.0 * x.col(u).dot(sys.rhs[static_cast<std::size_t>(u)]).real();
    for (Eigen::Index v = u; v < users; ++v) {
      const CVector& g = sys.gram[static_cast<std::size_t>(u * users + v)];
      const cplx q = (x.col(u).conjugate().cwiseProduct(g).cwiseProduct(x.col(v))).sum();
      r += u == v ? q.real() : 2.0 * q.real();
    }
  }
  return std::sqrt(std::max(r, 0.0));
}

}  // namespace

CombineOutput combine_factored(const CMatrix& y, const CMatrix& f, const std::vector<CMatrix>& hs,
                               double mu) {
  if (hs.empty()) throw InvalidArgument("combine_factored: no users");
  check_rows(f, y.rows(), "combine_factored");
  for (const auto& h : hs)
    if (h.rows() != f.cols() || h.cols() != y.cols())
      throw InvalidArgument("combine_factored: channel shape differs from taps x antennas");
  const Eigen::Index n = y.rows();
  const auto users = static_cast<Eigen::Index>(hs.size());
  const bool par = static_cast<double>(n * y.cols() * f.cols()) >= kParallelWork;
  const RowSystems sys = factored_row_systems(y, f, hs, par);

  CombineOutput out;
  out.x.resize(n, users);
  if (users == 1) {
    const CVector& den = sys.gram[0];
    for (Eigen::Index i = 0; i < n; ++i) {
      if (den(i).real() > 0.0) {
        out.x(i, 0) = sys.rhs[0](i) / den(i).real();
      } else {
        out.x(i, 0) = 0.0;
        ++out.zero_rows;
      }
    }
  } else {
    std::atomic<bool> singular{false};
    std::vector<cplx> row_out(static_cast<std::size_t>(n * users));
    int zero_rows = 0;
#pragma omp parallel for schedule(static) reduction(+ : zero_rows) if (par)
    for (Eigen::Index i = 0; i < n; ++i) {
      bool zero = false;
      if (!solve_row(sys, users, i, mu, false, &row_out[static_cast<std::size_t>(i * users)], &zero))
        singular = true;
      if (zero) ++zero_rows;
    }
    if (singular) throw SingularSystem("per-subcarrier system is rank deficient");
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index u = 0; u < users; ++u) out.x(i, u) = row_out[static_cast<std::size_t>(i * users + u)];
    out.zero_rows = zero_rows;
  }
  out.residual = factored_residual(y.squaredNorm(), sys, out.x);
  return out;
}

namespace reference {

CMatrix weighted_gram(const CMatrix& f, const RVector& w) {
  check_rows(f, w.size(), "weighted_gram");
  const Eigen::Index l = f.cols();
  CMatrix g = CMatrix::Zero(l, l);
  for (Eigen::Index i = 0; i < l; ++i)
    for (Eigen::Index j = 0; j < l; ++j)
      for (Eigen::Index m = 0; m < f.rows(); ++m)
        g(i, j) += std::conj(f(m, i)) * w(m) * f(m, j);
  return g;
}

CMatrix correlate(const CMatrix& f, const CVector& x, const CMatrix& y) {
  check_rows(f, x.size(), "correlate");
  check_rows(y, x.size(), "correlate");
  CMatrix c = CMatrix::Zero(f.cols(), y.cols());
  for (Eigen::Index i = 0; i < f.cols(); ++i)
    for (Eigen::Index r = 0; r < y.cols(); ++r)
      for (Eigen::Index m = 0; m < f.rows(); ++m)
        c(i, r) += std::conj(f(m, i) * x(m)) * y(m, r);
  return c;
}

CMatrix synthesize(const CMatrix& f, const CMatrix& h) {
  if (f.cols() != h.rows()) throw InvalidArgument("synthesize: F and H shapes disagree");
  CMatrix b = CMatrix::Zero(f.rows(), h.cols());
  for (Eigen::Index m = 0; m < f.rows(); ++m)
    for (Eigen::Index r = 0; r < h.cols(); ++r)
      for (Eigen::Index i = 0; i < f.cols(); ++i) b(m, r) += f(m, i) * h(i, r);
  return b;
}

CVector mrc(const CMatrix& y, const CMatrix& b, CombineReport* report) {
  if (y.rows() != b.rows() || y.cols() != b.cols())
    throw InvalidArgument("mrc: Y and B shapes disagree");
  CVector x(y.rows());
  int zero_rows = 0;
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    cplx num = 0.0;
    double den = 0.0;
    for (Eigen::Index r = 0; r < y.cols(); ++r) {
      num += y(i, r) * std::conj(b(i, r));
      den += std::norm(b(i, r));
    }
    if (den > 0.0) {
      x(i) = num / den;
    } else {
      x(i) = 0.0;
      ++zero_rows;
    }
  }
  if (report) report->zero_rows = zero_rows;
  return x;
}

CMatrix joint_gram(const CMatrix& f, const CMatrix& xs) {
  check_rows(f, xs.rows(), "joint_gram");
  CMatrix a(f.rows(), xs.cols() * f.cols());
  for (Eigen::Index u = 0; u < xs.cols(); ++u)
    a.middleCols(u * f.cols(), f.cols()) = xs.col(u).asDiagonal() * f;
  return a.adjoint() * a;
}

CMatrix joint_correlate(const CMatrix& f, const CMatrix& xs, const CMatrix& y) {
  check_rows(f, xs.rows(), "joint_correlate");
  check_rows(y, xs.rows(), "joint_correlate");
  CMatrix a(f.rows(), xs.cols() * f.cols());
  for (Eigen::Index u = 0; u < xs.cols(); ++u)
    a.middleCols(u * f.cols(), f.cols()) = xs.col(u).asDiagonal() * f;
  return a.adjoint() * y;
}

CMatrix per_row_ls(const CMatrix& y, const std::vector<CMatrix>& bs, double mu, bool unbiased,
                   CombineReport* report) {
  check_users(bs, y);
  const Eigen::Index users = static_cast<Eigen::Index>(bs.size());
  CMatrix out(y.rows(), users);
  int zero_rows = 0;
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    CMatrix h(y.cols(), users);  // N_r x U, column u is user u's channel at this row
    for (Eigen::Index u = 0; u < users; ++u) h.col(u) = bs[static_cast<std::size_t>(u)].row(i).transpose();
    const CMatrix g = h.adjoint() * h;
    if (g.trace().real() == 0.0) ++zero_rows;
    CMatrix m = g;
    m.diagonal().array() += mu;
    Eigen::FullPivLU<CMatrix> lu(m);
    if (!lu.isInvertible()) throw SingularSystem("per-subcarrier system is rank deficient");
    const CMatrix w = lu.inverse() * h.adjoint();
    CVector x = w * y.row(i).transpose();
    if (unbiased) {
      const CMatrix wb = w * h;
      for (Eigen::Index u = 0; u < users; ++u)
        if (std::abs(wb(u, u)) > 0) x(u) /= wb(u, u);
    }
    out.row(i) = x.transpose();
  }
  if (report) report->zero_rows = zero_rows;
  return out;
}

CombineOutput combine_factored(const CMatrix& y, const CMatrix& f, const std::vector<CMatrix>& hs,
                               double mu) {
  std::vector<CMatrix> bs;
  for (const auto& h : hs) bs.push_back(synthesize(f, h));
  CombineOutput out;
  CombineReport report;
  if (bs.size() == 1)
    out.x = reference::mrc(y, bs[0], &report);
  else
    out.x = reference::per_row_ls(y, bs, mu, false, &report);
  out.zero_rows = report.zero_rows;
  CMatrix r = y;
  for (std::size_t u = 0; u < bs.size(); ++u)
    for (Eigen::Index i = 0; i < y.rows(); ++i)
      r.row(i) -= out.x(i, static_cast<Eigen::Index>(u)) * bs[u].row(i);
  out.residual = r.norm();
  return out;
}

}  // namespace reference

}  // namespace blindmimo::kernels
