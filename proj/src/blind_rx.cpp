#include "blindmimo/blind_rx.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>

#include "blindmimo/geometry.hpp"
#include "blindmimo/kernels.hpp"

namespace blindmimo {

namespace {

CVector candidate(const CVector& z, const DftSubmatrix& f, int column) {
  return z.cwiseProduct(f.columns.col(column).conjugate());
}

int column_of(const DftSubmatrix& f, int delay) {
  const auto it = std::find(f.delays.begin(), f.delays.end(), delay);
  if (it == f.delays.end())
    throw InvalidArgument("tap delay " + std::to_string(delay) + " not on the tap grid");
  return static_cast<int>(it - f.delays.begin());
}

// Scans candidates in ascending delay so ties resolve to the smallest delay.
template <typename Score, typename Better>
InitialPoint select_candidate(const CVector& z, const DftSubmatrix& f, Score score, Better better) {
  if (z.size() != f.n) throw InvalidArgument("initial-point vector length differs from DFT size");
  if (!(z.norm() > 0)) throw InvalidArgument("initial-point vector is zero");
  std::vector<int> order(static_cast<std::size_t>(f.taps()));
  for (int i = 0; i < f.taps(); ++i) order[static_cast<std::size_t>(i)] = i;
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return f.delays[static_cast<std::size_t>(a)] < f.delays[static_cast<std::size_t>(b)]; });
  int best = -1;
  double best_score = 0.0;
  CVector best_x;
  for (int col : order) {
    CVector x = candidate(z, f, col);
    const double s = score(x);
    if (best < 0 || better(s, best_score)) {
      best = col;
      best_score = s;
      best_x = std::move(x);
    }
  }
  return {std::move(best_x), f.delays[static_cast<std::size_t>(best)]};
}

void map_to_constellation(CVector& x, const PilotSpec& pilots, const std::vector<int>& muted, int m) {
  const auto& c = qam(m);
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = c.nearest_point(x(i));
  for (std::size_t i = 0; i < pilots.positions.size(); ++i) x(pilots.positions[i]) = pilots.values[i];
  for (int p : muted) x(p) = 0.0;
}

void pin_known(CVector& x, const PilotSpec& pilots, const std::vector<int>& muted) {
  for (std::size_t i = 0; i < pilots.positions.size(); ++i) x(pilots.positions[i]) = pilots.values[i];
  for (int p : muted) x(p) = 0.0;
}

std::vector<int> muted_for(const BlindConfig& cfg, int user) {
  std::vector<int> muted;
  for (int v = 0; v < cfg.users(); ++v)
    if (v != user)
      for (int p : cfg.pilots[static_cast<std::size_t>(v)].positions) muted.push_back(p);
  return muted;
}

UserDecode finish_user(CVector symbols, const CMatrix& h, cplx lambda, int tap, int iterations, int m) {
  UserDecode u;
  u.hard_bits = qam_demodulate(symbols, m);
  u.symbols = std::move(symbols);
  u.h_hat = h;
  u.lambda_hat = lambda;
  u.dominant_tap = tap;
  u.iterations_used = iterations;
  return u;
}

// Shared iteration loop for one or more users. `xs` holds the N x U estimates before
// iteration `first_k`; `hs` the latest channel estimates (updated in place).
DecodeResult run_loop(const CMatrix& y, const DftSubmatrix& f, const BlindConfig& cfg, CMatrix xs,
                      std::vector<CMatrix> hs, int first_k, int kd, const std::vector<int>& taps,
                      const IterationObserver& observer, DecodeResult result) {
  const int users = static_cast<int>(xs.cols());
  std::vector<std::vector<int>> muted(static_cast<std::size_t>(users));
  for (int u = 0; u < users; ++u) muted[static_cast<std::size_t>(u)] = muted_for(cfg, u);
  std::vector<cplx> lambdas(static_cast<std::size_t>(users), cplx(1.0, 0.0));

  auto derotate = [&](int u) {
    const auto uu = static_cast<std::size_t>(u);
    const cplx lam = estimate_lambda(xs.col(u), cfg.pilots[uu]);
    if (!(std::abs(lam) > 0)) return;
    xs.col(u) /= lam;
    hs[uu] *= lam;
    lambdas[uu] *= lam;
  };

  const bool in_loop = cfg.derotation == Derotation::InLoop;
  auto after_step = [&](int k) {
    if (!in_loop) return;
    if (k == kd)
      for (int u = 0; u < users; ++u) derotate(u);
    if (k < kd) return;
    for (int u = 0; u < users; ++u) {
      CVector col = xs.col(u);
      map_to_constellation(col, cfg.pilots[static_cast<std::size_t>(u)],
                           muted[static_cast<std::size_t>(u)], cfg.qam_order);
      xs.col(u) = col;
    }
    if (observer) observer(k, xs);
  };

  // A warm start has already done iteration first_k - 1 (the combining half-step).
  if (first_k > 1) after_step(first_k - 1);
  for (int k = first_k; k <= cfg.iterations; ++k) {
    if (users == 1) {
      auto step = am_step_single(y, xs.col(0), f, cfg.mu);
      xs.col(0) = step.x_next;
      hs[0] = std::move(step.h_hat);
      result.flagged_rows += step.flagged_rows;
      result.residuals.push_back(step.residual);
    } else {
      auto step = am_step_multi(y, xs, f, cfg.mu);
      xs = std::move(step.x_next);
      hs = std::move(step.h_hat);
      result.flagged_rows += step.flagged_rows;
      result.residuals.push_back(step.residual);
    }
    after_step(k);
  }

  result.users.clear();
  for (int u = 0; u < users; ++u) {
    const auto uu = static_cast<std::size_t>(u);
    CVector col = xs.col(u);
    if (cfg.derotation == Derotation::LambdaOnly) {
      derotate(u);
      col = xs.col(u);
      pin_known(col, cfg.pilots[uu], muted[uu]);
    } else if (cfg.derotation == Derotation::Cluster) {
      derotate(u);
      col = derotate_cluster(xs.col(u), cfg.pilots[uu], cfg.qam_order);
    }
    result.users.push_back(finish_user(std::move(col), hs[uu], lambdas[uu], taps[uu],
                                       cfg.iterations, cfg.qam_order));
  }
  if (!in_loop && observer) {
    CMatrix final_symbols(xs.rows(), users);
    for (int u = 0; u < users; ++u) final_symbols.col(u) = result.users[static_cast<std::size_t>(u)].symbols;
    observer(cfg.iterations, final_symbols);
  }
  return result;
}

}  // namespace

void BlindConfig::validate(bool warm_start) const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw InvalidArgument("blind." + field + ": " + why);
  };
  if (iterations < 1) fail("iterations", "must be at least 1");
  if (!(mu > 0.0 && mu < 1.0)) fail("mu", "must lie in (0, 1)");
  if (derotate_at < 1) fail("derotate_at", "must be at least 1");
  if (!warm_start && derotation == Derotation::InLoop && derotate_at >= iterations)
    fail("derotate_at", "must be below the iteration count");
  if (!is_supported_order(qam_order)) fail("qam_order", "must be 4, 16, 64 or 256");
  if (delays.empty()) fail("delays", "must not be empty");
  if (histogram_bins < 1) fail("histogram_bins", "must be positive");
  if (pilots.empty()) fail("pilots", "need one pilot set per user");
  std::set<int> used;
  for (const auto& p : pilots) {
    if (p.positions.empty()) fail("pilots", "every user needs at least one pilot");
    if (p.positions.size() != p.values.size()) fail("pilots", "positions and values differ in length");
    for (std::size_t i = 0; i < p.positions.size(); ++i) {
      if (!used.insert(p.positions[i]).second) fail("pilots", "pilot subcarriers must be distinct");
      if (std::abs(p.values[i]) == 0.0) fail("pilots", "pilot value must be nonzero");
    }
  }
  if (init == InitMethod::GivenTap && static_cast<int>(given_taps.size()) != users())
    fail("given_taps", "need one dominant delay per user");
  if (users() > 1 && derotation == Derotation::Cluster)
    fail("derotation", "clustering is single-user only");
}

InitialPoint initial_point_variance(const CVector& u1, const DftSubmatrix& f, int bins) {
  return select_candidate(
      u1, f, [bins](const CVector& x) { return angle_histogram_variance(x, bins); },
      [](double s, double best) { return s > best; });
}

InitialPoint initial_point_circularity(const CVector& z, const DftSubmatrix& f) {
  return select_candidate(
      z, f, [](const CVector& x) { return circularity(x); },
      [](double s, double best) { return s < best; });
}

InitialPoint initial_point_given(const CVector& z, const DftSubmatrix& f, int delay) {
  if (z.size() != f.n) throw InvalidArgument("initial-point vector length differs from DFT size");
  return {candidate(z, f, column_of(f, delay)), delay};
}

SingleStep am_step_single(const CMatrix& y, const CVector& x_hat, const DftSubmatrix& f, double mu) {
  SingleStep s;
  s.h_hat = regularized_ls_channel(x_hat, f, y, mu);
  auto c = kernels::combine_factored(y, f.columns, {s.h_hat}, mu);
  s.x_next = c.x.col(0);
  s.flagged_rows = c.zero_rows;
  s.residual = c.residual;
  return s;
}

MultiStep am_step_multi(const CMatrix& y, const CMatrix& x_hat, const DftSubmatrix& f, double mu) {
  const Eigen::Index users = x_hat.cols();
  const Eigen::Index l = f.taps();
  if (x_hat.rows() != f.n || y.rows() != f.n)
    throw InvalidArgument("dimension mismatch in multi-user step");
  if (users * l > y.cols())
    throw InvalidArgument("multi-user step needs N_u * L <= N_r");
  const CMatrix g = kernels::joint_gram(f.columns, x_hat);
  const CMatrix c = kernels::joint_correlate(f.columns, x_hat, y);
  const CMatrix h = solve_hermitian(g, c, mu);
  MultiStep s;
  for (Eigen::Index u = 0; u < users; ++u) s.h_hat.push_back(h.middleRows(u * l, l));
  auto comb = kernels::combine_factored(y, f.columns, s.h_hat, mu);
  s.x_next = std::move(comb.x);
  s.flagged_rows = comb.zero_rows;
  s.residual = comb.residual;
  return s;
}

cplx estimate_lambda(const CVector& x_hat, const PilotSpec& pilots) {
  if (pilots.positions.empty()) throw InvalidArgument("scale estimate needs at least one pilot");
  cplx sum = 0.0;
  for (std::size_t i = 0; i < pilots.positions.size(); ++i) {
    const cplx p = pilots.values[i];
    if (std::abs(p) == 0.0) throw InvalidArgument("pilot value must be nonzero");
    const int pos = pilots.positions[i];
    if (pos < 0 || pos >= x_hat.size()) throw InvalidArgument("pilot position out of range");
    sum += x_hat(pos) / p;
  }
  return sum / static_cast<double>(pilots.positions.size());
}

CVector derotate_cluster(const CVector& x_hat, const PilotSpec& pilots, int m) {
  const auto& c = qam(m);
  const Eigen::Index n = x_hat.size();
  if (n < m) throw InvalidArgument("clustering needs at least M samples");
  const double power = x_hat.squaredNorm() / static_cast<double>(n);
  if (!(power > 0)) throw InvalidArgument("cannot cluster an all-zero estimate");
  const CVector x = x_hat / std::sqrt(power);

  const cplx lam = estimate_lambda(x, pilots);
  const cplx spin = std::abs(lam) > 0 ? lam / std::abs(lam) : cplx(1.0, 0.0);
  std::vector<cplx> centroids(static_cast<std::size_t>(m));
  for (int j = 0; j < m; ++j) centroids[static_cast<std::size_t>(j)] = c.points[static_cast<std::size_t>(j)] * spin;

  std::vector<int> assign(static_cast<std::size_t>(n), -1);
  auto nearest = [&](cplx z) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int j = 0; j < m; ++j) {
      const double d = std::norm(z - centroids[static_cast<std::size_t>(j)]);
      if (d < best_d) {
        best_d = d;
        best = j;
      }
    }
    return best;
  };

  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      const int a = nearest(x(i));
      if (a != assign[static_cast<std::size_t>(i)]) {
        assign[static_cast<std::size_t>(i)] = a;
        changed = true;
      }
    }
    if (!changed && iter > 0) break;
    std::vector<cplx> sum(static_cast<std::size_t>(m), 0.0);
    std::vector<int> count(static_cast<std::size_t>(m), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sum[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])] += x(i);
      ++count[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])];
    }
    for (int j = 0; j < m; ++j) {
      const auto jj = static_cast<std::size_t>(j);
      if (count[jj] > 0) {
        centroids[jj] = sum[jj] / static_cast<double>(count[jj]);
        continue;
      }
      // Empty cluster: move it to the sample farthest from its own centroid.
      Eigen::Index far = 0;
      double far_d = -1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const int a = assign[static_cast<std::size_t>(i)];
        if (count[static_cast<std::size_t>(a)] <= 1) continue;
        const double d = std::norm(x(i) - centroids[static_cast<std::size_t>(a)]);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      if (far_d < 0) continue;
      --count[static_cast<std::size_t>(assign[static_cast<std::size_t>(far)])];
      assign[static_cast<std::size_t>(far)] = j;
      count[jj] = 1;
      centroids[jj] = x(far);
    }
  }

  // Undo the pilot phase, then level the top row of centroids with a least-squares line.
  for (auto& ct : centroids) ct /= spin;
  const double top = c.scale * (c.side - 1);
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int cnt = 0;
  for (const auto& ct : centroids) {
    if (std::abs(c.nearest_point(ct).imag() - top) > 1e-9) continue;
    sx += ct.real();
    sy += ct.imag();
    sxx += ct.real() * ct.real();
    sxy += ct.real() * ct.imag();
    ++cnt;
  }
  cplx level(1.0, 0.0);
  const double denom = cnt * sxx - sx * sx;
  if (cnt >= 2 && denom > 1e-12) {
    const double slope = (cnt * sxy - sx * sy) / denom;
    level = std::polar(1.0, -std::atan(slope));
  }
  std::vector<cplx> decided(static_cast<std::size_t>(m));
  for (int j = 0; j < m; ++j)
    decided[static_cast<std::size_t>(j)] = c.nearest_point(centroids[static_cast<std::size_t>(j)] * level);

  CVector out(n);
  for (Eigen::Index i = 0; i < n; ++i) out(i) = decided[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])];
  pin_known(out, pilots, {});
  return out;
}

CoefficientMatrix estimate_coefficient_matrix(const SvdBasis& svd, const std::vector<PilotSpec>& pilots,
                                              double max_condition) {
  const int users = static_cast<int>(pilots.size());
  if (users < 1 || svd.rank() < users)
    throw InvalidArgument("need at least as many singular vectors as users");
  CoefficientMatrix out;
  out.a.resize(users, users);
  for (int u = 0; u < users; ++u) {
    const auto& p = pilots[static_cast<std::size_t>(u)];
    if (p.positions.empty()) throw InvalidArgument("user " + std::to_string(u) + " has no pilot");
    const cplx value = p.values.front();
    if (std::abs(value) == 0.0) throw InvalidArgument("user " + std::to_string(u) + " pilot is zero");
    for (int j = 0; j < users; ++j) out.a(j, u) = svd.left_vectors(p.positions.front(), j) / value;
  }
  const RVector s = Eigen::JacobiSVD<CMatrix>(out.a).singularValues();
  const double smin = s(s.size() - 1);
  out.condition = smin > 0 ? s(0) / smin : std::numeric_limits<double>::infinity();
  if (out.condition > max_condition)
    throw IllConditionedMixing("mixing matrix condition number " + std::to_string(out.condition) +
                                   " exceeds " + std::to_string(max_condition),
                               out.condition);
  return out;
}

CMatrix unmix(const SvdBasis& svd, const CoefficientMatrix& a, bool pseudo_inverse) {
  const Eigen::Index users = a.a.rows();
  const CMatrix u = svd.left_vectors.leftCols(users);
  // U^T = A Z^T  =>  Z = U A^{-T}.
  if (pseudo_inverse)
    return u * a.a.completeOrthogonalDecomposition().pseudoInverse().transpose();
  return u * a.a.partialPivLu().inverse().transpose();
}

std::vector<InitialPoint> multiuser_initial_points(const SvdBasis& svd, const CoefficientMatrix& a,
                                                   const DftSubmatrix& f) {
  const CMatrix z = unmix(svd, a);
  std::vector<InitialPoint> out;
  for (Eigen::Index u = 0; u < z.cols(); ++u) out.push_back(initial_point_circularity(z.col(u), f));
  return out;
}

DecodeResult blind_decode_single(const ReceivedMatrix& y, const BlindConfig& cfg,
                                 const IterationObserver& observer) {
  cfg.validate();
  if (cfg.users() != 1) throw InvalidArgument("single-user decode needs exactly one pilot set");
  const DftSubmatrix f = build_dft_submatrix(static_cast<int>(y.y.rows()), cfg.delays);
  const SvdBasis svd = top_left_singular_vectors(y.y, 1);
  const CVector u1 = svd.left_vectors.col(0);
  InitialPoint init;
  switch (cfg.init) {
    case InitMethod::Variance: init = initial_point_variance(u1, f, cfg.histogram_bins); break;
    case InitMethod::Circularity: init = initial_point_circularity(u1, f); break;
    case InitMethod::GivenTap: init = initial_point_given(u1, f, cfg.given_taps.front()); break;
  }
  CMatrix xs = init.x0;
  std::vector<CMatrix> hs{CMatrix::Zero(f.taps(), y.y.cols())};
  return run_loop(y.y, f, cfg, std::move(xs), std::move(hs), 1, cfg.derotate_at, {init.tap},
                  observer, DecodeResult{});
}

DecodeResult blind_decode_multi(const ReceivedMatrix& y, const BlindConfig& cfg,
                                const IterationObserver& observer) {
  cfg.validate();
  const int users = cfg.users();
  const DftSubmatrix f = build_dft_submatrix(static_cast<int>(y.y.rows()), cfg.delays);
  const SvdBasis svd = top_left_singular_vectors(y.y, users);
  DecodeResult result;
  CoefficientMatrix a = estimate_coefficient_matrix(svd, cfg.pilots, std::numeric_limits<double>::infinity());
  result.mixing_condition = a.condition;
  if (a.condition > cfg.max_mixing_condition) {
    if (!cfg.mixing_fallback)
      throw IllConditionedMixing("mixing matrix condition number " + std::to_string(a.condition) +
                                     " exceeds " + std::to_string(cfg.max_mixing_condition),
                                 a.condition);
    result.mixing_fallback_used = true;
  }
  const CMatrix z = unmix(svd, a, result.mixing_fallback_used);
  CMatrix xs(f.n, users);
  std::vector<int> taps;
  for (int u = 0; u < users; ++u) {
    InitialPoint init;
    switch (cfg.init) {
      case InitMethod::Variance: init = initial_point_variance(z.col(u), f, cfg.histogram_bins); break;
      case InitMethod::Circularity: init = initial_point_circularity(z.col(u), f); break;
      case InitMethod::GivenTap:
        init = initial_point_given(z.col(u), f, cfg.given_taps[static_cast<std::size_t>(u)]);
        break;
    }
    xs.col(u) = init.x0;
    taps.push_back(init.tap);
  }
  std::vector<CMatrix> hs(static_cast<std::size_t>(users), CMatrix::Zero(f.taps(), y.y.cols()));
  return run_loop(y.y, f, cfg, std::move(xs), std::move(hs), 1, cfg.derotate_at, taps, observer,
                  std::move(result));
}

DecodeResult warm_start_decode(const ReceivedMatrix& y, const CMatrix& h_prev, const BlindConfig& cfg,
                               const IterationObserver& observer) {
  cfg.validate(true);
  if (cfg.users() != 1) throw InvalidArgument("warm start is single-user");
  const DftSubmatrix f = build_dft_submatrix(static_cast<int>(y.y.rows()), cfg.delays);
  if (h_prev.rows() != f.taps() || h_prev.cols() != y.y.cols())
    throw InvalidArgument("previous channel shape differs from tap grid x antennas");

  DecodeResult result;
  auto first = kernels::combine_factored(y.y, f.columns, {h_prev}, cfg.mu);
  CMatrix xs = std::move(first.x);
  result.flagged_rows += first.zero_rows;
  result.residuals.push_back(first.residual);

  const int kd = std::min({cfg.derotate_at, 2, cfg.iterations});
  std::vector<CMatrix> hs{h_prev};
  int tap = f.delays.front();
  {
    Eigen::Index best = 0;
    h_prev.rowwise().squaredNorm().maxCoeff(&best);
    tap = f.delays[static_cast<std::size_t>(best)];
  }
  return run_loop(y.y, f, cfg, std::move(xs), std::move(hs), 2, kd, {tap}, observer,
                  std::move(result));
}

}  // namespace blindmimo
