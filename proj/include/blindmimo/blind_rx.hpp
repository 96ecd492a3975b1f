#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "blindmimo/channel.hpp"
#include "blindmimo/numerics.hpp"
#include "blindmimo/types.hpp"
#include "blindmimo/waveform.hpp"

namespace blindmimo {

enum class InitMethod { Variance, Circularity, GivenTap };

/// How the residual complex scale is removed.
/// InLoop: divide by the pilot estimate at iteration k*, then map to the constellation
///         (pilots pinned) after every later step.
/// LambdaOnly: plain iterations, one pilot-based division at the end.
/// Cluster: plain iterations, then k-means de-rotation of the final estimate.
enum class Derotation { InLoop, LambdaOnly, Cluster };

struct BlindConfig {
  int iterations = 10;
  double mu = 0.1;
  int derotate_at = 4;
  int qam_order = 64;
  std::vector<int> delays{0, 1, 2, 3};
  InitMethod init = InitMethod::Variance;
  Derotation derotation = Derotation::InLoop;
  int histogram_bins = 64;
  std::vector<PilotSpec> pilots;  // one entry per user
  std::vector<int> given_taps;    // dominant delay per user, for InitMethod::GivenTap
  /// On an ill-conditioned mixing matrix, unmix with a pseudo-inverse instead of failing.
  bool mixing_fallback = false;
  double max_mixing_condition = 1e6;

  int users() const { return static_cast<int>(pilots.size()); }
  /// Throws InvalidArgument naming the offending field.
  void validate(bool warm_start = false) const;
};

struct InitialPoint {
  CVector x0;
  int tap = 0;  // delay of the selected candidate
};

struct UserDecode {
  CVector symbols;  // final estimate; hard-mapped when the schedule maps
  Bits hard_bits;   // demodulation of all N symbols in subcarrier order
  cplx lambda_hat{1.0, 0.0};
  CMatrix h_hat;    // L x N_r on the configured tap grid
  int dominant_tap = 0;
  int iterations_used = 0;
};

struct DecodeResult {
  std::vector<UserDecode> users;
  std::vector<double> residuals;  // ||Y - X F H||_F per iteration, before mapping
  int flagged_rows = 0;           // subcarriers whose combining denominator vanished
  double mixing_condition = 1.0;
  bool mixing_fallback_used = false;
};

/// Called after each iteration k at or beyond the de-rotation point with the current
/// per-user symbol estimates (N x U).
using IterationObserver = std::function<void(int k, const CMatrix& symbols)>;

InitialPoint initial_point_variance(const CVector& u1, const DftSubmatrix& f, int bins = 64);
InitialPoint initial_point_circularity(const CVector& z, const DftSubmatrix& f);
InitialPoint initial_point_given(const CVector& z, const DftSubmatrix& f, int delay);

struct SingleStep {
  CMatrix h_hat;
  CVector x_next;
  int flagged_rows = 0;
  double residual = 0.0;  // ||Y - diag(x_next) F h_hat||_F
};
SingleStep am_step_single(const CMatrix& y, const CVector& x_hat, const DftSubmatrix& f, double mu);

struct MultiStep {
  std::vector<CMatrix> h_hat;
  CMatrix x_next;  // N x U
  int flagged_rows = 0;
  double residual = 0.0;
};
MultiStep am_step_multi(const CMatrix& y, const CMatrix& x_hat, const DftSubmatrix& f, double mu);

/// Mean of x_hat(p_i) / P_i, so that x_hat ~ lambda * x_true.
cplx estimate_lambda(const CVector& x_hat, const PilotSpec& pilots);

/// k-means de-rotation; returns hard constellation symbols with pilots pinned.
CVector derotate_cluster(const CVector& x_hat, const PilotSpec& pilots, int m);

struct CoefficientMatrix {
  CMatrix a;  // a(j, u) = u_j(p_u) / x_{p_u}(u)
  double condition = 1.0;
};

CoefficientMatrix estimate_coefficient_matrix(const SvdBasis& svd,
                                              const std::vector<PilotSpec>& pilots,
                                              double max_condition = 1e6);

/// Z = U A^{-T}: column u is user u's unmixed direction.
CMatrix unmix(const SvdBasis& svd, const CoefficientMatrix& a, bool pseudo_inverse = false);

std::vector<InitialPoint> multiuser_initial_points(const SvdBasis& svd, const CoefficientMatrix& a,
                                                   const DftSubmatrix& f);

DecodeResult blind_decode_single(const ReceivedMatrix& y, const BlindConfig& cfg,
                                 const IterationObserver& observer = {});
DecodeResult blind_decode_multi(const ReceivedMatrix& y, const BlindConfig& cfg,
                                const IterationObserver& observer = {});
/// Starts from the previous symbol's channel (L x N_r on cfg.delays). Iteration 1 is the
/// combining half-step; de-rotation happens at min(k*, 2, T).
DecodeResult warm_start_decode(const ReceivedMatrix& y, const CMatrix& h_prev,
                               const BlindConfig& cfg, const IterationObserver& observer = {});

}  // namespace blindmimo
