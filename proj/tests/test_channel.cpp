#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>

#include "blindmimo/channel.hpp"
#include "support.hpp"

using namespace blindmimo;
using testsupport::rel_err;

namespace {

// J0(x) = (1/pi) int_0^pi cos(x sin t) dt by composite Simpson; the integrand is smooth and
// periodic, so a few thousand panels give far better than 1e-12 accuracy for |x| < 10.
double bessel_j0_oracle(double x) {
  const int panels = 4000;
  const double h = std::numbers::pi / panels;
  double s = 0.0;
  for (int i = 0; i <= panels; ++i) {
    const double w = (i == 0 || i == panels) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    s += w * std::cos(x * std::sin(i * h));
  }
  return s * h / 3.0 / std::numbers::pi;
}

// The published coefficients are truncated, not rounded, to two decimals.
double trunc2(double x) { return std::floor(x * 100.0 + 1e-9) / 100.0; }

// Sample correlation E[a conj(b)] / sqrt(E|a|^2 E|b|^2), real part.
struct Corr {
  cplx ab = 0.0;
  double aa = 0.0, bb = 0.0;
  void add(cplx a, cplx b) {
    ab += a * std::conj(b);
    aa += std::norm(a);
    bb += std::norm(b);
  }
  double value() const { return ab.real() / std::sqrt(aa * bb); }
  double magnitude() const { return std::abs(ab) / std::sqrt(aa * bb); }
};

}  // namespace

TEST_SUITE("channel") {

TEST_CASE("zero correlation gives the identity") {
  const auto c = exponential_corr(5, 0.0);
  CHECK(c.matrix.isApprox(RMatrix::Identity(5, 5)));
  CHECK(c.sqrt_factor.isApprox(RMatrix::Identity(5, 5)));
}

TEST_CASE("exponential correlation entries and square root") {
  const auto c = exponential_corr(3, 0.7);
  RMatrix expect(3, 3);
  expect << 1, .7, .49, .7, 1, .7, .49, .7, 1;
  CHECK((c.matrix - expect).norm() < 1e-15);
  for (double r : {0.0, 0.3, 0.7, 0.95, 0.999}) {
    const auto s = exponential_corr(64, r);
    Eigen::SelfAdjointEigenSolver<RMatrix> eig(s.matrix);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-10);
    CHECK((s.matrix - s.matrix.transpose()).norm() == 0.0);
    CHECK((s.sqrt_factor * s.sqrt_factor.transpose() - s.matrix).norm() < 1e-9 * s.matrix.norm());
    for (int i = 0; i < 64; ++i) CHECK(s.matrix(i, i) == 1.0);
  }
  CHECK_THROWS_AS(exponential_corr(4, 1.0), InvalidArgument);
  CHECK_THROWS_AS(exponential_corr(4, -0.1), InvalidArgument);
}

TEST_CASE("built-in profiles are normalized and ascending") {
  for (const char* name : {"flat", "ped4", "ped4-dom2", "peda", "peda-dom3", "tdla30-4096"}) {
    const auto p = pdp_by_name(name);
    CHECK(std::abs(std::accumulate(p.powers.begin(), p.powers.end(), 0.0) - 1.0) < 1e-12);
    for (std::size_t i = 1; i < p.delays.size(); ++i) CHECK(p.delays[i] > p.delays[i - 1]);
  }
  CHECK(pdp_by_name("tdla30-4096").taps() == 12);
  CHECK(pdp_by_name("ped4").powers[1] == doctest::Approx(0.5 / 1.875));
  CHECK(pdp_by_name("ped4-dom2").dominant_delay() == 2);
  CHECK(pdp_by_name("peda").dominant_delay() == 0);
  CHECK_THROWS_AS(make_pdp("x", {1, 0}, {1, 1}), InvalidArgument);
  CHECK_THROWS_AS(make_pdp("x", {0, 0}, {1, 1}), InvalidArgument);
  CHECK_THROWS_AS(make_pdp("x", {0}, {0}), InvalidArgument);
}

TEST_CASE("profile files load by path") {
  const auto path = std::filesystem::temp_directory_path() / "blindmimo_pdp_test.json";
  {
    std::ofstream out(path);
    out << R"([{"delay_samples": 2, "power_linear": 1}, {"delay_samples": 0, "power_linear": 3}])";
  }
  const auto p = pdp_by_name(path.string());
  CHECK(p.delays == std::vector<int>{0, 2});
  CHECK(p.powers[0] == doctest::Approx(0.75));
  {
    std::ofstream out(path);
    out << R"([{"delay_samples": 1.5, "power_linear": 1}])";
  }
  CHECK_THROWS_AS(pdp_by_name(path.string()), InvalidArgument);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(pdp_by_name("no-such-profile"), InvalidArgument);
}

TEST_CASE("single-tap entries have variance rho") {
  Rng rng(41);
  const auto pdp = make_pdp("one", {0}, {1.0});
  const auto corr = exponential_corr(10, 0.0);
  double power = 0.0;
  cplx mean = 0.0;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    const auto h = sample_time_channel(pdp, corr, rng);
    power += h.h.squaredNorm();
    mean += h.h.sum();
  }
  const double samples = draws * 10.0;
  CHECK(std::abs(power / samples - 1.0) < 0.02);
  CHECK(std::abs(mean / samples) < 0.02);
}

TEST_CASE("tap rows carry N_r times their profile power") {
  Rng rng(42);
  const auto pdp = pdp_by_name("ped4");
  const auto corr = exponential_corr(16, 0.5);
  RVector acc = RVector::Zero(4);
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) acc += sample_time_channel(pdp, corr, rng).h.rowwise().squaredNorm();
  for (int i = 0; i < 4; ++i) CHECK(std::abs(acc(i) / draws / (16.0 * pdp.powers[static_cast<std::size_t>(i)]) - 1.0) < 0.05);
}

TEST_CASE("adjacent antennas are correlated by r") {
  Rng rng(43);
  const auto pdp = make_pdp("one", {0}, {1.0});
  const auto corr = exponential_corr(8, 0.7);
  Corr c;
  for (int i = 0; i < 10000; ++i) {
    const auto h = sample_time_channel(pdp, corr, rng);
    for (int a = 0; a + 1 < 8; ++a) c.add(h.h(0, a), h.h(0, a + 1));
  }
  CHECK(std::abs(c.value() - 0.7) < 0.05 * 0.7);
}

TEST_CASE("temporal coefficient matches the Bessel integral") {
  CHECK(temporal_coefficient(100.0, 0, 1e-3) == 1.0);
  for (double x : {0.1, 0.5, 1.0, 2.4048, 3.0, 5.5, 9.0}) {
    const double fd = x / (2.0 * std::numbers::pi * 1e-3);
    CHECK(std::abs(temporal_coefficient(fd, 1, 1e-3) - bessel_j0_oracle(x)) < 1e-10);
  }
  CHECK_THROWS_AS(temporal_coefficient(-1.0, 1, 1e-3), InvalidArgument);
  CHECK_THROWS_AS(temporal_coefficient(1.0, 1, 0.0), InvalidArgument);
}

TEST_CASE("the fixed carrier reproduces the published coefficients") {
  const double f5 = doppler_hz(5.0), f10 = doppler_hz(10.0);
  CHECK(trunc2(temporal_coefficient(f5, 1, 5e-3)) == doctest::Approx(0.96));
  CHECK(trunc2(temporal_coefficient(f5, 2, kDefaultSymbolSpacingS)) == doctest::Approx(0.87));
  CHECK(trunc2(temporal_coefficient(f10, 1, 5e-3)) == doctest::Approx(0.87));
  CHECK(trunc2(temporal_coefficient(f10, 1, 10e-3)) == doctest::Approx(0.53));
}

TEST_CASE("evolution with eta one keeps the channel") {
  Rng rng(44);
  const auto pdp = pdp_by_name("ped4");
  const auto corr = exponential_corr(8, 0.7);
  const auto h0 = sample_time_channel(pdp, corr, rng);
  CHECK(evolve_channel(h0, 1.0, corr, rng).h == h0.h);
  CHECK_THROWS_AS(evolve_channel(h0, 1.5, corr, rng), InvalidArgument);
}

TEST_CASE("evolution correlation equals eta and the marginal is preserved") {
  Rng rng(45);
  const auto pdp = pdp_by_name("ped4");
  const auto corr = exponential_corr(4, 0.0);
  for (double eta : {0.0, 0.87}) {
    Corr c;
    double p0 = 0.0, p1 = 0.0;
    for (int i = 0; i < 10000; ++i) {
      const auto h0 = sample_time_channel(pdp, corr, rng);
      const auto h1 = evolve_channel(h0, eta, corr, rng);
      c.add(h1.h(0, 0), h0.h(0, 0));
      p0 += h0.h.squaredNorm();
      p1 += h1.h.squaredNorm();
    }
    if (eta == 0.0)
      CHECK(c.magnitude() < 4.0 / std::sqrt(10000.0));  // exceeded with probability e^-16
    else
      CHECK(std::abs(c.value() - eta) < 0.02);
    CHECK(std::abs(p1 / p0 - 1.0) < 0.03);
  }
}

TEST_CASE("noiseless single zero-delay tap with unit gains copies the symbols") {
  Rng rng(46);
  const auto f = build_dft_submatrix(64, {0});
  const auto g = build_tx_symbol(rng, 64, 16, rotational_pilots(64, 1, 16));
  TimeChannel ch{CMatrix::Ones(1, 4), make_pdp("one", {0}, {1.0})};
  const auto y = apply_channel({&g}, {&ch}, f, kNoiselessSnr, rng);
  CHECK(y.noise_variance == 0.0);
  for (int c = 0; c < 4; ++c) CHECK((y.y.col(c) - g.symbols).norm() == 0.0);
}

TEST_CASE("noise power equals sigma squared") {
  Rng rng(47);
  const auto f = build_dft_submatrix(1024, {0});
  const auto g = build_tx_symbol(rng, 1024, 4, rotational_pilots(1024, 1, 4));
  TimeChannel ch{CMatrix::Zero(1, 128), make_pdp("one", {0}, {1.0})};
  const auto y = apply_channel({&g}, {&ch}, f, 7.0, rng);
  CHECK(y.noise_variance == doctest::Approx(std::pow(10.0, -0.7)));
  CHECK(std::abs(y.y.squaredNorm() / (1024.0 * 128.0) / y.noise_variance - 1.0) < 0.01);
  CHECK(noise_variance_for_snr(10.0) == doctest::Approx(0.1));
}

TEST_CASE("per-user signal power sets the SNR") {
  Rng rng(48);
  const auto pdp = pdp_by_name("ped4");
  const auto corr = exponential_corr(16, 0.0);
  const auto f = build_dft_submatrix(256, pdp.delays);
  double power = 0.0;
  for (int i = 0; i < 400; ++i) {
    const auto g = build_tx_symbol(rng, 256, 64, rotational_pilots(256, 1, 64));
    const auto h = sample_time_channel(pdp, corr, rng);
    power += noiseless_signal({&g}, {&h}, f).squaredNorm() / (256.0 * 16.0);
  }
  CHECK(std::abs(power / 400.0 - 1.0) < 0.03);
}

TEST_CASE("two users superpose linearly") {
  Rng rng(49);
  const auto f = build_dft_submatrix(128, {0, 3});
  const auto pilots = multiuser_rotational_pilots(128, 2, 16);
  const auto g0 = build_tx_symbol(rng, 128, 16, pilots[0], pilots[1].positions);
  const auto g1 = build_tx_symbol(rng, 128, 16, pilots[1], pilots[0].positions);
  const auto corr = exponential_corr(6, 0.0);
  const auto h0 = sample_time_channel(make_pdp("a", {0}, {1.0}), corr, rng);
  const auto h1 = sample_time_channel(make_pdp("b", {3}, {1.0}), corr, rng);
  const CMatrix both = noiseless_signal({&g0, &g1}, {&h0, &h1}, f);
  const CMatrix parts = noiseless_signal({&g0}, {&h0}, f) + noiseless_signal({&g1}, {&h1}, f);
  CHECK(rel_err(both, parts) < 1e-14);
  const CMatrix louder = noiseless_signal({&g0, &g1}, {&h0, &h1}, f, {6.0, 0.0});
  CHECK(rel_err(louder, std::pow(10.0, 0.3) * noiseless_signal({&g0}, {&h0}, f) +
                            noiseless_signal({&g1}, {&h1}, f)) < 1e-14);
}

TEST_CASE("dimension mismatches are rejected") {
  Rng rng(50);
  const auto f = build_dft_submatrix(64, {0});
  const auto g = build_tx_symbol(rng, 32, 4, rotational_pilots(32, 1, 4));
  TimeChannel ch{CMatrix::Ones(1, 4), make_pdp("one", {0}, {1.0})};
  CHECK_THROWS_AS(apply_channel({&g}, {&ch}, f, 10.0, rng), InvalidArgument);
  TimeChannel off{CMatrix::Ones(1, 4), make_pdp("d", {5}, {1.0})};
  CHECK_THROWS_AS(embed_channel(off, f), InvalidArgument);
}

}
