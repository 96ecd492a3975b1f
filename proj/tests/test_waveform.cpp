#include <doctest.h>

#include <cmath>
#include <set>

#include "blindmimo/waveform.hpp"
#include "support.hpp"

using namespace blindmimo;

namespace {

constexpr int kOrders[] = {4, 16, 64, 256};

// Brute-force nearest point with the documented tie-break.
cplx scan_nearest(cplx z, int m) {
  const auto& pts = qam(m).points;
  cplx best = pts[0];
  double best_d = std::norm(z - best);
  for (const auto& p : pts) {
    const double d = std::norm(z - p);
    const bool closer = d < best_d - 1e-12;
    const bool tie = std::abs(d - best_d) <= 1e-12;
    if (closer || (tie && (p.real() < best.real() - 1e-12 ||
                           (std::abs(p.real() - best.real()) <= 1e-12 && p.imag() < best.imag())))) {
      best = p;
      best_d = d;
    }
  }
  return best;
}

Bits label_bits(int label, int k) {
  Bits b;
  for (int i = k - 1; i >= 0; --i) b.push_back(static_cast<std::uint8_t>((label >> i) & 1));
  return b;
}

}  // namespace

TEST_SUITE("waveform") {

TEST_CASE("QPSK 00 maps to the first-quadrant corner") {
  const CVector s = qam_modulate({0, 0}, 4);
  CHECK(std::abs(s(0) - cplx(1, 1) / std::sqrt(2.0)) < 1e-15);
}

TEST_CASE("constellations have unit average energy and a Gray bijection") {
  for (int m : kOrders) {
    const auto& c = qam(m);
    REQUIRE(static_cast<int>(c.points.size()) == m);
    double e = 0.0;
    for (const auto& p : c.points) e += std::norm(p);
    CHECK(std::abs(e / m - 1.0) < 1e-12);

    std::set<std::pair<long, long>> seen;
    for (const auto& p : c.points) seen.insert({std::lround(p.real() / c.scale), std::lround(p.imag() / c.scale)});
    CHECK(static_cast<int>(seen.size()) == m);

    // Grid neighbours (distance 2*scale) differ in exactly one bit.
    int pairs = 0;
    for (int a = 0; a < m; ++a)
      for (int b = a + 1; b < m; ++b)
        if (std::abs(std::abs(c.points[static_cast<std::size_t>(a)] - c.points[static_cast<std::size_t>(b)]) -
                     2.0 * c.scale) < 1e-9) {
          ++pairs;
          CHECK(__builtin_popcount(static_cast<unsigned>(a ^ b)) == 1);
        }
    const int side = c.side;
    CHECK(pairs == 2 * side * (side - 1));
  }
}

TEST_CASE("modulate and demodulate round trip for every order") {
  Rng rng(31);
  std::bernoulli_distribution coin(0.5);
  for (int m : kOrders) {
    const int k = qam(m).bits_per_symbol;
    for (int block = 0; block < 10000; ++block) {
      Bits b(static_cast<std::size_t>(k * 4));
      for (auto& x : b) x = coin(rng) ? 1 : 0;
      REQUIRE(qam_demodulate(qam_modulate(b, m), m) == b);
    }
  }
}

TEST_CASE("bit count not divisible by bits per symbol") {
  CHECK_THROWS_AS(qam_modulate({0, 1, 1}, 4), InvalidArgument);
  CHECK_THROWS_AS(qam_modulate(Bits(10), 64), InvalidArgument);
  CHECK_THROWS_AS(qam(8), InvalidArgument);
}

TEST_CASE("exact points demodulate to their own label") {
  for (int m : kOrders) {
    const auto& c = qam(m);
    for (int label = 0; label < m; ++label) {
      CVector s(1);
      s(0) = c.points[static_cast<std::size_t>(label)];
      CHECK(qam_demodulate(s, m) == label_bits(label, c.bits_per_symbol));
      CHECK(nearest_constellation_point(s(0), m) == s(0));
    }
  }
}

TEST_CASE("the origin breaks ties toward smaller real then smaller imaginary part") {
  const cplx expect = cplx(-1, -1) / std::sqrt(2.0);
  CHECK(std::abs(nearest_constellation_point(0.0, 4) - expect) < 1e-15);
  CVector s = CVector::Zero(1);
  const Bits got = qam_demodulate(s, 4);
  int label = -1;
  for (int l = 0; l < 4; ++l)
    if (std::abs(qam(4).points[static_cast<std::size_t>(l)] - expect) < 1e-15) label = l;
  CHECK(got == label_bits(label, 2));
}

TEST_CASE("nearest point agrees with a full scan, ties included") {
  Rng rng(32);
  std::uniform_real_distribution<double> u(-1.6, 1.6);
  for (int m : kOrders) {
    const auto& c = qam(m);
    for (int i = 0; i < 5000; ++i) {
      const cplx z(u(rng), u(rng));
      CHECK(nearest_constellation_point(z, m) == scan_nearest(z, m));
    }
    // Decision boundaries sit on even multiples of the scale.
    for (int a = -c.side; a <= c.side; a += 2)
      for (int b = -c.side; b <= c.side; b += 2) {
        const cplx z(a * c.scale, b * c.scale);
        CHECK(std::abs(nearest_constellation_point(z, m) - scan_nearest(z, m)) < 1e-12);
      }
  }
}

TEST_CASE("64-QAM at 30 dB has bit error rate below 1e-4") {
  Rng rng(33);
  const int symbols = 100000;
  std::uniform_int_distribution<int> lab(0, 63);
  const double sigma2 = std::pow(10.0, -3.0);
  Bits bits;
  CVector s(symbols);
  for (int i = 0; i < symbols; ++i) {
    const int l = lab(rng);
    const Bits b = label_bits(l, 6);
    bits.insert(bits.end(), b.begin(), b.end());
    s(i) = qam(64).points[static_cast<std::size_t>(l)] + complex_normal(rng, sigma2);
  }
  const Bits got = qam_demodulate(s, 64);
  long errors = 0;
  for (std::size_t i = 0; i < bits.size(); ++i) errors += bits[i] != got[i];
  CHECK(static_cast<double>(errors) / static_cast<double>(bits.size()) < 1e-4);
}

TEST_CASE("pilot subcarriers carry the pilot value") {
  Rng rng(34);
  PilotSpec p{{0}, {cplx(1, 1) / std::sqrt(2.0)}};
  const auto g = build_tx_symbol(rng, 8, 4, p);
  CHECK(g.symbols(0) == p.values[0]);
  CHECK(g.data_count() == 7);
  CHECK(g.bits.size() == 14);
}

TEST_CASE("one rotational pilot leaves 1023 of 1024 subcarriers for data") {
  Rng rng(35);
  const auto p = rotational_pilots(1024, 1, 64);
  REQUIRE(p.positions == std::vector<int>{512});
  CHECK(p.values[0] == qam(64).corner());
  const auto g = build_tx_symbol(rng, 1024, 64, p);
  CHECK(g.data_count() == 1023);
  CHECK(g.utilization() == doctest::Approx(1023.0 / 1024.0).epsilon(1e-15));
  CHECK(std::round(g.utilization() * 1000.0) / 10.0 == doctest::Approx(99.9));
}

TEST_CASE("grids are constellation points with pilots and muted slots in place") {
  Rng rng(36);
  const auto pilots = multiuser_rotational_pilots(256, 4, 16);
  const auto g = build_tx_symbol(rng, 256, 16, pilots[1], {pilots[0].positions[0], pilots[2].positions[0]});
  CHECK(g.symbols(pilots[1].positions[0]) == pilots[1].values[0]);
  CHECK(g.symbols(pilots[0].positions[0]) == cplx(0, 0));
  CHECK(g.data_count() == 253);
  for (int p : g.data_positions) CHECK(nearest_constellation_point(g.symbols(p), 16) == g.symbols(p));
  CHECK(qam_modulate(g.bits, 16).size() == g.data_count());
}

TEST_CASE("a fixed seed reproduces the grid") {
  const auto p = rotational_pilots(512, 2, 64);
  Rng a(99), b(99);
  const auto ga = build_tx_symbol(a, 512, 64, p);
  const auto gb = build_tx_symbol(b, 512, 64, p);
  CHECK(ga.symbols == gb.symbols);
  CHECK(ga.bits == gb.bits);
}

TEST_CASE("invalid pilot layouts are rejected") {
  Rng rng(37);
  CHECK_THROWS_AS(build_tx_symbol(rng, 8, 4, PilotSpec{{2, 2}, {1.0, 1.0}}), InvalidArgument);
  CHECK_THROWS_AS(build_tx_symbol(rng, 8, 4, PilotSpec{{8}, {1.0}}), InvalidArgument);
  CHECK_THROWS_AS(build_tx_symbol(rng, 8, 4, PilotSpec{{1}, {}}), InvalidArgument);
  CHECK_THROWS_AS(rotational_pilots(8, 0, 4), InvalidArgument);
}

TEST_CASE("average transmitted energy per subcarrier is one") {
  Rng rng(38);
  for (int m : kOrders) {
    double e = 0.0;
    long count = 0;
    for (int i = 0; i < 100; ++i) {
      const auto g = build_tx_symbol(rng, 1024, m, rotational_pilots(1024, 1, m));
      for (int p : g.data_positions) e += std::norm(g.symbols(p));
      count += g.data_count();
    }
    REQUIRE(count >= 100000);
    CHECK(std::abs(e / static_cast<double>(count) - 1.0) < 0.01);
  }
}

TEST_CASE("bit errors count data subcarriers only") {
  Rng rng(39);
  const auto p = rotational_pilots(64, 1, 4);
  const auto g = build_tx_symbol(rng, 64, 4, p);
  CHECK(count_bit_errors(g, g.symbols) == 0);
  CVector wrong = g.symbols;
  wrong(p.positions[0]) = -wrong(p.positions[0]);
  CHECK(count_bit_errors(g, wrong) == 0);
  wrong(g.data_positions[0]) = -wrong(g.data_positions[0]);
  CHECK(count_bit_errors(g, wrong) == 2);
}

}
