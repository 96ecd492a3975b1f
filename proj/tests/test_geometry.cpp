#include <doctest.h>

#include <cmath>
#include <numbers>

#include "blindmimo/geometry.hpp"
#include "blindmimo/waveform.hpp"
#include "support.hpp"

using namespace blindmimo;

TEST_SUITE("geometry") {

TEST_CASE("points on a circle have circularity one") {
  for (int n : {256, 1024}) {
    CVector pts(n);
    for (int i = 0; i < n; ++i) pts(i) = std::polar(2.5, 2.0 * std::numbers::pi * i / n);
    CHECK(std::abs(circularity(pts) - 1.0) < 0.02);
  }
}

TEST_CASE("points on a square outline have circularity pi over four") {
  CVector pts(400);
  for (int i = 0; i < 100; ++i) {
    const double t = -1.0 + 2.0 * i / 100.0;
    pts(i) = {t, -1.0};
    pts(100 + i) = {1.0, t};
    pts(200 + i) = {-t, 1.0};
    pts(300 + i) = {-1.0, -t};
  }
  CHECK(std::abs(circularity(pts) - std::numbers::pi / 4.0) < 0.02 * std::numbers::pi / 4.0);
  // A square constellation is the same shape.
  CVector qam64(64);
  for (int i = 0; i < 64; ++i) qam64(i) = qam(64).points[static_cast<std::size_t>(i)];
  CHECK(std::abs(circularity(qam64) - std::numbers::pi / 4.0) < 1e-12);
}

TEST_CASE("collinear and tiny inputs are degenerate") {
  CVector line(10);
  for (int i = 0; i < 10; ++i) line(i) = cplx(i, 2.0 * i);
  CHECK(circularity(line) == 0.0);
  CHECK(circularity(CVector::Zero(5)) == 0.0);
  CHECK(circularity(CVector::Ones(2)) == 0.0);
}

TEST_CASE("hull is counter-clockwise and drops interior points") {
  CVector pts(6);
  pts << cplx(0, 0), cplx(2, 0), cplx(2, 2), cplx(0, 2), cplx(1, 1), cplx(1, 0);
  const auto hull = convex_hull(pts);
  REQUIRE(hull.size() == 4);
  double area2 = 0.0;
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const cplx a = hull[i], b = hull[(i + 1) % hull.size()];
    area2 += a.real() * b.imag() - b.real() * a.imag();
  }
  CHECK(area2 == doctest::Approx(8.0));
}

TEST_CASE("circularity is invariant to rotation, scale and translation") {
  Rng rng(51);
  const CVector pts = testsupport::random_vector(rng, 300);
  const double c0 = circularity(pts);
  const CVector moved = (pts * std::polar(3.0, 0.7)).array() + cplx(5, -2);
  CHECK(std::abs(circularity(moved) - c0) < 1e-12);
}

TEST_CASE("angle histogram score ignores a global phase") {
  Rng rng(52);
  CVector pts(1023);
  std::uniform_int_distribution<int> lab(0, 63);
  for (Eigen::Index i = 0; i < pts.size(); ++i)
    pts(i) = qam(64).points[static_cast<std::size_t>(lab(rng))] * (1.0 + 0.05 * std::abs(complex_normal(rng)));
  const double s0 = angle_histogram_variance(pts);
  for (double theta : {0.3, 1.1, 2.0, -2.9}) {
    const double s = angle_histogram_variance(pts * std::polar(1.0, theta));
    CHECK(std::abs(s - s0) <= 1e-9 * s0);
  }
  // Constellation angles cluster, Gaussian angles do not.
  CHECK(s0 > angle_histogram_variance(testsupport::random_vector(rng, 1023)));
}

}
