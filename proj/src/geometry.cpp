#include "blindmimo/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace blindmimo {

namespace {

double cross(cplx o, cplx a, cplx b) {
  return (a.real() - o.real()) * (b.imag() - o.imag()) -
         (a.imag() - o.imag()) * (b.real() - o.real());
}

}  // namespace

std::vector<cplx> convex_hull(const CVector& points) {
  std::vector<cplx> p(points.data(), points.data() + points.size());
  std::sort(p.begin(), p.end(), [](cplx a, cplx b) {
    return a.real() < b.real() || (a.real() == b.real() && a.imag() < b.imag());
  });
  p.erase(std::unique(p.begin(), p.end()), p.end());
  if (p.size() < 3) return p;

  // Andrew's monotone chain.
  std::vector<cplx> hull(2 * p.size());
  std::size_t k = 0;
  for (const auto& pt : p) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], pt) <= 0) --k;
    hull[k++] = pt;
  }
  for (std::size_t i = p.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], p[i]) <= 0) --k;
    hull[k++] = p[i];
  }
  hull.resize(k - 1);
  return hull;
}

double circularity(const CVector& points) {
  const auto hull = convex_hull(points);
  if (hull.size() < 3) return 0.0;
  double area2 = 0.0;
  double perimeter = 0.0;
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const cplx a = hull[i];
    const cplx b = hull[(i + 1) % hull.size()];
    area2 += a.real() * b.imag() - b.real() * a.imag();
    perimeter += std::abs(b - a);
  }
  if (!(perimeter > 0.0)) return 0.0;
  return 4.0 * std::numbers::pi * (0.5 * std::abs(area2)) / (perimeter * perimeter);
}

double angle_histogram_variance(const CVector& points, int bins) {
  if (bins < 1 || points.size() == 0) return 0.0;
  cplx m4 = 0.0;
  for (Eigen::Index i = 0; i < points.size(); ++i) {
    const double a = std::arg(points(i));
    m4 += std::polar(1.0, 4.0 * a);
  }
  const double offset = std::abs(m4) > 0 ? std::arg(m4) / 4.0 : 0.0;
  std::vector<double> counts(static_cast<std::size_t>(bins), 0.0);
  const double two_pi = 2.0 * std::numbers::pi;
  for (Eigen::Index i = 0; i < points.size(); ++i) {
    double a = std::arg(points(i)) - offset;
    a -= two_pi * std::floor((a + std::numbers::pi) / two_pi);  // wrap to [-pi, pi)
    auto b = static_cast<int>(std::floor((a + std::numbers::pi) / two_pi * bins));
    b = std::clamp(b, 0, bins - 1);
    counts[static_cast<std::size_t>(b)] += 1.0;
  }
  const double mean = static_cast<double>(points.size()) / bins;
  double var = 0.0;
  for (double c : counts) var += (c - mean) * (c - mean);
  return var / bins;
}

}  // namespace blindmimo
