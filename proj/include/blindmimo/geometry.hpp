#pragma once

#include <vector>

#include "blindmimo/types.hpp"

namespace blindmimo {

/// Convex hull of points in the complex plane, counter-clockwise, collinear points dropped.
std::vector<cplx> convex_hull(const CVector& points);

/// 4 pi area / perimeter^2 of the convex hull; 0 for a degenerate (collinear) hull.
double circularity(const CVector& points);

/// Variance of the counts in `bins` equal angle bins over [-pi, pi). Angles are first
/// rotated so the circular mean of 4*angle is zero, which makes the score invariant to
/// a global phase up to the quarter-turn symmetry of square constellations.
double angle_histogram_variance(const CVector& points, int bins = 64);

}  // namespace blindmimo
