#pragma once

#include <span>
#include <vector>

#include "navdp/chart.hpp"
#include "navdp/geometry.hpp"

namespace navdp {

struct CurrentSpec {
  /// Construction bound of the field and of every current estimate, in [0, 1].
  double w_max = 0.0;
  /// Off by default. When set, |W| is additionally capped at w_max.
  bool clamp_magnitude = false;
};

struct SignedSum {
  std::vector<int> signs;  // each +1 or -1
  Vec2 resultant;
};

/// Choose s_i in {+1, -1} maximizing |sum s_i v_i|.
///
/// For the optimal pattern every s_i equals sign(v_i . u) with u the direction of the resultant,
/// so it suffices to sweep u around the circle. The sign pattern only changes where u crosses a
/// direction perpendicular to some v_i; sorting those 2N critical angles and flipping one sign per
/// crossing visits every candidate pattern in O(N log N). Among (numerically) equal maxima the
/// pattern that is lexicographically greatest with +1 > -1 wins; zero vectors get +1.
SignedSum maximize_signed_sum(std::span<const Vec2> vectors);

/// Unscaled direction field: the quarter-turned sign-maximized sum of per-island gradients.
Vec2 raw_current_direction(const Chart &chart, Vec2 p);

/// Hidden water current at p.
///
/// With w = raw_current_direction(p):
///   f(p) >= 0.9, |w| > w_max, w = 0 or w_max = 0  ->  (0, 0)
///   otherwise                                       ->  (w_max - |w|) / (2 w_max |w|) * w
Vec2 water_current(const Chart &chart, const CurrentSpec &spec, Vec2 p);

}  // namespace navdp
