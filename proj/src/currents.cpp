#include "navdp/currents.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace navdp {

namespace {

// Relative window inside which two candidate norms count as tied.
constexpr double kTieTolerance = 1e-12;

struct Crossing {
  double angle;
  std::size_t index;
};

double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a, two_pi);
  return a < 0.0 ? a + two_pi : a;
}

// Canonical orientation: s and -s give the same norm, keep the one whose first nonzero-vector
// sign is +1.
void canonicalize(std::vector<int> &signs, std::span<const Vec2> v) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i].x == 0.0 && v[i].y == 0.0) continue;
    if (signs[i] < 0)
      for (std::size_t j = 0; j < v.size(); ++j)
        if (v[j].x != 0.0 || v[j].y != 0.0) signs[j] = -signs[j];
    return;
  }
}

}  // namespace

SignedSum maximize_signed_sum(std::span<const Vec2> vectors) {
  SignedSum best{std::vector<int>(vectors.size(), 1), {}};
  std::vector<Crossing> crossings;
  crossings.reserve(2 * vectors.size());
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    const Vec2 &v = vectors[i];
    if (v.x == 0.0 && v.y == 0.0) continue;
    const double theta = std::atan2(v.y, v.x);
    crossings.push_back({wrap_angle(theta + std::numbers::pi / 2), i});
    crossings.push_back({wrap_angle(theta - std::numbers::pi / 2), i});
  }
  if (crossings.empty()) return best;
  std::sort(crossings.begin(), crossings.end(),
            [](const Crossing &a, const Crossing &b) { return a.angle < b.angle || (a.angle == b.angle && a.index < b.index); });

  // Start in the middle of the arc that wraps past 2*pi.
  const double first = crossings.front().angle;
  const double last = crossings.back().angle;
  const double start_angle = 0.5 * (last + first + 2.0 * std::numbers::pi);
  const Vec2 u{std::cos(start_angle), std::sin(start_angle)};

  std::vector<int> signs(vectors.size(), 1);
  Vec2 sum;
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (dot(vectors[i], u) < 0.0) signs[i] = -1;
    sum += signs[i] * vectors[i];
  }

  std::vector<int> candidate_signs = signs;
  double best_norm = -1.0;
  auto consider = [&](const std::vector<int> &s, const Vec2 &r) {
    const double n = norm(r);
    candidate_signs = s;
    canonicalize(candidate_signs, vectors);
    if (n > best_norm * (1.0 + kTieTolerance) ||
        (n >= best_norm * (1.0 - kTieTolerance) &&
         std::lexicographical_compare(best.signs.begin(), best.signs.end(), candidate_signs.begin(),
                                      candidate_signs.end()))) {
      best_norm = std::max(n, best_norm);
      best.signs = candidate_signs;
    }
  };

  consider(signs, sum);
  for (std::size_t c = 0; c < crossings.size(); ++c) {
    const std::size_t i = crossings[c].index;
    sum -= (2.0 * signs[i]) * vectors[i];
    signs[i] = -signs[i];
    // coincident critical angles are one crossing
    if (c + 1 < crossings.size() && crossings[c + 1].angle == crossings[c].angle) continue;
    consider(signs, sum);
  }

  // Recompute the resultant from the chosen signs so it carries no accumulated drift.
  best.resultant = {};
  for (std::size_t i = 0; i < vectors.size(); ++i) best.resultant += best.signs[i] * vectors[i];
  return best;
}

Vec2 raw_current_direction(const Chart &chart, Vec2 p) {
  const std::size_t n = chart.islands().size();
  std::vector<Vec2> gradients(n);
  for (std::size_t i = 0; i < n; ++i) gradients[i] = chart.island_gradient(i, p);
  return rotate90(maximize_signed_sum(gradients).resultant);
}

Vec2 water_current(const Chart &chart, const CurrentSpec &spec, Vec2 p) {
  if (!(spec.w_max > 0.0)) return {};
  if (chart.land_height(p) >= kLandThreshold) return {};
  const Vec2 w = raw_current_direction(chart, p);
  const double magnitude = norm(w);
  if (magnitude == 0.0 || magnitude > spec.w_max) return {};
  Vec2 out = w * ((spec.w_max - magnitude) / (2.0 * spec.w_max * magnitude));
  if (spec.clamp_magnitude) out = clamp_to_ball(out, spec.w_max);
  return out;
}

}  // namespace navdp
