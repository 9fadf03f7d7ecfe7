#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "navdp/geometry.hpp"

namespace navdp {

/// Height at which the vessel operates; any position with f >= this is a crash.
inline constexpr double kLandThreshold = 0.9;

enum class DensityBand { low, medium, high };

struct IslandCountRange {
  int min = 0;
  int max = 0;
};

IslandCountRange island_count_range(DensityBand band);
std::string_view to_string(DensityBand band);
DensityBand parse_density_band(std::string_view text);

/// One Gaussian bump A * exp(-(a dx^2 + 2 b dx dy + c dy^2)).
struct Island {
  double amplitude = 1.0;
  double quad_a = 1.0;
  double quad_b = 0.0;
  double quad_c = 1.0;
  Vec2 center;

  double quadratic_form(const Vec2 &d) const {
    return quad_a * d.x * d.x + 2.0 * quad_b * d.x * d.y + quad_c * d.y * d.y;
  }

  /// True when the parameters satisfy the generator's ranges and the form is positive definite.
  bool valid(const Domain &domain) const;
};

class ChartFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PlacementError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {
struct LandIndex;
}

/// An immutable periodic domain populated with Gaussian islands.
///
/// The land function is the sum over islands of the island Gaussian evaluated at the 3x3 block
/// of periodic images around the fundamental domain. Copies share the lazily built land index.
class Chart {
 public:
  Chart();
  Chart(Domain domain, std::vector<Island> islands, std::uint64_t seed = 0,
        DensityBand band = DensityBand::low);

  const Domain &domain() const { return domain_; }
  std::span<const Island> islands() const { return islands_; }
  std::uint64_t seed() const { return seed_; }
  DensityBand band() const { return band_; }

  double land_height(Vec2 p) const;
  Vec2 land_gradient(Vec2 p) const;

  /// Height and gradient of a single island, summed over its periodic images.
  double island_height(std::size_t index, Vec2 p) const;
  Vec2 island_gradient(std::size_t index, Vec2 p) const;

  /// Equivalent to land_height(p) >= kLandThreshold, answered from a bound table where possible.
  bool is_land(Vec2 p) const;

  /// Lower bound on the distance from p to any land point (infinite for an empty chart).
  double clearance(Vec2 p) const;

  /// Line-oriented text record, 17 significant digits, reload is bit-faithful.
  std::string serialize() const;
  static Chart parse(std::string_view text);

  /// FNV-1a over the serialized form.
  std::uint64_t hash() const;

 private:
  const detail::LandIndex &land_index() const;

  Domain domain_;
  std::vector<Island> islands_;
  std::uint64_t seed_ = 0;
  DensityBand band_ = DensityBand::low;
  std::shared_ptr<detail::LandIndex> index_;
};

struct ChartSamplingOptions {
  /// Upper end for the quadratic coefficients a and c (lower end is 1).
  double quad_max = 4.0;
  /// Overrides the band's island count when set.
  std::optional<int> island_count;
};

Chart sample_chart(std::uint64_t seed, DensityBand band, Domain domain = {},
                   const ChartSamplingOptions &options = {});

inline constexpr int kPlacementRetryCap = 10000;

/// Rejection-samples an ocean point (f < 0.9) outside the optional exclusion disc.
/// Throws PlacementError after `max_draws` unsuccessful draws.
Vec2 sample_free_position(const Chart &chart, std::mt19937_64 &rng,
                          const std::optional<Disc> &exclusion = std::nullopt,
                          int max_draws = kPlacementRetryCap);

std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace navdp
