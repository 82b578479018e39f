#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "lmloc/feature_store.hpp"
#include "lmloc/sequential_filter.hpp"

namespace lmloc {

/// Appearance change applied to the shared route latents for one domain:
/// observation = rotate(gain * latent, rotation) + N(0, noise_sigma^2).
struct DomainTransform {
  double gain = 1.0;
  double noise_sigma = 0.0;
  double rotation = 0.0;  // radians, applied to consecutive coordinate pairs
};

struct WorldParams {
  std::uint64_t seed = 7;
  std::size_t n_viewpoints = 200;
  double spacing = 1.0;  // meters between viewpoints
  std::size_t dim = 64;
  double route_correlation = 0.55;  // AR(1) coefficient between neighbouring viewpoints

  bool salience_mask = true;
  double poor_fraction = 0.3;
  std::size_t poor_segment_length = 8;
  double poor_variance_scale = 0.05;

  DomainTransform landmark{1.0, 1.0, 0.0};
  DomainTransform train{0.6, 0.1, 0.0};
  DomainTransform test{0.85, 0.9, 0.5};

  /// Sets one parameter from its config-file key, e.g. "test.noise_sigma".
  void set(std::string_view key, std::string_view value);
  /// Lines of "key=value"; '#' starts a comment.
  void apply_config(const std::filesystem::path& path);
  std::string describe() const;
};

/// A route observed under three appearance conditions that share geometry.
struct RouteWorld {
  WorldParams params;
  std::vector<std::vector<float>> latent;  // per viewpoint
  std::vector<bool> feature_poor;          // per viewpoint
  FeatureCollection landmark;
  FeatureCollection train;
  FeatureCollection test;
};

RouteWorld generate(const WorldParams& params);

/// Identity transforms, zero noise, no salience mask.
WorldParams noiseless_params(std::uint64_t seed, std::size_t n_viewpoints, std::size_t dim);

/// Writes landmark/train/test .fvec + .csv into `dir`.
void save_world(const RouteWorld& world, const std::filesystem::path& dir);

struct DomainFiles {
  std::filesystem::path features;
  std::filesystem::path viewpoints;
};
DomainFiles domain_files(const std::filesystem::path& dir, DomainTag tag);

struct EpisodeState {
  double true_position = 0.0;
  std::size_t step = 0;
  ParticleFilter particles;
  double cumulative_reward = 0.0;
};

/// Steps an agent along the route; observations come from a fixed collection
/// (normally the test domain) at the viewpoint nearest the true position.
class Environment {
 public:
  explicit Environment(FeatureCollection observations);

  const FeatureCollection& observations() const noexcept { return observations_; }
  std::size_t size() const noexcept { return observations_.size(); }
  double route_start() const noexcept { return arclengths_.front(); }
  double route_end() const noexcept { return arclengths_.back(); }
  std::span<const double> arclengths() const noexcept { return arclengths_; }

  std::size_t nearest_viewpoint(double position) const;
  const FeatureVector& observe(double position) const;

  /// Advances the true position by `action` (clamped to the route end) and
  /// returns the index of the observed viewpoint.
  std::size_t step(EpisodeState& state, double action) const;

 private:
  FeatureCollection observations_;
  std::vector<double> arclengths_;
};

}  // namespace lmloc
