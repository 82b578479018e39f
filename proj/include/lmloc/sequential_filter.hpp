#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "lmloc/feature_store.hpp"
#include "lmloc/passive_localizer.hpp"

namespace lmloc {

struct Particle {
  double position = 0.0;  // hypothesized viewpoint, meters along the route
  double weight = 0.0;
};

struct FilterConfig {
  std::size_t num_particles = 1000;
  double motion_noise = 0.5;     // meters, std-dev of the per-step Gaussian
  double resample_ratio = 0.5;   // resample when ESS < ratio * K
};

struct UpdateStatus {
  bool resampled = false;
  bool lost = false;  // total weight vanished; particles were reset uniformly
};

/// Particle filter over 1-D route position. Observations arrive as relevance
/// scores per map image; each particle reads the score of its nearest map
/// viewpoint and adds it to its weight.
class ParticleFilter {
 public:
  /// `map_arclengths[i]` is the viewpoint of map image i (non-decreasing).
  ParticleFilter(std::vector<double> map_arclengths, FilterConfig config = {});

  const FilterConfig& config() const noexcept { return config_; }
  std::span<const Particle> particles() const noexcept { return particles_; }
  std::size_t map_size() const noexcept { return arclengths_.size(); }
  double route_start() const noexcept { return arclengths_.front(); }
  double route_end() const noexcept { return arclengths_.back(); }

  void reset_uniform(std::mt19937_64& rng);
  void reset_at(double position);
  /// Replaces the particle set; weights are renormalized.
  void assign(std::vector<Particle> particles);

  /// u <- clamp(u + action + N(0, sigma)); weights unchanged.
  void predict(double action, std::mt19937_64& rng);
  void predict(double action, double sigma, std::mt19937_64& rng);

  /// w_k <- w_k + score[nearest(u_k)], then normalize and resample if needed.
  /// `scores` is dense over map image ids.
  UpdateStatus update(std::span<const double> scores, std::mt19937_64& rng);
  UpdateStatus update(const RankingResult& ranking, std::mt19937_64& rng);

  /// Probability mass per map image (nearest viewpoint of each particle).
  std::vector<double> belief() const;
  double effective_sample_size() const;
  ImageId nearest_image(double position) const;

 private:
  void normalize();
  void resample_systematic(std::mt19937_64& rng);

  std::vector<double> arclengths_;
  FilterConfig config_;
  std::vector<Particle> particles_;
};

/// Dense score vector (0 for images absent from the ranking).
std::vector<double> dense_scores(const RankingResult& ranking, std::size_t n_map);

/// Shannon entropy in nats.
double entropy(std::span<const double> belief);

/// 1-based rank of `image` when map images are sorted by descending mass,
/// ties by ascending image id.
std::size_t belief_rank(std::span<const double> belief, ImageId image);

}  // namespace lmloc
