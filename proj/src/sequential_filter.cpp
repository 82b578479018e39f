#include "lmloc/sequential_filter.hpp"

#include <algorithm>
#include <cmath>

#include "lmloc/error.hpp"

namespace lmloc {

ParticleFilter::ParticleFilter(std::vector<double> map_arclengths, FilterConfig config)
    : arclengths_(std::move(map_arclengths)), config_(config) {
  if (arclengths_.empty()) fail(ErrorCategory::data, "particle filter needs at least one map viewpoint");
  if (!std::is_sorted(arclengths_.begin(), arclengths_.end())) {
    fail(ErrorCategory::data, "map viewpoints must be sorted by arclength");
  }
  if (config_.num_particles == 0) fail(ErrorCategory::usage, "particle count must be positive");
  if (config_.motion_noise < 0.0) fail(ErrorCategory::usage, "motion noise must be non-negative");
  reset_at(route_start());
}

void ParticleFilter::reset_uniform(std::mt19937_64& rng) {
  const std::size_t k = config_.num_particles;
  particles_.assign(k, Particle{});
  const double w = 1.0 / static_cast<double>(k);
  if (route_end() > route_start()) {
    std::uniform_real_distribution<double> pos(route_start(), route_end());
    for (auto& p : particles_) p = {pos(rng), w};
  } else {
    for (auto& p : particles_) p = {route_start(), w};
  }
}

void ParticleFilter::reset_at(double position) {
  position = std::clamp(position, route_start(), route_end());
  particles_.assign(config_.num_particles,
                    Particle{position, 1.0 / static_cast<double>(config_.num_particles)});
}

void ParticleFilter::assign(std::vector<Particle> particles) {
  if (particles.empty()) fail(ErrorCategory::data, "particle set must be non-empty");
  for (auto& p : particles) {
    if (!(p.weight >= 0.0)) fail(ErrorCategory::data, "particle weights must be non-negative");
    p.position = std::clamp(p.position, route_start(), route_end());
  }
  particles_ = std::move(particles);
  normalize();
}

void ParticleFilter::predict(double action, std::mt19937_64& rng) {
  predict(action, config_.motion_noise, rng);
}

void ParticleFilter::predict(double action, double sigma, std::mt19937_64& rng) {
  if (sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, sigma);
    for (auto& p : particles_) {
      p.position = std::clamp(p.position + action + noise(rng), route_start(), route_end());
    }
  } else {
    for (auto& p : particles_) p.position = std::clamp(p.position + action, route_start(), route_end());
  }
}

UpdateStatus ParticleFilter::update(std::span<const double> scores, std::mt19937_64& rng) {
  if (scores.size() != arclengths_.size()) {
    fail(ErrorCategory::data, "score vector has " + std::to_string(scores.size()) + " entries for " +
                                  std::to_string(arclengths_.size()) + " map images");
  }
  for (double s : scores) {
    if (!(s >= 0.0) || !std::isfinite(s)) {
      fail(ErrorCategory::data, "observation scores must be finite and non-negative");
    }
  }
  UpdateStatus status;
  double total = 0.0;
  for (auto& p : particles_) {
    p.weight += scores[nearest_image(p.position)];
    total += p.weight;
  }
  if (!(total > 0.0) || !std::isfinite(total)) {
    reset_uniform(rng);
    status.lost = true;
    return status;
  }
  for (auto& p : particles_) p.weight /= total;

  if (effective_sample_size() < config_.resample_ratio * static_cast<double>(particles_.size())) {
    resample_systematic(rng);
    status.resampled = true;
  }
  return status;
}

UpdateStatus ParticleFilter::update(const RankingResult& ranking, std::mt19937_64& rng) {
  return update(dense_scores(ranking, arclengths_.size()), rng);
}

std::vector<double> ParticleFilter::belief() const {
  std::vector<double> mass(arclengths_.size(), 0.0);
  double total = 0.0;
  for (const auto& p : particles_) {
    mass[nearest_image(p.position)] += p.weight;
    total += p.weight;
  }
  if (total > 0.0) {
    for (double& m : mass) m /= total;
  }
  return mass;
}

double ParticleFilter::effective_sample_size() const {
  double sum_sq = 0.0;
  for (const auto& p : particles_) sum_sq += p.weight * p.weight;
  return sum_sq > 0.0 ? 1.0 / sum_sq : 0.0;
}

ImageId ParticleFilter::nearest_image(double position) const {
  const auto it = std::lower_bound(arclengths_.begin(), arclengths_.end(), position);
  if (it == arclengths_.begin()) return 0;
  if (it == arclengths_.end()) return static_cast<ImageId>(arclengths_.size() - 1);
  auto idx = static_cast<std::size_t>(it - arclengths_.begin());
  // Equal distance goes to the lower id.
  if (position - arclengths_[idx - 1] <= arclengths_[idx] - position) {
    idx -= 1;
    // Duplicate arclengths: prefer the first of the run.
    while (idx > 0 && arclengths_[idx - 1] == arclengths_[idx]) --idx;
  }
  return static_cast<ImageId>(idx);
}

void ParticleFilter::normalize() {
  double total = 0.0;
  for (const auto& p : particles_) total += p.weight;
  if (!(total > 0.0)) {
    const double w = 1.0 / static_cast<double>(particles_.size());
    for (auto& p : particles_) p.weight = w;
    return;
  }
  for (auto& p : particles_) p.weight /= total;
}

void ParticleFilter::resample_systematic(std::mt19937_64& rng) {
  const std::size_t k = particles_.size();
  const double step = 1.0 / static_cast<double>(k);
  std::uniform_real_distribution<double> start(0.0, step);
  double target = start(rng);
  double cumulative = particles_.front().weight;
  std::size_t src = 0;
  std::vector<Particle> next;
  next.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    while (target > cumulative && src + 1 < k) {
      ++src;
      cumulative += particles_[src].weight;
    }
    next.push_back({particles_[src].position, step});
    target += step;
  }
  particles_ = std::move(next);
}

std::vector<double> dense_scores(const RankingResult& ranking, std::size_t n_map) {
  std::vector<double> scores(n_map, 0.0);
  for (const auto& e : ranking.entries) {
    if (e.image_id >= n_map) fail(ErrorCategory::data, "ranking references unknown map image");
    scores[e.image_id] = e.score;
  }
  return scores;
}

double entropy(std::span<const double> belief) {
  double h = 0.0;
  for (double p : belief) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

std::size_t belief_rank(std::span<const double> belief, ImageId image) {
  if (image >= belief.size()) fail(ErrorCategory::data, "belief rank for unknown image");
  const double mass = belief[image];
  std::size_t ahead = 0;
  for (std::size_t i = 0; i < belief.size(); ++i) {
    if (belief[i] > mass || (belief[i] == mass && i < image)) ++ahead;
  }
  return ahead + 1;
}

}  // namespace lmloc
