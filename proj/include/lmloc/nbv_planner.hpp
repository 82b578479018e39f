#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "lmloc/passive_localizer.hpp"
#include "lmloc/route_sim.hpp"
#include "lmloc/sequential_filter.hpp"

namespace lmloc {

/// Discounted MDP and learning schedule. Actions are forward moves of
/// 1..num_actions meters; action index i moves i+1 meters.
struct MDPConfig {
  std::size_t num_actions = 10;
  double gamma = 0.9;
  double alpha = 0.1;
  double q_init = 0.0001;
  double reward_value = 100.0;
  double reward_top_fraction = 0.1;
  std::size_t episode_length = 10;
  std::size_t episodes = 10000;
  std::size_t k_nn = 4;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  double epsilon_decay_fraction = 0.5;  // of all episodes

  double action_meters(std::size_t action_index) const { return static_cast<double>(action_index + 1); }
  /// Linear decay from epsilon_start to epsilon_end, then constant.
  double epsilon(std::size_t episode) const;
  void validate() const;
};

/// Action-specific Q-values indexed by map image id (the experience database).
class ExperienceDB {
 public:
  ExperienceDB() = default;
  ExperienceDB(std::size_t n_map, std::size_t num_actions, double q_init);

  std::size_t n_map() const noexcept { return n_map_; }
  std::size_t num_actions() const noexcept { return num_actions_; }

  double& at(ImageId image, std::size_t action_index) { return q_[image * num_actions_ + action_index]; }
  double at(ImageId image, std::size_t action_index) const { return q_[image * num_actions_ + action_index]; }
  std::span<const double> values() const noexcept { return q_; }

  // File: "QEXP1", u8 version, u32 n_map, u8 n_actions, n_map*n_actions float32 LE.
  void save(std::ostream& out) const;
  void save(const std::filesystem::path& path) const;
  static ExperienceDB load(std::istream& in, const std::string& source);
  static ExperienceDB load(const std::filesystem::path& path);

 private:
  std::size_t n_map_ = 0;
  std::size_t num_actions_ = 0;
  std::vector<double> q_;
};

/// N(s): the k map images most relevant to the state under RRF scoring.
/// Every (image, action) cell exists, so the neighbourhood is the same for
/// every action.
std::vector<ImageId> neighbors(const RankingResult& state_ranking, std::size_t k);
std::vector<ImageId> neighbors(const Localizer& localizer, const QueryState& state, std::size_t k);

/// Mean of Q(m, a) over the neighbours; `fallback` when there are none.
double q_value(const ExperienceDB& db, std::span<const ImageId> nbrs, std::size_t action_index,
               double fallback);

/// argmax_a q_value, ties to the smallest action.
std::size_t greedy_action(const ExperienceDB& db, std::span<const ImageId> nbrs, double fallback);

/// Epsilon-greedy choice. Draws one uniform when epsilon > 0 and a second one
/// when exploring.
std::size_t choose_action(const ExperienceDB& db, std::span<const ImageId> nbrs, double epsilon,
                          double fallback, std::mt19937_64& rng);

/// Q(m, a) <- (1-alpha) Q(m, a) + alpha * target for every m in N(s), with
/// target = reward + gamma * max_a' q(next, a') (bootstrap omitted when terminal).
void td_update(ExperienceDB& db, std::span<const ImageId> state_nbrs, std::size_t action_index,
               double reward, std::span<const ImageId> next_nbrs, bool terminal, const MDPConfig& config);

/// Largest belief rank that still earns the reward: max(1, floor(fraction * n_map)).
std::size_t reward_rank_threshold(std::size_t n_map, double top_fraction);

/// reward_value when the ground-truth image is within the top fraction of
/// the belief ranking, else 0.
double compute_reward(std::span<const double> belief, ImageId ground_truth, const MDPConfig& config);

/// Independent random streams for one episode.
struct EpisodeStreams {
  EpisodeStreams(std::uint64_t seed, std::uint64_t episode);

  std::mt19937_64 start;   // starting viewpoint
  std::mt19937_64 policy;  // exploration and random actions
  std::mt19937_64 filter;  // particle initialisation, motion noise, resampling
};

enum class PolicyKind { learned, random, fixed };

struct Policy {
  PolicyKind kind = PolicyKind::learned;
  std::size_t fixed_action = 0;  // action index for PolicyKind::fixed

  static Policy parse(std::string_view text);  // "learned", "random", "fixed:A" (A in meters)
  std::string name() const;
};

struct FrameRecord {
  std::size_t step = 0;
  std::size_t action_index = 0;
  double position = 0.0;
  ImageId ground_truth = 0;
  double reward = 0.0;
  double belief_anr = 0.0;  // percent
};

struct EpisodeRecord {
  std::size_t episode = 0;
  double start_position = 0.0;
  double total_reward = 0.0;
  std::vector<FrameRecord> frames;
};

/// Observation cache for one environment viewpoint.
struct ViewObservation {
  RankingResult ranking;      // RRF ranking of the map
  std::vector<double> scores; // dense over map ids
  std::vector<ImageId> nbrs;  // top k_nn
};

/// Runs active localization episodes: observe, update the particle filter,
/// reward, learn, choose the next move.
class EpisodeEngine {
 public:
  EpisodeEngine(const Localizer& localizer, std::vector<double> map_arclengths, const Environment& env,
                MDPConfig mdp, FilterConfig filter);

  const MDPConfig& mdp() const noexcept { return mdp_; }
  const FilterConfig& filter_config() const noexcept { return filter_; }
  std::size_t n_map() const noexcept { return map_arclengths_.size(); }
  const ViewObservation& view(std::size_t viewpoint) const { return views_[viewpoint]; }
  ImageId map_image_at(double position) const;

  /// Trains a fresh experience database; deterministic given the seed.
  ExperienceDB train(std::uint64_t seed) const;

  /// One episode. When `learn` is non-null the episode follows epsilon-greedy
  /// over `learn` and updates it; otherwise `policy` is followed greedily.
  EpisodeRecord run_episode(const Policy& policy, const ExperienceDB* db, std::uint64_t seed,
                            std::size_t episode, ExperienceDB* learn = nullptr) const;

  std::vector<EpisodeRecord> evaluate(const Policy& policy, const ExperienceDB* db, std::size_t episodes,
                                      std::uint64_t seed, std::size_t workers = 1) const;

 private:
  const Localizer* localizer_;
  std::vector<double> map_arclengths_;
  const Environment* env_;
  MDPConfig mdp_;
  FilterConfig filter_;
  std::vector<ViewObservation> views_;
};

double mean_total_reward(std::span<const EpisodeRecord> episodes);

}  // namespace lmloc
