#include "lmloc/nbv_planner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "lmloc/byte_io.hpp"
#include "lmloc/error.hpp"
#include "lmloc/parallel.hpp"
#include "lmloc/text.hpp"

namespace lmloc {

double MDPConfig::epsilon(std::size_t episode) const {
  const double horizon = epsilon_decay_fraction * static_cast<double>(episodes);
  if (horizon <= 0.0) return epsilon_end;
  const double t = std::min(1.0, static_cast<double>(episode) / horizon);
  return std::lerp(epsilon_start, epsilon_end, t);
}

void MDPConfig::validate() const {
  if (num_actions == 0 || num_actions > 255) fail(ErrorCategory::usage, "num_actions must be in 1..255");
  if (!(gamma > 0.0 && gamma < 1.0)) fail(ErrorCategory::usage, "gamma must be in (0, 1)");
  if (!(alpha > 0.0 && alpha <= 1.0)) fail(ErrorCategory::usage, "alpha must be in (0, 1]");
  if (k_nn == 0) fail(ErrorCategory::usage, "k_nn must be at least 1");
  if (episode_length == 0) fail(ErrorCategory::usage, "episode_length must be positive");
  if (!(reward_top_fraction > 0.0 && reward_top_fraction <= 1.0)) {
    fail(ErrorCategory::usage, "reward_top_fraction must be in (0, 1]");
  }
}

// --- ExperienceDB -----------------------------------------------------------

ExperienceDB::ExperienceDB(std::size_t n_map, std::size_t num_actions, double q_init)
    : n_map_(n_map), num_actions_(num_actions), q_(n_map * num_actions, q_init) {}

void ExperienceDB::save(std::ostream& out) const {
  out.write("QEXP1", 5);
  byte_io::write_le<std::uint8_t>(out, 1);
  byte_io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(n_map_));
  byte_io::write_le<std::uint8_t>(out, static_cast<std::uint8_t>(num_actions_));
  for (double q : q_) byte_io::write_le<float>(out, static_cast<float>(q));
}

void ExperienceDB::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCategory::io, "cannot write " + path.string());
  save(out);
}

ExperienceDB ExperienceDB::load(std::istream& in, const std::string& source) {
  byte_io::Reader reader(in, source);
  reader.expect_magic("QEXP1");
  if (reader.read_le<std::uint8_t>("version") != 1) {
    fail(ErrorCategory::format, source + ": unsupported experience file version");
  }
  const auto n_map = reader.read_le<std::uint32_t>("map size");
  const auto n_actions = reader.read_le<std::uint8_t>("action count");
  ExperienceDB db(n_map, n_actions, 0.0);
  for (auto& q : db.q_) {
    const float v = reader.read_le<float>("q value");
    if (!std::isfinite(v)) {
      fail(ErrorCategory::format, source + ": non-finite Q value at byte offset " +
                                      std::to_string(reader.offset() - 4));
    }
    q = v;
  }
  reader.expect_end();
  return db;
}

ExperienceDB ExperienceDB::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCategory::io, "cannot open " + path.string());
  return load(in, path.string());
}

// --- NNQL -------------------------------------------------------------------

std::vector<ImageId> neighbors(const RankingResult& state_ranking, std::size_t k) {
  std::vector<ImageId> out;
  const std::size_t n = std::min(k, state_ranking.entries.size());
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(state_ranking.entries[i].image_id);
  return out;
}

std::vector<ImageId> neighbors(const Localizer& localizer, const QueryState& state, std::size_t k) {
  return neighbors(localizer.localize(state, Method::rrf), k);
}

double q_value(const ExperienceDB& db, std::span<const ImageId> nbrs, std::size_t action_index,
               double fallback) {
  if (nbrs.empty()) return fallback;
  double sum = 0.0;
  for (ImageId m : nbrs) sum += db.at(m, action_index);
  return sum / static_cast<double>(nbrs.size());
}

std::size_t greedy_action(const ExperienceDB& db, std::span<const ImageId> nbrs, double fallback) {
  std::size_t best = 0;
  double best_q = q_value(db, nbrs, 0, fallback);
  for (std::size_t a = 1; a < db.num_actions(); ++a) {
    const double q = q_value(db, nbrs, a, fallback);
    if (q > best_q) {
      best_q = q;
      best = a;
    }
  }
  return best;
}

std::size_t choose_action(const ExperienceDB& db, std::span<const ImageId> nbrs, double epsilon,
                          double fallback, std::mt19937_64& rng) {
  if (epsilon > 0.0) {
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    if (coin(rng) < epsilon) {
      std::uniform_int_distribution<std::size_t> pick(0, db.num_actions() - 1);
      return pick(rng);
    }
  }
  return greedy_action(db, nbrs, fallback);
}

void td_update(ExperienceDB& db, std::span<const ImageId> state_nbrs, std::size_t action_index,
               double reward, std::span<const ImageId> next_nbrs, bool terminal, const MDPConfig& config) {
  double target = reward;
  if (!terminal) {
    double best = q_value(db, next_nbrs, 0, config.q_init);
    for (std::size_t a = 1; a < db.num_actions(); ++a) {
      best = std::max(best, q_value(db, next_nbrs, a, config.q_init));
    }
    target += config.gamma * best;
  }
  for (ImageId m : state_nbrs) {
    double& q = db.at(m, action_index);
    q = (1.0 - config.alpha) * q + config.alpha * target;
  }
}

std::size_t reward_rank_threshold(std::size_t n_map, double top_fraction) {
  const auto k = static_cast<std::size_t>(std::floor(top_fraction * static_cast<double>(n_map) + 1e-9));
  return std::max<std::size_t>(1, k);
}

double compute_reward(std::span<const double> belief, ImageId ground_truth, const MDPConfig& config) {
  const auto rank = belief_rank(belief, ground_truth);
  return rank <= reward_rank_threshold(belief.size(), config.reward_top_fraction) ? config.reward_value
                                                                                  : 0.0;
}

EpisodeStreams::EpisodeStreams(std::uint64_t seed, std::uint64_t episode) {
  auto stream = [&](std::uint32_t tag) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(episode), static_cast<std::uint32_t>(episode >> 32), tag};
    return std::mt19937_64(seq);
  };
  start = stream(1);
  policy = stream(2);
  filter = stream(3);
}

Policy Policy::parse(std::string_view text) {
  if (text == "learned") return {PolicyKind::learned, 0};
  if (text == "random") return {PolicyKind::random, 0};
  if (text.rfind("fixed:", 0) == 0) {
    const auto meters = text::parse_number<std::size_t>(text.substr(6));
    if (meters == 0) fail(ErrorCategory::usage, "fixed action must be at least 1 m");
    return {PolicyKind::fixed, meters - 1};
  }
  fail(ErrorCategory::usage, "unknown policy \"" + std::string(text) + "\"");
}

std::string Policy::name() const {
  switch (kind) {
    case PolicyKind::learned: return "learned";
    case PolicyKind::random: return "random";
    case PolicyKind::fixed: return "fixed:" + std::to_string(fixed_action + 1);
  }
  return "unknown";
}

// --- EpisodeEngine ----------------------------------------------------------

EpisodeEngine::EpisodeEngine(const Localizer& localizer, std::vector<double> map_arclengths,
                             const Environment& env, MDPConfig mdp, FilterConfig filter)
    : localizer_(&localizer),
      map_arclengths_(std::move(map_arclengths)),
      env_(&env),
      mdp_(mdp),
      filter_(filter) {
  mdp_.validate();
  const auto& map = localizer.map();
  if (map_arclengths_.size() != map.size()) {
    fail(ErrorCategory::data, "map has " + std::to_string(map.size()) + " images but " +
                                  std::to_string(map_arclengths_.size()) + " viewpoints");
  }
  if (env.observations().dim() != map.landmarks().dim()) {
    fail(ErrorCategory::data, "environment feature dimension " + std::to_string(env.observations().dim()) +
                                  " does not match the map's landmarks (" +
                                  std::to_string(map.landmarks().dim()) + ")");
  }
  if (env.route_end() < map_arclengths_.front() || env.route_start() > map_arclengths_.back()) {
    fail(ErrorCategory::data, "environment route does not overlap the mapped route");
  }

  views_.reserve(env.size());
  for (const auto& rec : env.observations()) {
    ViewObservation view;
    view.ranking = localizer.localize(rec.feature, Method::rrf);
    view.scores = dense_scores(view.ranking, map_arclengths_.size());
    view.nbrs = neighbors(view.ranking, mdp_.k_nn);
    views_.push_back(std::move(view));
  }
}

ImageId EpisodeEngine::map_image_at(double position) const {
  const auto it = std::lower_bound(map_arclengths_.begin(), map_arclengths_.end(), position);
  if (it == map_arclengths_.begin()) return 0;
  if (it == map_arclengths_.end()) return static_cast<ImageId>(map_arclengths_.size() - 1);
  auto idx = static_cast<std::size_t>(it - map_arclengths_.begin());
  if (position - map_arclengths_[idx - 1] <= map_arclengths_[idx] - position) --idx;
  return static_cast<ImageId>(idx);
}

EpisodeRecord EpisodeEngine::run_episode(const Policy& policy, const ExperienceDB* db, std::uint64_t seed,
                                         std::size_t episode, ExperienceDB* learn) const {
  EpisodeStreams streams(seed, episode);
  std::uniform_int_distribution<std::size_t> start_pick(0, env_->size() - 1);
  const std::size_t start_view = start_pick(streams.start);

  EpisodeState state{env_->arclengths()[start_view], 0, ParticleFilter(map_arclengths_, filter_), 0.0};
  state.particles.reset_uniform(streams.filter);
  state.particles.update(views_[start_view].scores, streams.filter);

  EpisodeRecord record;
  record.episode = episode;
  record.start_position = state.true_position;
  record.frames.reserve(mdp_.episode_length);

  const double epsilon = learn != nullptr ? mdp_.epsilon(episode) : 0.0;
  const ExperienceDB* q_table = learn != nullptr ? learn : db;
  std::uniform_int_distribution<std::size_t> random_pick(0, mdp_.num_actions - 1);

  const std::vector<ImageId>* state_nbrs = &views_[start_view].nbrs;
  for (std::size_t t = 0; t < mdp_.episode_length; ++t) {
    std::size_t action = 0;
    if (learn != nullptr || policy.kind == PolicyKind::learned) {
      if (q_table == nullptr) fail(ErrorCategory::usage, "learned policy needs an experience database");
      action = choose_action(*q_table, *state_nbrs, epsilon, mdp_.q_init, streams.policy);
    } else if (policy.kind == PolicyKind::random) {
      action = random_pick(streams.policy);
    } else {
      action = policy.fixed_action;
    }

    const double meters = mdp_.action_meters(action);
    const std::size_t view = env_->step(state, meters);
    state.particles.predict(meters, streams.filter);
    state.particles.update(views_[view].scores, streams.filter);

    const auto belief = state.particles.belief();
    const ImageId truth = map_image_at(state.true_position);
    const double reward = compute_reward(belief, truth, mdp_);
    state.cumulative_reward += reward;

    const bool terminal = t + 1 == mdp_.episode_length;
    if (learn != nullptr) {
      td_update(*learn, *state_nbrs, action, reward, views_[view].nbrs, terminal, mdp_);
    }

    FrameRecord frame;
    frame.step = t + 1;
    frame.action_index = action;
    frame.position = state.true_position;
    frame.ground_truth = truth;
    frame.reward = reward;
    frame.belief_anr = 100.0 * static_cast<double>(belief_rank(belief, truth)) /
                       static_cast<double>(belief.size());
    record.frames.push_back(frame);
    state_nbrs = &views_[view].nbrs;
  }
  record.total_reward = state.cumulative_reward;
  return record;
}

ExperienceDB EpisodeEngine::train(std::uint64_t seed) const {
  ExperienceDB db(n_map(), mdp_.num_actions, mdp_.q_init);
  const Policy learned{PolicyKind::learned, 0};
  for (std::size_t e = 0; e < mdp_.episodes; ++e) run_episode(learned, nullptr, seed, e, &db);
  return db;
}

std::vector<EpisodeRecord> EpisodeEngine::evaluate(const Policy& policy, const ExperienceDB* db,
                                                   std::size_t episodes, std::uint64_t seed,
                                                   std::size_t workers) const {
  if (policy.kind == PolicyKind::learned && db == nullptr) {
    fail(ErrorCategory::usage, "learned policy needs an experience database");
  }
  if (policy.kind == PolicyKind::fixed && policy.fixed_action >= mdp_.num_actions) {
    fail(ErrorCategory::usage, "fixed action outside the action set");
  }
  if (db != nullptr && (db->n_map() != n_map() || db->num_actions() != mdp_.num_actions)) {
    fail(ErrorCategory::data, "experience database shape does not match the map");
  }
  std::vector<EpisodeRecord> out(episodes);
  parallel_for(episodes, workers, [&](std::size_t e) { out[e] = run_episode(policy, db, seed, e); });
  return out;
}

double mean_total_reward(std::span<const EpisodeRecord> episodes) {
  if (episodes.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& e : episodes) sum += e.total_reward;
  return sum / static_cast<double>(episodes.size());
}

}  // namespace lmloc
