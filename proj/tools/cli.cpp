#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <ostream>
#include <random>
#include <sstream>

#include "lmloc/benchmark.hpp"
#include "lmloc/error.hpp"
#include "lmloc/landmark_select.hpp"
#include "lmloc/nbv_planner.hpp"
#include "lmloc/passive_localizer.hpp"
#include "lmloc/route_sim.hpp"
#include "lmloc/sequential_filter.hpp"
#include "lmloc/text.hpp"

namespace lmloc {
namespace {

namespace fs = std::filesystem;

// Every world parameter is also a simulate flag of the same name.
const char* const kWorldKeys[] = {
    "n_viewpoints",        "spacing",      "dim",          "route_correlation", "salience_mask",
    "poor_fraction",       "poor_segment_length",          "poor_variance_scale",
    "landmark.gain",       "landmark.noise_sigma",         "landmark.rotation",
    "train.gain",          "train.noise_sigma",            "train.rotation",
    "test.gain",           "test.noise_sigma",             "test.rotation",
};

struct MapArgs {
  fs::path index;
  fs::path landmarks;
  fs::path viewpoints;
  fs::path features;
};

void add_map_options(CLI::App* sub, MapArgs& m, bool need_viewpoints) {
  sub->add_option("--map", m.index, "Index file written by build-index")->required();
  sub->add_option("--landmarks", m.landmarks, "Landmark file used to build the index")->required();
  auto* vp = sub->add_option("--map-viewpoints", m.viewpoints, "Viewpoint sidecar of the map images");
  if (need_viewpoints) vp->required();
}

LandmarkSet read_landmarks(const fs::path& path) { return load_landmarks(path, landmark_sidecar_path(path)); }

MapModel load_map(const MapArgs& m, const FeatureCollection* map_features = nullptr) {
  auto index = InvertedIndex::load(m.index);
  std::optional<DissimilarityTable> table;
  if (const auto dis = dissimilarity_table_path(m.index); fs::exists(dis)) table = DissimilarityTable::load(dis);
  std::vector<FeatureVector> features;
  if (map_features != nullptr) {
    if (map_features->size() != index.size()) {
      fail(ErrorCategory::data, "map features have " + std::to_string(map_features->size()) +
                                    " images but the index has " + std::to_string(index.size()));
    }
    for (const auto& rec : *map_features) features.push_back(rec.feature);
  }
  return MapModel(read_landmarks(m.landmarks), std::move(index), std::move(table), std::move(features));
}

// Arclength of every map image, indexed by image id.
std::vector<double> map_arclengths(const fs::path& viewpoints, std::size_t n_map) {
  const auto rows = read_viewpoints(viewpoints);
  if (rows.size() != n_map) {
    fail(ErrorCategory::data, viewpoints.string() + " lists " + std::to_string(rows.size()) +
                                  " viewpoints but the index has " + std::to_string(n_map) + " images");
  }
  std::vector<double> s(n_map, 0.0);
  std::vector<bool> seen(n_map, false);
  for (const auto& row : rows) {
    if (row.image_id >= n_map || seen[row.image_id]) {
      fail(ErrorCategory::data, viewpoints.string() + ": image ids must be 0.." + std::to_string(n_map - 1));
    }
    seen[row.image_id] = true;
    s[row.image_id] = row.arclength;
  }
  return s;
}

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCategory::io, "cannot write " + path.string());
  return out;
}

// "# lmloc <subcommand> key=value ..." recording every option except the
// worker count, which never changes results.
std::string header_line(const CLI::App& sub) {
  std::string line = "# lmloc " + sub.get_name();
  for (const CLI::Option* opt : sub.get_options()) {
    std::string name = opt->get_name(false, true);
    if (name == "--help" || name == "--workers") continue;
    name.erase(0, name.find_first_not_of('-'));
    std::string value;
    if (opt->count() > 0) {
      for (const auto& r : opt->results()) value += (value.empty() ? "" : ";") + r;
    } else {
      value = opt->get_default_str();
    }
    line += " " + name + "=" + value;
  }
  return line;
}

std::vector<double> read_actions(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCategory::io, "cannot open " + path.string());
  std::vector<double> actions;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view v = line;
    if (const auto hash = v.find('#'); hash != std::string_view::npos) v = v.substr(0, hash);
    v = text::trim(v);
    if (v.empty()) continue;
    try {
      actions.push_back(text::parse_number<double>(v));
    } catch (const Error& e) {
      fail(ErrorCategory::format, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return actions;
}

std::mt19937_64 seeded(std::uint64_t seed, std::uint32_t tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), tag};
  return std::mt19937_64(seq);
}

std::vector<Method> parse_methods(const std::vector<std::string>& names) {
  std::vector<Method> methods;
  for (const auto& n : names) {
    if (n == "all") {
      methods.assign(std::begin(kAllMethods), std::end(kAllMethods));
      return methods;
    }
    methods.push_back(parse_method(n));
  }
  return methods;
}

struct Args {
  // shared
  fs::path features, viewpoints, out;
  bool normalize = false;
  std::size_t workers = 1;
  std::uint64_t seed = 0;
  MapArgs map;

  // select-landmarks / build-index
  std::size_t r = 50;
  std::size_t stride = 1;
  std::size_t h = 4;

  // query
  std::string method = "rrf";
  std::size_t top = 0;
  fs::path map_features;

  // eval-anr
  fs::path world;
  fs::path landmark_features, landmark_viewpoints, query_features, query_viewpoints;
  std::vector<std::size_t> r_list{50};
  std::vector<std::size_t> h_list{4};
  std::vector<std::string> methods{"all"};
  double tau = 10.0;

  // localize-seq
  fs::path actions;
  double start = 0.0;
  std::size_t particles = 1000;
  double motion_noise = 0.5;
  bool init_at_start = false;

  // nbv
  fs::path env, env_viewpoints, q_table;
  std::size_t episodes = 0;
  std::size_t k_nn = 4;
  std::string policy = "learned";

  // simulate
  fs::path out_dir, config;
  std::vector<std::string> world_values = std::vector<std::string>(std::size(kWorldKeys));
};

void cmd_select_landmarks(const Args& a) {
  const auto cands = load_features(a.features, a.viewpoints, {a.normalize});
  const auto pool = subsample(cands.records(), a.stride);
  const auto landmarks = select_landmarks(pool, a.r, a.workers);
  if (a.out.has_parent_path()) fs::create_directories(a.out.parent_path());
  save_landmarks(landmarks, a.out, landmark_sidecar_path(a.out));
}

void cmd_build_index(const Args& a) {
  const auto images = load_features(a.features, a.viewpoints, {a.normalize});
  const auto map = MapModel::build(images, read_landmarks(a.map.landmarks), a.h, {false, true});
  if (a.out.has_parent_path()) fs::create_directories(a.out.parent_path());
  map.index().save(a.out);
  map.simbad()->save(dissimilarity_table_path(a.out));
}

void cmd_query(const Args& a, const std::string& header) {
  const auto method = parse_method(a.method);
  std::optional<FeatureCollection> map_images;
  if (method == Method::brute_force) {
    if (a.map_features.empty() || a.map.viewpoints.empty()) {
      fail(ErrorCategory::usage, "brute_force needs --map-features and --map-viewpoints");
    }
    map_images = load_features(a.map_features, a.map.viewpoints, {a.normalize});
  }
  const auto map = load_map(a.map, map_images ? &*map_images : nullptr);
  const Localizer localizer(map);
  const auto queries = load_features(a.features, a.viewpoints, {a.normalize});

  auto out = open_output(a.out);
  out << header << "\nquery_id,rank,image_id,score\n";
  for (const auto& q : queries) {
    const auto result = localizer.localize(q.feature, method);
    const std::size_t n = a.top == 0 ? result.size() : std::min(a.top, result.size());
    for (std::size_t i = 0; i < n; ++i) {
      out << q.image_id << ',' << i + 1 << ',' << result.entries[i].image_id << ','
          << text::format_double(result.entries[i].score) << '\n';
    }
  }
}

void cmd_eval_anr(Args a, const std::string& header) {
  if (!a.world.empty()) {
    auto fill = [&](fs::path& f, fs::path& v, DomainTag tag) {
      const auto files = domain_files(a.world, tag);
      if (f.empty()) f = files.features;
      if (v.empty()) v = files.viewpoints;
    };
    fill(a.landmark_features, a.landmark_viewpoints, DomainTag::landmark);
    fill(a.map_features, a.map.viewpoints, DomainTag::train);
    fill(a.query_features, a.query_viewpoints, DomainTag::test);
  }
  for (const auto* p : {&a.landmark_features, &a.landmark_viewpoints, &a.map_features, &a.map.viewpoints,
                        &a.query_features, &a.query_viewpoints}) {
    if (p->empty()) fail(ErrorCategory::usage, "eval-anr needs --world or all six domain file options");
  }
  const LoadOptions load{a.normalize};
  DomainTriplet data{load_features(a.landmark_features, a.landmark_viewpoints, load),
                     load_features(a.map_features, a.map.viewpoints, load),
                     load_features(a.query_features, a.query_viewpoints, load)};
  AnrBenchmarkConfig cfg;
  cfg.r_values = a.r_list;
  cfg.h_values = a.h_list;
  cfg.tau = a.tau;
  cfg.methods = parse_methods(a.methods);
  cfg.landmark_stride = a.stride;
  cfg.workers = a.workers;
  const auto rows = run_anr_benchmark(data, cfg);

  auto out = open_output(a.out);
  out << header << "\nmethod,r,h,anr_percent\n";
  for (const auto& row : rows) {
    out << to_string(row.method) << ',' << row.r << ',' << row.h << ',' << text::format_double(row.anr_percent)
        << '\n';
  }
}

void cmd_localize_seq(const Args& a, const std::string& header) {
  const auto map = load_map(a.map);
  const Localizer localizer(map);
  const auto arclengths = map_arclengths(a.map.viewpoints, map.size());
  const Environment env(load_features(a.features, a.viewpoints, {a.normalize}));
  const auto actions = read_actions(a.actions);

  FilterConfig fc;
  fc.num_particles = a.particles;
  fc.motion_noise = a.motion_noise;
  ParticleFilter pf(arclengths, fc);
  auto rng = seeded(a.seed, 0);
  EpisodeState state{std::clamp(a.start, env.route_start(), env.route_end()), 0, pf, 0.0};

  auto out = open_output(a.out);
  out << header << "\nstep,action_m,position_m,entropy,gt_belief_rank\n";
  auto observe = [&](std::size_t view, double action) {
    state.particles.update(localizer.localize(env.observations()[view].feature, Method::rrf), rng);
    const auto belief = state.particles.belief();
    const ImageId truth = state.particles.nearest_image(state.true_position);
    out << state.step << ',' << text::format_double(action) << ',' << text::format_double(state.true_position)
        << ',' << text::format_double(entropy(belief)) << ',' << belief_rank(belief, truth) << '\n';
  };
  if (a.init_at_start) state.particles.reset_at(state.true_position);
  else state.particles.reset_uniform(rng);
  observe(env.nearest_viewpoint(state.true_position), 0.0);
  for (const double action : actions) {
    const std::size_t view = env.step(state, action);
    state.particles.predict(action, rng);
    observe(view, action);
  }
}

struct NbvSetup {
  MapModel map;
  std::unique_ptr<Localizer> localizer;
  std::unique_ptr<Environment> env;
  std::unique_ptr<EpisodeEngine> engine;
};

std::unique_ptr<NbvSetup> make_nbv(const Args& a) {
  auto s = std::make_unique<NbvSetup>();
  s->map = load_map(a.map);
  s->localizer = std::make_unique<Localizer>(s->map);
  s->env = std::make_unique<Environment>(load_features(a.env, a.env_viewpoints, {a.normalize}));
  MDPConfig mdp;
  if (a.episodes > 0) mdp.episodes = a.episodes;
  mdp.k_nn = a.k_nn;
  mdp.validate();
  s->engine = std::make_unique<EpisodeEngine>(*s->localizer, map_arclengths(a.map.viewpoints, s->map.size()),
                                              *s->env, mdp, FilterConfig{});
  return s;
}

void cmd_train_nbv(const Args& a) {
  const auto s = make_nbv(a);
  const auto db = s->engine->train(a.seed);
  if (a.out.has_parent_path()) fs::create_directories(a.out.parent_path());
  db.save(a.out);
}

void cmd_eval_nbv(const Args& a, const std::string& header) {
  const auto policy = Policy::parse(a.policy);
  const auto s = make_nbv(a);
  std::optional<ExperienceDB> db;
  if (policy.kind == PolicyKind::learned) {
    if (a.q_table.empty()) fail(ErrorCategory::usage, "the learned policy needs --q");
    db = ExperienceDB::load(a.q_table);
  }
  const std::size_t episodes = a.episodes > 0 ? a.episodes : 500;
  const auto records = s->engine->evaluate(policy, db ? &*db : nullptr, episodes, a.seed, a.workers);

  auto out = open_output(a.out);
  out << header << "\nepisode,step,action_m,position_m,ground_truth,reward,belief_anr_percent,episode_reward\n";
  for (const auto& ep : records) {
    for (const auto& f : ep.frames) {
      out << ep.episode << ',' << f.step << ',' << text::format_double(s->engine->mdp().action_meters(f.action_index))
          << ',' << text::format_double(f.position) << ',' << f.ground_truth << ','
          << text::format_double(f.reward) << ',' << text::format_double(f.belief_anr) << ','
          << text::format_double(ep.total_reward) << '\n';
    }
  }
}

void cmd_simulate(const Args& a, const std::string& header) {
  WorldParams p;
  if (!a.config.empty()) p.apply_config(a.config);
  for (std::size_t i = 0; i < std::size(kWorldKeys); ++i) {
    if (!a.world_values[i].empty()) p.set(kWorldKeys[i], a.world_values[i]);
  }
  p.seed = a.seed;
  const auto world = generate(p);
  save_world(world, a.out_dir);

  // Reloadable record of the exact parameters.
  auto out = open_output(a.out_dir / "world.cfg");
  out << header << '\n';
  std::istringstream fields(p.describe());
  for (std::string kv; fields >> kv;) out << kv << '\n';
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Landmark-ranking place recognition, sequential localization and view planning", "lmloc"};
  app.set_help_flag("--help", "Print this help and exit");
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  Args a;

  auto* sel = app.add_subcommand("select-landmarks", "Pick r landmark scenes from a candidate collection");
  sel->add_option("--features", a.features, "Candidate feature file")->required();
  sel->add_option("--viewpoints", a.viewpoints, "Candidate viewpoint sidecar")->required();
  sel->add_option("--r", a.r, "Number of landmarks");
  sel->add_option("--stride", a.stride, "Keep every stride-th candidate before selection");
  sel->add_flag("--normalize", a.normalize, "L2-normalize features on load");
  sel->add_option("--workers", a.workers, "Worker threads");
  sel->add_option("--out", a.out, "Landmark feature file; the id sidecar goes to <out>.csv")->required();

  auto* bld = app.add_subcommand("build-index", "Index map images by their top-h landmark ranks");
  bld->add_option("--features", a.features, "Map feature file")->required();
  bld->add_option("--viewpoints", a.viewpoints, "Map viewpoint sidecar")->required();
  bld->add_option("--landmarks", a.map.landmarks, "Landmark file")->required();
  bld->add_option("--h", a.h, "Descriptor length")->check(CLI::Range(1, 15));
  bld->add_flag("--normalize", a.normalize, "L2-normalize features on load");
  bld->add_option("--out", a.out, "Index file; stored dissimilarities go to <out>.dis")->required();

  auto* qry = app.add_subcommand("query", "Rank the map for every query image");
  add_map_options(qry, a.map, false);
  qry->add_option("--features", a.features, "Query feature file")->required();
  qry->add_option("--viewpoints", a.viewpoints, "Query viewpoint sidecar")->required();
  qry->add_option("--method", a.method, "rrf, bag_of_landmarks, simbad_l2 or brute_force");
  qry->add_option("--map-features", a.map_features, "Map feature file (brute_force only)");
  qry->add_option("--top", a.top, "Rows per query, 0 for the full ranking");
  qry->add_flag("--normalize", a.normalize, "L2-normalize features on load");
  qry->add_option("--out", a.out, "Ranking CSV")->required();

  auto* anr_cmd = app.add_subcommand("eval-anr", "Averaged normalized rank over a landmark/map/query triplet");
  anr_cmd->add_option("--world", a.world, "Directory written by simulate");
  anr_cmd->add_option("--landmark-features", a.landmark_features, "Landmark-domain feature file");
  anr_cmd->add_option("--landmark-viewpoints", a.landmark_viewpoints, "Landmark-domain viewpoint sidecar");
  anr_cmd->add_option("--map-features", a.map_features, "Map feature file");
  anr_cmd->add_option("--map-viewpoints", a.map.viewpoints, "Map viewpoint sidecar");
  anr_cmd->add_option("--query-features", a.query_features, "Query feature file");
  anr_cmd->add_option("--query-viewpoints", a.query_viewpoints, "Query viewpoint sidecar");
  anr_cmd->add_option("--r", a.r_list, "Landmark counts")->delimiter(',');
  anr_cmd->add_option("--h", a.h_list, "Descriptor lengths")->delimiter(',');
  anr_cmd->add_option("--method", a.methods, "Methods, or all")->delimiter(',');
  anr_cmd->add_option("--tau", a.tau, "Ground-truth radius in meters");
  anr_cmd->add_option("--stride", a.stride, "Landmark candidate stride");
  anr_cmd->add_flag("--normalize", a.normalize, "L2-normalize features on load");
  anr_cmd->add_option("--workers", a.workers, "Worker threads");
  anr_cmd->add_option("--out", a.out, "ANR CSV")->required();

  auto* seq = app.add_subcommand("localize-seq", "Particle-filter localization along an action sequence");
  add_map_options(seq, a.map, true);
  seq->add_option("--queries", a.features, "Query-domain feature file")->required();
  seq->add_option("--query-viewpoints", a.viewpoints, "Query-domain viewpoint sidecar")->required();
  seq->add_option("--actions", a.actions, "One forward move in meters per line")->required();
  seq->add_option("--start", a.start, "True start position in meters");
  seq->add_option("--particles", a.particles, "Particle count");
  seq->add_option("--motion-noise", a.motion_noise, "Motion noise sigma in meters");
  seq->add_flag("--init-at-start", a.init_at_start, "Start all particles at --start instead of uniformly");
  seq->add_option("--seed", a.seed, "Random seed")->required();
  seq->add_flag("--normalize", a.normalize, "L2-normalize features on load");
  seq->add_option("--out", a.out, "Belief trace CSV")->required();

  auto add_nbv = [&](CLI::App* sub) {
    add_map_options(sub, a.map, true);
    sub->add_option("--env", a.env, "Environment (query-domain) feature file")->required();
    sub->add_option("--env-viewpoints", a.env_viewpoints, "Environment viewpoint sidecar")->required();
    sub->add_option("--k", a.k_nn, "Neighbours per state");
    sub->add_option("--seed", a.seed, "Random seed")->required();
    sub->add_flag("--normalize", a.normalize, "L2-normalize features on load");
  };
  auto* trn = app.add_subcommand("train-nbv", "Learn the experience database by nearest-neighbour Q-learning");
  add_nbv(trn);
  trn->add_option("--episodes", a.episodes, "Training episodes (default 10000)");
  trn->add_option("--out", a.out, "Experience file")->required();

  auto* evn = app.add_subcommand("eval-nbv", "Evaluate a view-planning policy");
  add_nbv(evn);
  evn->add_option("--policy", a.policy, "learned, random or fixed:A with A in meters");
  evn->add_option("--q", a.q_table, "Experience file (learned policy)");
  evn->add_option("--episodes", a.episodes, "Evaluation episodes (default 500)");
  evn->add_option("--workers", a.workers, "Worker threads");
  evn->add_option("--out", a.out, "Per-frame CSV")->required();

  auto* sim = app.add_subcommand("simulate", "Generate a synthetic landmark/train/test route world");
  sim->add_option("--seed", a.seed, "Random seed")->required();
  sim->add_option("--out-dir", a.out_dir, "Output directory")->required();
  sim->add_option("--config", a.config, "key=value file; flags override it");
  for (std::size_t i = 0; i < std::size(kWorldKeys); ++i) {
    sim->add_option(std::string("--") + kWorldKeys[i], a.world_values[i], "World parameter");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    if (app.get_subcommands().empty()) {
      err << app.help();
    }
    err << "error:usage: " << e.what() << '\n';
    return 1;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string header = header_line(*sub);
  try {
    if (sub == sel) cmd_select_landmarks(a);
    else if (sub == bld) cmd_build_index(a);
    else if (sub == qry) cmd_query(a, header);
    else if (sub == anr_cmd) cmd_eval_anr(a, header);
    else if (sub == seq) cmd_localize_seq(a, header);
    else if (sub == trn) cmd_train_nbv(a);
    else if (sub == evn) cmd_eval_nbv(a, header);
    else if (sub == sim) cmd_simulate(a, header);
  } catch (const Error& e) {
    err << "error:" << to_string(e.category()) << ": " << e.what() << '\n';
    return e.category() == ErrorCategory::usage ? 1 : 2;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error:io: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace lmloc
