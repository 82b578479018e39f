#include <gtest/gtest.h>

#include <fstream>

#include "lmloc/benchmark.hpp"
#include "lmloc/error.hpp"
#include "lmloc/route_sim.hpp"
#include "support.hpp"
#include "worlds.hpp"

using namespace lmloc;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

double rrf_anr(const RouteWorld& w, std::size_t r, std::size_t h, double tau) {
  AnrBenchmarkConfig cfg;
  cfg.r_values = {r};
  cfg.h_values = {h};
  cfg.tau = tau;
  cfg.methods = {Method::rrf};
  return run_anr_benchmark({w.landmark, w.train, w.test}, cfg).at(0).anr_percent;
}

}  // namespace

TEST(World, NoiselessDomainsCoincide) {
  const auto w = generate(noiseless_params(5, 50, 12));
  for (std::size_t i = 0; i < 50; ++i) {
    EXPECT_EQ(w.landmark[i].feature, w.train[i].feature);
    EXPECT_EQ(w.train[i].feature, w.test[i].feature);
  }
}

TEST(World, SameSeedSameBytes) {
  lmtest::TempDir a("world_a"), b("world_b");
  WorldParams p;
  p.n_viewpoints = 80;
  save_world(generate(p), a.path);
  save_world(generate(p), b.path);
  for (auto tag : {DomainTag::landmark, DomainTag::train, DomainTag::test}) {
    EXPECT_EQ(slurp(domain_files(a.path, tag).features), slurp(domain_files(b.path, tag).features));
    EXPECT_EQ(slurp(domain_files(a.path, tag).viewpoints), slurp(domain_files(b.path, tag).viewpoints));
  }
  p.seed += 1;
  save_world(generate(p), b.path);
  EXPECT_NE(slurp(domain_files(a.path, DomainTag::test).features),
            slurp(domain_files(b.path, DomainTag::test).features));
}

TEST(World, ShapeAndFiniteness) {
  WorldParams p;
  p.n_viewpoints = 90;
  p.dim = 33;
  p.spacing = 2.5;
  const auto w = generate(p);
  for (const auto* c : {&w.landmark, &w.train, &w.test}) {
    ASSERT_EQ(c->size(), 90u);
    EXPECT_EQ(c->dim(), 33u);
    EXPECT_EQ((*c)[89].arclength, 89 * 2.5);
    for (const auto& rec : *c)
      for (float x : rec.feature.values()) EXPECT_TRUE(std::isfinite(x));
  }
}

TEST(World, FeaturePoorSegments) {
  WorldParams p;
  p.n_viewpoints = 400;
  const auto w = generate(p);
  const auto poor = std::count(w.feature_poor.begin(), w.feature_poor.end(), true);
  EXPECT_EQ(poor, 120);
  // Poor stretches carry a fraction of the latent energy.
  double e_poor = 0, e_rich = 0;
  for (std::size_t i = 0; i < 400; ++i) {
    double e = 0;
    for (float x : w.latent[i]) e += x * x;
    (w.feature_poor[i] ? e_poor : e_rich) += e;
  }
  EXPECT_NEAR((e_poor / 120) / (e_rich / 280), 0.05, 0.02);
  p.salience_mask = false;
  const auto flat = generate(p);
  EXPECT_EQ(std::count(flat.feature_poor.begin(), flat.feature_poor.end(), true), 0);
}

TEST(World, NoiseDegradesRetrieval) {
  WorldParams p;
  p.n_viewpoints = 150;
  p.dim = 32;
  double prev = 0.0;
  for (double sigma : {0.2, 1.5, 4.0}) {
    p.test.noise_sigma = sigma;
    const double a = rrf_anr(generate(p), 30, 4, 0.5);
    EXPECT_GT(a, prev) << "sigma " << sigma;
    prev = a;
  }
}

TEST(WorldParams, SetAndConfig) {
  WorldParams p;
  p.set("test.noise_sigma", "2.5");
  p.set("seed", "99");
  p.set("salience_mask", "0");
  EXPECT_EQ(p.test.noise_sigma, 2.5);
  EXPECT_EQ(p.seed, 99u);
  EXPECT_FALSE(p.salience_mask);
  EXPECT_THROW(p.set("test.colour", "1"), Error);
  EXPECT_THROW(p.set("weather", "1"), Error);
  EXPECT_THROW(p.set("dim", "many"), Error);

  lmtest::TempDir dir("cfg");
  {
    std::ofstream out(dir / "w.cfg");
    out << "# comment\n\ntrain.gain = 0.3  # inline\nn_viewpoints=40\n";
  }
  WorldParams q;
  q.apply_config(dir / "w.cfg");
  EXPECT_EQ(q.train.gain, 0.3);
  EXPECT_EQ(q.n_viewpoints, 40u);
  {
    std::ofstream out(dir / "bad.cfg");
    out << "n_viewpoints 40\n";
  }
  EXPECT_THROW(q.apply_config(dir / "bad.cfg"), Error);
  EXPECT_THROW(q.apply_config(dir / "missing.cfg"), Error);
}

TEST(WorldParams, DescribeListsEveryKey) {
  WorldParams p;
  p.test.rotation = 0.25;
  const auto text = p.describe();
  EXPECT_NE(text.find("test.rotation=0.25"), std::string::npos) << text;
  EXPECT_NE(text.find("seed=7"), std::string::npos) << text;
  WorldParams back;
  back.seed = 1;
  std::istringstream in(text);
  for (std::string kv; in >> kv;) {
    const auto eq = kv.find('=');
    back.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  EXPECT_EQ(back.describe(), text);
}

TEST(World, InvalidParams) {
  WorldParams p;
  p.n_viewpoints = 1;
  EXPECT_THROW(generate(p), Error);
  p = {};
  p.route_correlation = 1.0;
  EXPECT_THROW(generate(p), Error);
  p = {};
  p.n_viewpoints = 10;
  p.poor_fraction = 0.95;
  EXPECT_THROW(generate(p), Error);
}

TEST(Environment, StepAndClamp) {
  const Environment env(generate(noiseless_params(1, 30, 4)).test);
  const std::vector<double> arcs(env.arclengths().begin(), env.arclengths().end());
  EpisodeState s{0.0, 0, ParticleFilter(arcs), 0.0};
  for (int i = 0; i < 10; ++i) env.step(s, 1.0);
  EXPECT_EQ(s.true_position, 10.0);
  EXPECT_EQ(s.step, 10u);
  EXPECT_EQ(env.nearest_viewpoint(s.true_position), 10u);
  EXPECT_EQ(env.step(s, 25.0), 29u);
  EXPECT_EQ(s.true_position, 29.0);
  EXPECT_EQ(env.nearest_viewpoint(3.5), 3u);
  EXPECT_EQ(env.nearest_viewpoint(3.51), 4u);
  EXPECT_EQ(&env.observe(7.2), &env.observations()[7].feature);
}

TEST(Control, PlanningIsPointlessWhenEveryViewIsPerfect) {
  // Identical domains and no feature-poor stretches: every move localizes, so
  // a learned policy cannot beat a random one.
  MDPConfig m;
  m.episodes = 400;
  auto s = lmtest::build_stack(noiseless_params(2, 80, 32), 40, 4, m);
  const auto db = s.engine->train(1);
  const auto learned = mean_total_reward(s.engine->evaluate(Policy::parse("learned"), &db, 200, 77));
  const auto random = mean_total_reward(s.engine->evaluate(Policy::parse("random"), nullptr, 200, 77));
  EXPECT_GT(random, 900.0);
  EXPECT_NEAR(learned / random, 1.0, 0.05);
}

TEST(Control, FeaturePoorStretchesMakeMovesMatter) {
  // Every two-step move sequence from every start, averaged over filter seeds:
  // with feature-poor stretches some sequences earn clearly more than others.
  WorldParams p;
  p.seed = 4;
  p.n_viewpoints = 20;
  p.dim = 32;
  p.poor_segment_length = 4;
  const auto s = lmtest::build_stack(p, 12, 3);
  const auto arcs = s.world.train.arclengths();
  std::vector<std::vector<double>> scores;
  for (const auto& rec : s.world.test) scores.push_back(dense_scores(s.localizer->localize(rec.feature, Method::rrf), 20));
  const MDPConfig mdp;
  std::vector<double> expected;
  for (int a1 = 1; a1 <= 10; ++a1) {
    for (int a2 = 1; a2 <= 10; ++a2) {
      double total = 0.0;
      for (std::size_t start = 0; start < 20; ++start) {
        for (std::uint64_t seed = 0; seed < 4; ++seed) {
          auto rng = lmtest::rng_for(seed, start);
          ParticleFilter pf(arcs);
          pf.reset_uniform(rng);
          pf.update(scores[start], rng);
          double pos = arcs[start];
          for (int a : {a1, a2}) {
            pos = std::min(pos + a, arcs.back());
            pf.predict(a, rng);
            pf.update(scores[s.env->nearest_viewpoint(pos)], rng);
            total += compute_reward(pf.belief(), pf.nearest_image(pos), mdp);
          }
        }
      }
      expected.push_back(total / 80.0);
    }
  }
  const auto [lo, hi] = std::minmax_element(expected.begin(), expected.end());
  EXPECT_GT(*hi - *lo, 20.0) << "best " << *hi << " worst " << *lo;
}
