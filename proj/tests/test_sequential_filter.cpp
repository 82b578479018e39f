#include <gtest/gtest.h>

#include <numeric>

#include "lmloc/error.hpp"
#include "lmloc/sequential_filter.hpp"
#include "support.hpp"

using namespace lmloc;

namespace {

std::vector<double> line(std::size_t n, double spacing = 1.0) {
  std::vector<double> a(n);
  for (std::size_t i = 0; i < n; ++i) a[i] = spacing * static_cast<double>(i);
  return a;
}

double total_weight(const ParticleFilter& f) {
  double s = 0.0;
  for (const auto& p : f.particles()) s += p.weight;
  return s;
}

double mean_position(const ParticleFilter& f) {
  double s = 0.0;
  for (const auto& p : f.particles()) s += p.weight * p.position;
  return s;
}

}  // namespace

TEST(Predict, NoiselessShift) {
  ParticleFilter f(line(101), {200, 0.5});
  f.reset_at(10.0);
  auto rng = lmtest::rng_for(1);
  f.predict(3.0, 0.0, rng);
  for (const auto& p : f.particles()) EXPECT_EQ(p.position, 13.0);
  f.predict(0.0, 0.0, rng);
  for (const auto& p : f.particles()) EXPECT_EQ(p.position, 13.0);
}

TEST(Predict, ClampsToRoute) {
  ParticleFilter f(line(11), {50, 0.5});
  f.reset_at(9.0);
  auto rng = lmtest::rng_for(2);
  f.predict(5.0, 0.0, rng);
  for (const auto& p : f.particles()) EXPECT_EQ(p.position, 10.0);
  f.reset_at(-3.0);
  for (const auto& p : f.particles()) EXPECT_EQ(p.position, 0.0);
}

TEST(Predict, NoiseMeanAndSpread) {
  const std::size_t k = 100000;
  ParticleFilter f(line(1001), {k, 0.5});
  f.reset_at(500.0);
  auto rng = lmtest::rng_for(3);
  f.predict(4.0, rng);
  double m = 0, v = 0;
  for (const auto& p : f.particles()) m += p.position;
  m /= k;
  for (const auto& p : f.particles()) v += (p.position - m) * (p.position - m);
  v /= k;
  EXPECT_NEAR(m, 504.0, 3 * 0.5 / std::sqrt(double(k)));
  EXPECT_NEAR(std::sqrt(v), 0.5, 0.02);
  EXPECT_NEAR(total_weight(f), 1.0, 1e-9);
}

TEST(Update, AdditiveThenNormalized) {
  ParticleFilter f(line(2), {2, 0.5});
  f.assign({{0.0, 0.2}, {1.0, 0.8}});
  auto rng = lmtest::rng_for(4);
  const std::vector<double> scores{0.5, 0.7};
  const auto st = f.update(scores, rng);
  EXPECT_FALSE(st.resampled);
  EXPECT_FALSE(st.lost);
  EXPECT_NEAR(f.particles()[0].weight, 0.7 / 2.2, 1e-15);
  EXPECT_NEAR(f.particles()[1].weight, 1.5 / 2.2, 1e-15);
}

TEST(Update, SinglePeakConcentrates) {
  ParticleFilter f(line(50), {1000, 0.5});
  auto rng = lmtest::rng_for(5);
  f.reset_uniform(rng);
  std::vector<double> scores(50, 0.0);
  scores[17] = 5.0;
  for (int t = 0; t < 3; ++t) {
    f.update(scores, rng);
    f.predict(0.0, 0.2, rng);
  }
  const auto b = f.belief();
  EXPECT_GT(b[16] + b[17] + b[18], 0.95);
  EXPECT_EQ(belief_rank(b, 17), 1u);
}

TEST(Update, EqualScoresKeepWeights) {
  ParticleFilter f(line(10), {4, 0.5});
  f.assign({{0, 0.25}, {3, 0.25}, {6, 0.25}, {9, 0.25}});
  auto rng = lmtest::rng_for(6);
  f.update(std::vector<double>(10, 2.0), rng);
  for (const auto& p : f.particles()) EXPECT_DOUBLE_EQ(p.weight, 0.25);
}

TEST(Update, ZeroScoresNeverLoseTrack) {
  // Additive updates start from unit mass, so an all-zero observation leaves
  // the weights as they were rather than emptying the filter.
  ParticleFilter f(line(10), {3, 0.5});
  f.assign({{1, 0.5}, {4, 0.3}, {8, 0.2}});
  auto rng = lmtest::rng_for(7);
  const auto st = f.update(std::vector<double>(10, 0.0), rng);
  EXPECT_FALSE(st.lost);
  EXPECT_DOUBLE_EQ(f.particles()[0].weight, 0.5);
  EXPECT_DOUBLE_EQ(f.particles()[2].weight, 0.2);
}

TEST(Update, ScoreVectorChecked) {
  ParticleFilter f(line(5));
  auto rng = lmtest::rng_for(8);
  EXPECT_THROW(f.update(std::vector<double>(4, 1.0), rng), Error);
  EXPECT_THROW(f.update(std::vector<double>{1, 1, -1, 1, 1}, rng), Error);
  EXPECT_THROW(f.update(std::vector<double>{1, 1, NAN, 1, 1}, rng), Error);
}

TEST(Belief, OneHotAtStart) {
  ParticleFilter f(line(30));
  f.reset_at(12.2);
  const auto b = f.belief();
  EXPECT_EQ(b[12], 1.0);
  EXPECT_EQ(entropy(b), 0.0);
}

TEST(Belief, UniformInitIsSpread) {
  ParticleFilter f(line(20), {20000, 0.5});
  auto rng = lmtest::rng_for(9);
  f.reset_uniform(rng);
  const auto b = f.belief();
  EXPECT_NEAR(std::accumulate(b.begin(), b.end(), 0.0), 1.0, 1e-12);
  // End images own half a cell.
  for (std::size_t i = 1; i + 1 < 20; ++i) EXPECT_NEAR(b[i], 1.0 / 19, 0.01);
  EXPECT_NEAR(b[0], 0.5 / 19, 0.01);
  EXPECT_NEAR(entropy(b), std::log(19.0), 0.05);
}

TEST(Belief, NearestImageTiesGoLow) {
  ParticleFilter f(std::vector<double>{0, 2, 2, 5});
  EXPECT_EQ(f.nearest_image(1.0), 0u);
  EXPECT_EQ(f.nearest_image(2.0), 1u);
  EXPECT_EQ(f.nearest_image(3.4), 1u);
  EXPECT_EQ(f.nearest_image(3.6), 3u);
  EXPECT_EQ(f.nearest_image(99), 3u);
}

TEST(Belief, RankTiesByImageId) {
  const std::vector<double> b{0.1, 0.3, 0.3, 0.2, 0.1};
  EXPECT_EQ(belief_rank(b, 1), 1u);
  EXPECT_EQ(belief_rank(b, 2), 2u);
  EXPECT_EQ(belief_rank(b, 3), 3u);
  EXPECT_EQ(belief_rank(b, 0), 4u);
  EXPECT_EQ(belief_rank(b, 4), 5u);
  EXPECT_THROW(belief_rank(b, 5), Error);
}

TEST(Entropy, KnownValues) {
  EXPECT_DOUBLE_EQ(entropy(std::vector<double>{0.5, 0.5}), std::log(2.0));
  EXPECT_DOUBLE_EQ(entropy(std::vector<double>{0.25, 0.25, 0.25, 0.25, 0.0}), std::log(4.0));
}

TEST(FilterProperty, WeightsStayNormalized) {
  ParticleFilter f(line(80), {300, 0.5});
  auto rng = lmtest::rng_for(10);
  f.reset_uniform(rng);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> s(80);
    for (auto& x : s) x = u(rng) < 0.2 ? u(rng) : 0.0;
    f.update(s, rng);
    EXPECT_NEAR(total_weight(f), 1.0, 1e-9);
    for (const auto& p : f.particles()) {
      EXPECT_GE(p.weight, 0.0);
      EXPECT_GE(p.position, 0.0);
      EXPECT_LE(p.position, 79.0);
    }
    f.predict(u(rng) * 3, rng);
  }
}

TEST(FilterProperty, ResamplingKeepsMeanInExpectation) {
  // Skewed weights force a resample; the weighted mean must survive on average.
  auto rng = lmtest::rng_for(11);
  double drift = 0.0;
  const int trials = 200;
  for (int t = 0; t < trials; ++t) {
    ParticleFilter f(line(100), {400, 0.5});
    std::vector<Particle> ps;
    for (int k = 0; k < 400; ++k) ps.push_back({static_cast<double>(k % 100), k < 40 ? 10.0 : 0.1});
    f.assign(ps);
    const double before = mean_position(f);
    const auto st = f.update(std::vector<double>(100, 0.0), rng);
    ASSERT_TRUE(st.resampled);
    drift += mean_position(f) - before;
    for (const auto& p : f.particles()) EXPECT_DOUBLE_EQ(p.weight, 1.0 / 400);
  }
  EXPECT_NEAR(drift / trials, 0.0, 0.5);
}

TEST(FilterProperty, ConsistentObservationsConverge) {
  ParticleFilter f(line(200), {1000, 0.5});
  auto rng = lmtest::rng_for(12);
  f.reset_uniform(rng);
  double truth = 40.0;
  double first_entropy = entropy(f.belief());
  for (int t = 0; t < 15; ++t) {
    std::vector<double> s(200, 0.0);
    const auto near = static_cast<std::size_t>(truth);
    for (std::size_t i = near - 2; i <= near + 2; ++i) s[i] = 1.0 / (1.0 + std::abs(double(i) - truth));
    f.update(s, rng);
    f.predict(2.0, rng);
    truth += 2.0;
  }
  const auto b = f.belief();
  EXPECT_LE(belief_rank(b, static_cast<ImageId>(truth)), 3u);
  EXPECT_LT(entropy(b), first_entropy - 2.0);
}

TEST(DenseScores, FromRanking) {
  RankingResult r;
  r.entries = {{3, 0.5}, {1, 0.25}};
  EXPECT_EQ(dense_scores(r, 5), (std::vector<double>{0, 0.25, 0, 0.5, 0}));
  EXPECT_THROW(dense_scores(r, 3), Error);
}

TEST(Filter, ConstructionErrors) {
  EXPECT_THROW(ParticleFilter(std::vector<double>{}), Error);
  EXPECT_THROW(ParticleFilter(std::vector<double>{2, 1}), Error);
  EXPECT_THROW(ParticleFilter(line(3), {0, 0.5}), Error);
  EXPECT_THROW(ParticleFilter(line(3), {10, -1.0}), Error);
}
