#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "lmloc/error.hpp"
#include "lmloc/passive_localizer.hpp"
#include "support.hpp"

using namespace lmloc;
namespace oracle = lmtest::oracle;

namespace {

struct World {
  FeatureCollection map;
  LandmarkSet landmarks;
  MapModel model;
};

World make_world(std::size_t n, std::size_t r, std::size_t h, std::size_t dim, std::uint64_t seed) {
  auto rng = lmtest::rng_for(seed);
  auto map = lmtest::random_collection(n, dim, rng);
  auto lm = lmtest::random_landmarks(r, dim, rng);
  auto model = MapModel::build(map, lm, h);
  return {std::move(map), std::move(lm), std::move(model)};
}

// Oracle order: descending score, ascending id, with scores compared at 1e-12
// resolution so summation order cannot flip mathematically equal scores.
std::vector<ImageId> oracle_order(std::vector<oracle::Ranked> v) {
  for (auto& e : v) e.score = std::round(e.score * 1e12);
  std::vector<ImageId> ids;
  for (const auto& e : oracle::order(std::move(v))) ids.push_back(e.id);
  return ids;
}

std::vector<ImageId> ids_of(const RankingResult& r) {
  std::vector<ImageId> ids;
  for (const auto& e : r.entries) ids.push_back(e.image_id);
  return ids;
}

double score_of(const RankingResult& r, ImageId id) {
  for (const auto& e : r.entries)
    if (e.image_id == id) return e.score;
  return NAN;
}

RankingResult ranking(std::initializer_list<ImageId> ids) {
  RankingResult r;
  double s = 1.0;
  for (auto id : ids) r.entries.push_back({id, s -= 0.01});
  return r;
}

}  // namespace

TEST(Localize, SelfMatchRanksFirst) {
  const auto w = make_world(60, 40, 4, 8, 1);
  const Localizer loc(w.model);
  for (Method m : kAllMethods) {
    for (ImageId i = 0; i < 60; i += 7) {
      const auto res = loc.localize(w.map[i].feature, m);
      ASSERT_FALSE(res.entries.empty());
      // Images with an identical top-h tie with the query; the query must still score the maximum.
      EXPECT_EQ(score_of(res, i), res.entries[0].score) << to_string(m) << " image " << i;
    }
  }
}

TEST(Localize, RRFMatchesDenseOracle) {
  const std::size_t n = 150, r = 30, h = 4, dim = 6;
  const auto w = make_world(n, r, h, dim, 2);
  const Localizer loc(w.model);
  auto rng = lmtest::rng_for(3);
  for (int t = 0; t < 30; ++t) {
    const auto x = lmtest::random_feature(dim, rng);
    const auto qp = oracle::profile(x, w.landmarks);
    const auto qd = oracle::dense_rrf(oracle::argsort_prefix(qp, r), r, r);
    const auto q_top = oracle::argsort_prefix(qp, h);
    std::vector<oracle::Ranked> want;
    for (ImageId i = 0; i < n; ++i) {
      const auto mp = oracle::profile(w.map[i].feature, w.landmarks);
      const auto m_top = oracle::argsort_prefix(mp, h);
      bool shared = false;
      for (auto a : m_top)
        for (auto b : q_top) shared = shared || a == b;
      if (shared) want.push_back({i, oracle::dot(qd, oracle::dense_rrf(m_top, h, r))});
    }
    const auto got = loc.localize(x, Method::rrf);
    ASSERT_EQ(got.size(), want.size());
    for (const auto& e : want) EXPECT_NEAR(score_of(got, e.id), e.score, 1e-9);
    EXPECT_EQ(ids_of(got), oracle_order(want));
  }
}

TEST(Localize, BagCountsSharedLandmarks) {
  const std::size_t n = 120, r = 25, h = 5, dim = 5;
  const auto w = make_world(n, r, h, dim, 4);
  const Localizer loc(w.model);
  auto rng = lmtest::rng_for(5);
  for (int t = 0; t < 30; ++t) {
    const auto x = lmtest::random_feature(dim, rng);
    const auto q_top = oracle::argsort_prefix(oracle::profile(x, w.landmarks), h);
    std::vector<oracle::Ranked> want;
    for (ImageId i = 0; i < n; ++i) {
      const auto m_top = oracle::argsort_prefix(oracle::profile(w.map[i].feature, w.landmarks), h);
      std::size_t shared = 0;
      for (auto a : m_top) shared += std::count(q_top.begin(), q_top.end(), a);
      if (shared) want.push_back({i, static_cast<double>(shared)});
    }
    const auto got = loc.localize(x, Method::bag_of_landmarks);
    for (const auto& e : got.entries) {
      EXPECT_GE(e.score, 1.0);
      EXPECT_LE(e.score, static_cast<double>(h));
    }
    EXPECT_EQ(ids_of(got), oracle_order(want));
  }
}

TEST(Localize, SimbadMatchesQuantizedOracle) {
  const std::size_t n = 100, r = 20, h = 4, dim = 5;
  const auto w = make_world(n, r, h, dim, 6);
  const Localizer loc(w.model);
  const double scale = w.model.simbad()->scale();
  auto quant = [&](double v) { return std::clamp(std::round(v / scale), 0.0, 65535.0) * scale; };
  auto rng = lmtest::rng_for(7);
  for (int t = 0; t < 30; ++t) {
    const auto x = lmtest::random_feature(dim, rng);
    const auto qp = oracle::profile(x, w.landmarks);
    const auto q_top = oracle::argsort_prefix(qp, h);
    std::vector<oracle::Ranked> want;
    for (ImageId i = 0; i < n; ++i) {
      const auto mp = oracle::profile(w.map[i].feature, w.landmarks);
      const auto m_top = oracle::argsort_prefix(mp, h);
      double sum = 0.0;
      bool shared = false;
      for (auto a : m_top) {
        if (std::find(q_top.begin(), q_top.end(), a) == q_top.end()) continue;
        shared = true;
        const double d = quant(qp[a]) - quant(mp[a]);
        sum += d * d;
      }
      if (shared) want.push_back({i, -sum});
    }
    const auto got = loc.localize(x, Method::simbad_l2);
    ASSERT_EQ(got.size(), want.size());
    for (const auto& e : want) EXPECT_NEAR(score_of(got, e.id), e.score, 1e-6);
  }
}

TEST(Localize, BruteForceRanksWholeMap) {
  const auto w = make_world(40, 10, 3, 4, 8);
  const Localizer loc(w.model);
  auto rng = lmtest::rng_for(9);
  const auto x = lmtest::random_feature(4, rng);
  std::vector<oracle::Ranked> want;
  for (ImageId i = 0; i < 40; ++i) want.push_back({i, -oracle::l2(x.values(), w.map[i].feature.values())});
  const auto got = loc.localize(x, Method::brute_force);
  EXPECT_EQ(got.size(), 40u);
  EXPECT_EQ(ids_of(got), oracle_order(want));
}

TEST(Localize, MissingSideData) {
  auto w = make_world(20, 10, 3, 4, 10);
  const auto bare = MapModel::build(w.map, w.landmarks, 3, {false, false});
  const Localizer loc(bare);
  EXPECT_THROW(loc.localize(w.map[0].feature, Method::simbad_l2), Error);
  EXPECT_THROW(loc.localize(w.map[0].feature, Method::brute_force), Error);
  EXPECT_NO_THROW(loc.localize(w.map[0].feature, Method::rrf));
  EXPECT_THROW(MapModel(w.landmarks, InvertedIndex(11, 3)), Error);
}

TEST(Methods, ParseNames) {
  for (Method m : kAllMethods) EXPECT_EQ(parse_method(to_string(m)), m);
  EXPECT_THROW(parse_method("netvlad"), Error);
}

TEST(ANR, ThirtyPercentExample) {
  const auto r = ranking({4, 9, 1, 0, 2, 3, 5, 6, 7, 8});
  const std::vector<ImageId> gt{1};
  EXPECT_EQ(ground_truth_rank(r, gt, 10), 3u);
  const std::vector<RankingResult> rs{r};
  const std::vector<std::vector<ImageId>> gts{gt};
  EXPECT_DOUBLE_EQ(anr(rs, gts, 10), 30.0);
}

TEST(ANR, PerfectIsOneOverN) {
  std::vector<RankingResult> rs;
  std::vector<std::vector<ImageId>> gts;
  for (ImageId q = 0; q < 5; ++q) {
    rs.push_back(ranking({q, 7, 8}));
    gts.push_back({q});
  }
  EXPECT_DOUBLE_EQ(anr(rs, gts, 20), 5.0);
}

TEST(ANR, BestOfSetAndMissing) {
  const auto r = ranking({4, 9, 1});
  EXPECT_EQ(ground_truth_rank(r, std::vector<ImageId>{1, 9}, 10), 2u);
  EXPECT_EQ(ground_truth_rank(r, std::vector<ImageId>{5}, 10), 10u);
  EXPECT_THROW(ground_truth_rank(r, std::vector<ImageId>{}, 10), Error);
}

TEST(ANR, MonotoneInRank) {
  std::vector<ImageId> ids(30);
  std::iota(ids.begin(), ids.end(), 0u);
  double prev = 0.0;
  for (std::size_t k = 0; k < 30; ++k) {
    RankingResult r;
    for (std::size_t i = 0; i < 30; ++i) r.entries.push_back({ids[i], 30.0 - static_cast<double>(i)});
    const std::vector<RankingResult> rs{r};
    const std::vector<std::vector<ImageId>> gts{{ids[k]}};
    const double a = anr(rs, gts, 30);
    EXPECT_GT(a, prev);
    EXPECT_GT(a, 0.0);
    EXPECT_LE(a, 100.0);
    prev = a;
  }
}

TEST(GroundTruth, WithinToleranceOrNearest) {
  const std::vector<double> arcs{0, 1, 2, 3, 10};
  EXPECT_EQ(ground_truth_within(1.2, arcs, 1.0), (std::vector<ImageId>{1, 2}));
  EXPECT_EQ(ground_truth_within(7.0, arcs, 0.5), (std::vector<ImageId>{4}));
  EXPECT_EQ(ground_truth_within(3.0, arcs, 0.0), (std::vector<ImageId>{3}));
}

TEST(DissimilarityTableFile, RoundTrip) {
  DissimilarityTable t(DissimilarityTable::scale_for(8.0), 3);
  t.insert(4, std::vector<double>{0.0, 4.0, 8.0});
  t.insert(1, std::vector<double>{1.5, 2.5, 100.0});
  EXPECT_EQ(t.values(4)[2], 65535);
  EXPECT_EQ(t.values(1)[2], 65535);
  EXPECT_NEAR(t.dequantize(t.values(4)[1]), 4.0, t.scale());
  std::stringstream buf;
  t.save(buf);
  const auto back = DissimilarityTable::load(buf, "mem");
  for (ImageId id : {4u, 1u}) {
    const auto a = t.values(id), b = back.values(id);
    EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin(), b.end()));
  }
  EXPECT_THROW(t.insert(4, std::vector<double>{1, 2, 3}), Error);
  EXPECT_THROW(t.insert(5, std::vector<double>{1, 2}), Error);
  EXPECT_THROW(back.values(9), Error);
}

TEST(SortRanking, RoundingNoiseIsATie) {
  std::vector<ScoredImage> e{{9, 0.1 + 0.2}, {3, 0.3}, {5, 0.5}, {1, 0.2}};
  sort_ranking(e);
  EXPECT_EQ(e[0].image_id, 5u);
  EXPECT_EQ(e[1].image_id, 3u);
  EXPECT_EQ(e[2].image_id, 9u);
  EXPECT_EQ(e[3].image_id, 1u);
}
