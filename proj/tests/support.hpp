#pragma once

// Independent reference implementations and random instance generators shared
// by the unit and acceptance tests. Nothing here calls into the scoring code
// it is used to check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "lmloc/feature_store.hpp"
#include "lmloc/landmark_select.hpp"

namespace lmtest {

using lmloc::FeatureCollection;
using lmloc::FeatureVector;
using lmloc::ImageRecord;

inline std::mt19937_64 rng_for(std::uint64_t seed, std::uint64_t salt = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(salt), 0x5eedu};
  return std::mt19937_64(seq);
}

inline std::vector<float> random_values(std::size_t dim, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  std::vector<float> v(dim);
  for (auto& x : v) x = static_cast<float>(g(rng));
  return v;
}

inline FeatureVector random_feature(std::size_t dim, std::mt19937_64& rng, double scale = 1.0) {
  return FeatureVector(random_values(dim, rng, scale));
}

inline FeatureCollection random_collection(std::size_t n, std::size_t dim, std::mt19937_64& rng,
                                           lmloc::DomainTag tag = lmloc::DomainTag::train) {
  std::vector<ImageRecord> recs;
  for (std::size_t i = 0; i < n; ++i) {
    recs.push_back({static_cast<lmloc::ImageId>(i), random_feature(dim, rng), static_cast<double>(i), tag});
  }
  return FeatureCollection(std::move(recs));
}

inline lmloc::LandmarkSet random_landmarks(std::size_t r, std::size_t dim, std::mt19937_64& rng) {
  std::vector<lmloc::Landmark> lm;
  for (std::size_t i = 0; i < r; ++i) {
    lm.push_back({static_cast<lmloc::LandmarkId>(i), static_cast<lmloc::ImageId>(i), random_feature(dim, rng)});
  }
  return lmloc::LandmarkSet(std::move(lm));
}

inline std::vector<float> scalars(std::initializer_list<double> xs) {
  std::vector<float> v;
  for (double x : xs) v.push_back(static_cast<float>(x));
  return v;
}

// Collection of 1-D features at the given values.
inline std::vector<ImageRecord> line_records(std::initializer_list<double> xs) {
  std::vector<ImageRecord> recs;
  lmloc::ImageId id = 0;
  for (double x : xs) {
    recs.push_back({id, FeatureVector(scalars({x})), static_cast<double>(id), lmloc::DomainTag::landmark});
    ++id;
  }
  return recs;
}

namespace oracle {

inline double l2(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += d * d;
  }
  return std::sqrt(s);
}

// Nearest-other distance for every candidate by exhaustive pairwise scan.
inline std::vector<double> nn_scores(const std::vector<ImageRecord>& c) {
  std::vector<double> s(c.size(), INFINITY);
  for (std::size_t i = 0; i < c.size(); ++i)
    for (std::size_t j = 0; j < c.size(); ++j)
      if (i != j) s[i] = std::min(s[i], l2(c[i].feature.values(), c[j].feature.values()));
  return s;
}

// Indices of the h smallest values via a full stable sort on (value, index).
inline std::vector<std::uint32_t> argsort_prefix(const std::vector<double>& v, std::size_t h) {
  std::vector<std::uint32_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0u);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  idx.resize(h);
  return idx;
}

// Dense length-r reciprocal-rank vector.
inline std::vector<double> dense_rrf(const std::vector<std::uint32_t>& ranked, std::size_t limit, std::size_t r) {
  std::vector<double> d(r, 0.0);
  for (std::size_t j = 0; j < ranked.size() && j < limit; ++j) d[ranked[j]] = 1.0 / static_cast<double>(j + 1);
  return d;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Profile by per-prototype loop.
inline std::vector<double> profile(const FeatureVector& x, const lmloc::LandmarkSet& lm) {
  std::vector<double> p;
  for (const auto& l : lm.prototypes()) p.push_back(l2(x.values(), l.feature.values()));
  return p;
}

// (id, score) pairs ordered by descending score then ascending id.
struct Ranked {
  std::uint32_t id;
  double score;
};
inline std::vector<Ranked> order(std::vector<Ranked> v) {
  std::sort(v.begin(), v.end(), [](const Ranked& a, const Ranked& b) {
    return a.score != b.score ? a.score > b.score : a.id < b.id;
  });
  return v;
}

}  // namespace oracle

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("lmloc_" + tag + "_" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::filesystem::path operator/(const std::string& name) const { return path / name; }
};

}  // namespace lmtest
