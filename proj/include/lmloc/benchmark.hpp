#pragma once

#include <span>
#include <vector>

#include "lmloc/feature_store.hpp"
#include "lmloc/passive_localizer.hpp"

namespace lmloc {

/// Landmark, training (map) and test (query) collections over one route.
struct DomainTriplet {
  FeatureCollection landmark;
  FeatureCollection train;
  FeatureCollection test;
};

struct AnrBenchmarkConfig {
  std::vector<std::size_t> r_values{50};
  std::vector<std::size_t> h_values{4};
  double tau = 10.0;  // ground-truth radius, meters
  std::vector<Method> methods{std::begin(kAllMethods), std::end(kAllMethods)};
  std::size_t landmark_stride = 1;
  std::size_t workers = 1;
};

struct AnrRow {
  Method method = Method::rrf;
  std::size_t r = 0;
  std::size_t h = 0;
  double anr_percent = 0.0;
};

/// Single-view place recognition: select r landmarks, index the map with
/// top-h descriptors, rank every test query with each method and report ANR.
std::vector<AnrRow> run_anr_benchmark(const DomainTriplet& data, const AnrBenchmarkConfig& config);

}  // namespace lmloc
