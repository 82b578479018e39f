#include "lmloc/benchmark.hpp"

#include "lmloc/error.hpp"
#include "lmloc/landmark_select.hpp"
#include "lmloc/parallel.hpp"

namespace lmloc {

std::vector<AnrRow> run_anr_benchmark(const DomainTriplet& data, const AnrBenchmarkConfig& config) {
  if (data.train.empty() || data.test.empty()) fail(ErrorCategory::data, "benchmark needs map and query images");
  const auto candidates = subsample(data.landmark.records(), config.landmark_stride);
  const auto map_arclengths = data.train.arclengths();

  std::vector<std::vector<ImageId>> ground_truth;
  ground_truth.reserve(data.test.size());
  for (const auto& q : data.test) ground_truth.push_back(ground_truth_within(q.arclength, map_arclengths, config.tau));

  std::vector<AnrRow> rows;
  for (std::size_t r : config.r_values) {
    const auto landmarks = select_landmarks(candidates, r, config.workers);
    for (std::size_t h : config.h_values) {
      const auto map = MapModel::build(data.train, landmarks, h);
      const Localizer localizer(map);
      std::vector<QueryState> queries(data.test.size());
      parallel_for(data.test.size(), config.workers,
                   [&](std::size_t i) { queries[i] = localizer.describe(data.test[i].feature); });
      for (Method method : config.methods) {
        std::vector<RankingResult> results(queries.size());
        parallel_for(queries.size(), config.workers,
                     [&](std::size_t i) { results[i] = localizer.localize(queries[i], method); });
        rows.push_back({method, r, h, anr(results, ground_truth, map.size())});
      }
    }
  }
  return rows;
}

}  // namespace lmloc
