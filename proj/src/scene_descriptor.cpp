#include "lmloc/scene_descriptor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lmloc/error.hpp"

namespace lmloc {

DissimilarityProfile profile(const FeatureVector& x, const LandmarkSet& landmarks) {
  return profile(x, landmarks, EuclideanDissimilarity{});
}

DissimilarityProfile profile(const FeatureVector& x, const LandmarkSet& landmarks,
                             const DissimilarityEvaluator& evaluator) {
  if (landmarks.size() > 0 && x.dim() != landmarks.dim()) {
    fail(ErrorCategory::data, "query dimension " + std::to_string(x.dim()) +
                                  " does not match landmark dimension " + std::to_string(landmarks.dim()));
  }
  DissimilarityProfile out;
  out.values.reserve(landmarks.size());
  for (const auto& lm : landmarks.prototypes()) out.values.push_back(evaluator(x, lm.feature));
  return out;
}

RankedDescriptor::RankedDescriptor(std::vector<LandmarkId> ids) : ids_(std::move(ids)) {
  auto sorted = ids_;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    fail(ErrorCategory::data, "ranked descriptor contains duplicate landmark ids");
  }
}

RankedDescriptor rank(const DissimilarityProfile& profile, std::size_t h) {
  if (h == 0) fail(ErrorCategory::usage, "descriptor length h must be positive");
  if (h > profile.size()) {
    fail(ErrorCategory::data, "descriptor length h=" + std::to_string(h) + " exceeds r=" +
                                  std::to_string(profile.size()));
  }
  for (double v : profile.values) {
    if (!std::isfinite(v)) fail(ErrorCategory::data, "profile contains a non-finite value");
  }
  std::vector<LandmarkId> order(profile.size());
  std::iota(order.begin(), order.end(), LandmarkId{0});
  const auto& vals = profile.values;
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(h), order.end(),
                    [&](LandmarkId a, LandmarkId b) {
                      if (vals[a] != vals[b]) return vals[a] < vals[b];
                      return a < b;
                    });
  order.resize(h);
  return RankedDescriptor(std::move(order));
}

RRFVector::RRFVector(std::span<const LandmarkId> ranked_ids, std::size_t limit) {
  limit = std::min(limit, ranked_ids.size());
  entries_.reserve(limit);
  LandmarkId max_id = 0;
  for (std::size_t j = 0; j < limit; ++j) {
    entries_.push_back({ranked_ids[j], 1.0 / static_cast<double>(j + 1)});
    max_id = std::max(max_id, ranked_ids[j]);
  }
  if (!entries_.empty()) {
    dense_.assign(std::size_t{max_id} + 1, 0.0);
    for (const auto& e : entries_) dense_[e.landmark_id] = e.weight;
  }
}

RRFVector rrf(const RankedDescriptor& descriptor, std::size_t limit) {
  if (limit == 0) fail(ErrorCategory::usage, "RRF limit must be positive");
  if (limit > descriptor.size()) {
    fail(ErrorCategory::data, "RRF limit " + std::to_string(limit) + " exceeds descriptor length " +
                                  std::to_string(descriptor.size()));
  }
  return RRFVector(descriptor.ids(), limit);
}

RRFVector rrf(const DissimilarityProfile& profile, std::size_t limit) {
  const auto full = rank(profile, limit);
  return RRFVector(full.ids(), limit);
}

double rrf_score(const RRFVector& query, const RRFVector& map) {
  double score = 0.0;
  for (const auto& e : map.entries()) score += query.weight(e.landmark_id) * e.weight;
  return score;
}

}  // namespace lmloc
