#pragma once

#include <span>
#include <vector>

#include "lmloc/feature_store.hpp"
#include "lmloc/landmark_select.hpp"

namespace lmloc {

/// D(x, R): element i is d(x, p_i).
struct DissimilarityProfile {
  std::vector<double> values;

  std::size_t size() const noexcept { return values.size(); }
};

DissimilarityProfile profile(const FeatureVector& x, const LandmarkSet& landmarks);
DissimilarityProfile profile(const FeatureVector& x, const LandmarkSet& landmarks,
                             const DissimilarityEvaluator& evaluator);

/// Ordered ids of the most similar landmarks; position j holds rank j+1.
class RankedDescriptor {
 public:
  RankedDescriptor() = default;
  explicit RankedDescriptor(std::vector<LandmarkId> ids);

  std::size_t size() const noexcept { return ids_.size(); }
  std::span<const LandmarkId> ids() const noexcept { return ids_; }
  LandmarkId operator[](std::size_t j) const { return ids_[j]; }

  bool operator==(const RankedDescriptor&) const = default;

 private:
  std::vector<LandmarkId> ids_;
};

/// Ids of the h smallest profile entries in ascending order of dissimilarity,
/// ties by ascending landmark id.
RankedDescriptor rank(const DissimilarityProfile& profile, std::size_t h);

struct RRFEntry {
  LandmarkId landmark_id = 0;
  double weight = 0.0;  // 1 / rank
};

/// Sparse reciprocal-rank vector: weight 1/j for the landmark at rank j <= limit.
class RRFVector {
 public:
  RRFVector() = default;
  /// `ranked_ids` in rank order; only the first `limit` are kept.
  RRFVector(std::span<const LandmarkId> ranked_ids, std::size_t limit);

  std::size_t limit() const noexcept { return entries_.size(); }
  std::span<const RRFEntry> entries() const noexcept { return entries_; }

  /// 0 for landmarks beyond the limit.
  double weight(LandmarkId id) const noexcept {
    return id < dense_.size() ? dense_[id] : 0.0;
  }

 private:
  std::vector<RRFEntry> entries_;
  std::vector<double> dense_;
};

RRFVector rrf(const RankedDescriptor& descriptor, std::size_t limit);
RRFVector rrf(const DissimilarityProfile& profile, std::size_t limit);

/// <q, m> summed over m's entries.
double rrf_score(const RRFVector& query, const RRFVector& map);

}  // namespace lmloc
