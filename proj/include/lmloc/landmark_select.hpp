#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "lmloc/feature_store.hpp"

namespace lmloc {

using LandmarkId = std::uint32_t;

struct Landmark {
  LandmarkId landmark_id = 0;
  ImageId source_image_id = 0;
  FeatureVector feature;
};

/// The r prototype scenes that span the dissimilarity space.
class LandmarkSet {
 public:
  LandmarkSet() = default;
  explicit LandmarkSet(std::vector<Landmark> prototypes);

  std::size_t size() const noexcept { return prototypes_.size(); }
  std::size_t dim() const noexcept { return prototypes_.empty() ? 0 : prototypes_.front().feature.dim(); }
  const Landmark& operator[](std::size_t i) const { return prototypes_[i]; }
  std::span<const Landmark> prototypes() const noexcept { return prototypes_; }

 private:
  std::vector<Landmark> prototypes_;
};

struct CandidateScore {
  ImageId image_id = 0;
  double score = 0.0;  // distance to the nearest other candidate
};

/// Scores each candidate by its nearest-neighbor dissimilarity within the
/// pool. Exact O(n^2); `workers` only affects speed.
std::vector<CandidateScore> score_candidates(std::span<const ImageRecord> candidates,
                                             std::size_t workers = 1);

/// Every `stride`-th candidate, starting with the first.
std::vector<ImageRecord> subsample(std::span<const ImageRecord> candidates, std::size_t stride);

/// Top-r candidates by descending score, ties by ascending image id.
LandmarkSet select_landmarks(std::span<const ImageRecord> candidates, std::size_t r,
                             std::size_t workers = 1);

// On disk a landmark set is a feature file plus a "landmark_id,source_image_id" sidecar.
void save_landmarks(const LandmarkSet& landmarks, const std::filesystem::path& features,
                    const std::filesystem::path& sidecar);
LandmarkSet load_landmarks(const std::filesystem::path& features, const std::filesystem::path& sidecar);

/// Sidecar path used by the CLI: "<features>.csv".
std::filesystem::path landmark_sidecar_path(const std::filesystem::path& features);

}  // namespace lmloc
