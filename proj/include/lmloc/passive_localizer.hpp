#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lmloc/feature_store.hpp"
#include "lmloc/inverted_index.hpp"
#include "lmloc/landmark_select.hpp"
#include "lmloc/scene_descriptor.hpp"

namespace lmloc {

enum class Method { brute_force, simbad_l2, bag_of_landmarks, rrf };

inline constexpr Method kAllMethods[] = {Method::brute_force, Method::simbad_l2,
                                         Method::bag_of_landmarks, Method::rrf};

std::string_view to_string(Method method);
Method parse_method(std::string_view text);

struct ScoredImage {
  ImageId image_id = 0;
  double score = 0.0;
};

/// Map images ordered by descending score, ties by ascending image id.
struct RankingResult {
  Method method = Method::rrf;
  std::vector<ScoredImage> entries;

  std::size_t size() const noexcept { return entries.size(); }
};

/// Relative score difference below which two scores count as tied.
inline constexpr double kScoreTieTolerance = 1e-12;

/// Sorts entries into the canonical RankingResult order.
void sort_ranking(std::vector<ScoredImage>& entries);

/// Quantized h-hot dissimilarity values kept beside the index for the SIMBAD
/// scorer. Values are 16-bit fixed point with one scale per table.
class DissimilarityTable {
 public:
  DissimilarityTable() = default;
  DissimilarityTable(double scale, std::size_t descriptor_length);

  /// Scale that maps [0, max_value] onto the full 16-bit range.
  static double scale_for(double max_value);

  double scale() const noexcept { return scale_; }
  std::size_t descriptor_length() const noexcept { return descriptor_length_; }
  std::size_t size() const noexcept { return image_ids_.size(); }

  std::uint16_t quantize(double value) const;
  double dequantize(std::uint16_t q) const { return q * scale_; }

  /// `values` are the dissimilarities of the image's top-h landmarks, in rank order.
  void insert(ImageId image_id, std::span<const double> values);
  bool contains(ImageId image_id) const { return slot_of_.count(image_id) != 0; }
  std::span<const std::uint16_t> values(ImageId image_id) const;

  // File: "SLDV1", u8 version, u32 n, u8 h, f32 scale, n x (u32 image_id, h x u16).
  void save(std::ostream& out) const;
  void save(const std::filesystem::path& path) const;
  static DissimilarityTable load(std::istream& in, const std::string& source);
  static DissimilarityTable load(const std::filesystem::path& path);

 private:
  double scale_ = 1.0;
  std::size_t descriptor_length_ = 0;
  std::vector<ImageId> image_ids_;
  std::vector<std::uint16_t> values_;
  std::unordered_map<ImageId, std::size_t> slot_of_;
};

/// Side-table path used next to an index file: "<index>.dis".
std::filesystem::path dissimilarity_table_path(const std::filesystem::path& index_path);

struct MapBuildOptions {
  bool keep_features = true;  // needed by brute_force
  bool simbad_table = true;   // needed by simbad_l2
};

/// Everything the online stage needs: landmarks, the inverted index over map
/// descriptors, and the optional side data used by the ablation scorers.
class MapModel {
 public:
  MapModel() = default;
  MapModel(LandmarkSet landmarks, InvertedIndex index,
           std::optional<DissimilarityTable> simbad = std::nullopt,
           std::vector<FeatureVector> features = {});

  static MapModel build(const FeatureCollection& map_images, LandmarkSet landmarks, std::size_t h,
                        const MapBuildOptions& options = {});

  const LandmarkSet& landmarks() const noexcept { return landmarks_; }
  const InvertedIndex& index() const noexcept { return index_; }
  const std::optional<DissimilarityTable>& simbad() const noexcept { return simbad_; }
  /// Raw map features indexed by image id; empty when not kept.
  std::span<const FeatureVector> features() const noexcept { return features_; }
  std::size_t size() const noexcept { return index_.size(); }

 private:
  LandmarkSet landmarks_;
  InvertedIndex index_;
  std::optional<DissimilarityTable> simbad_;
  std::vector<FeatureVector> features_;
};

/// The description of one query scene shared by all scorers.
struct QueryState {
  FeatureVector feature;
  DissimilarityProfile profile;
  RankedDescriptor top_h;
  RRFVector rrf;  // query-side limit, r by default
};

struct LocalizerConfig {
  std::size_t query_limit = 0;  // 0 means r
  std::size_t map_limit = 0;    // 0 means h
};

class Localizer {
 public:
  explicit Localizer(const MapModel& map, LocalizerConfig config = {});

  const MapModel& map() const noexcept { return *map_; }
  std::size_t query_limit() const noexcept { return query_limit_; }
  std::size_t map_limit() const noexcept { return map_limit_; }

  QueryState describe(const FeatureVector& query) const;

  RankingResult localize(const FeatureVector& query, Method method) const;
  RankingResult localize(const QueryState& query, Method method) const;

  /// Map-side reciprocal-rank vector of an indexed image.
  RRFVector map_rrf(ImageId image_id) const;

 private:
  RankingResult rank_rrf(const QueryState& query) const;
  RankingResult rank_bag(const QueryState& query) const;
  RankingResult rank_simbad(const QueryState& query) const;
  RankingResult rank_brute_force(const QueryState& query) const;

  const MapModel* map_;
  std::size_t query_limit_;
  std::size_t map_limit_;
};

/// 1-based rank of the best-ranked ground-truth image; images missing from
/// the ranking count as rank n_map.
std::size_t ground_truth_rank(const RankingResult& result, std::span<const ImageId> ground_truth,
                              std::size_t n_map);

/// Averaged normalized rank in percent.
double anr(std::span<const RankingResult> results,
           std::span<const std::vector<ImageId>> ground_truth, std::size_t n_map);

/// Map images within `tau` meters of `arclength`; the nearest image when none is.
std::vector<ImageId> ground_truth_within(double arclength, std::span<const double> map_arclengths,
                                         double tau);

}  // namespace lmloc
