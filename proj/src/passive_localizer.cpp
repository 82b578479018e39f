#include "lmloc/passive_localizer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "lmloc/byte_io.hpp"
#include "lmloc/error.hpp"

namespace lmloc {

std::string_view to_string(Method method) {
  switch (method) {
    case Method::brute_force: return "brute_force";
    case Method::simbad_l2: return "simbad_l2";
    case Method::bag_of_landmarks: return "bag_of_landmarks";
    case Method::rrf: return "rrf";
  }
  return "unknown";
}

Method parse_method(std::string_view text) {
  for (Method m : kAllMethods) {
    if (text == to_string(m)) return m;
  }
  fail(ErrorCategory::usage, "unknown method \"" + std::string(text) + "\"");
}

void sort_ranking(std::vector<ScoredImage>& entries) {
  std::sort(entries.begin(), entries.end(), [](const ScoredImage& a, const ScoredImage& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.image_id < b.image_id;
  });
  // Scores that agree to rounding noise are ties; order each such run by id.
  auto same = [](double a, double b) {
    return std::abs(a - b) <= kScoreTieTolerance * std::max({1.0, std::abs(a), std::abs(b)});
  };
  for (std::size_t begin = 0; begin < entries.size();) {
    std::size_t end = begin + 1;
    while (end < entries.size() && same(entries[end - 1].score, entries[end].score)) ++end;
    if (end - begin > 1) {
      std::sort(entries.begin() + static_cast<long>(begin), entries.begin() + static_cast<long>(end),
                [](const ScoredImage& a, const ScoredImage& b) { return a.image_id < b.image_id; });
    }
    begin = end;
  }
}

// --- DissimilarityTable ----------------------------------------------------

DissimilarityTable::DissimilarityTable(double scale, std::size_t descriptor_length)
    : scale_(scale), descriptor_length_(descriptor_length) {
  if (!(scale > 0.0) || !std::isfinite(scale)) fail(ErrorCategory::data, "invalid quantization scale");
}

double DissimilarityTable::scale_for(double max_value) {
  return max_value > 0.0 ? max_value / 65535.0 : 1.0;
}

std::uint16_t DissimilarityTable::quantize(double value) const {
  const double q = std::round(value / scale_);
  if (q <= 0.0) return 0;
  if (q >= 65535.0) return 65535;
  return static_cast<std::uint16_t>(q);
}

void DissimilarityTable::insert(ImageId image_id, std::span<const double> values) {
  if (values.size() != descriptor_length_) {
    fail(ErrorCategory::data, "dissimilarity row has " + std::to_string(values.size()) +
                                  " values, expected " + std::to_string(descriptor_length_));
  }
  if (contains(image_id)) fail(ErrorCategory::data, "image " + std::to_string(image_id) + " already stored");
  slot_of_.emplace(image_id, image_ids_.size());
  image_ids_.push_back(image_id);
  for (double v : values) values_.push_back(quantize(v));
}

std::span<const std::uint16_t> DissimilarityTable::values(ImageId image_id) const {
  const auto it = slot_of_.find(image_id);
  if (it == slot_of_.end()) {
    fail(ErrorCategory::data, "missing stored dissimilarity values for image " + std::to_string(image_id));
  }
  return std::span<const std::uint16_t>(values_).subspan(it->second * descriptor_length_,
                                                         descriptor_length_);
}

void DissimilarityTable::save(std::ostream& out) const {
  out.write("SLDV1", 5);
  byte_io::write_le<std::uint8_t>(out, 1);
  byte_io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(image_ids_.size()));
  byte_io::write_le<std::uint8_t>(out, static_cast<std::uint8_t>(descriptor_length_));
  byte_io::write_le<float>(out, static_cast<float>(scale_));
  for (std::size_t slot = 0; slot < image_ids_.size(); ++slot) {
    byte_io::write_le<std::uint32_t>(out, image_ids_[slot]);
    for (std::size_t j = 0; j < descriptor_length_; ++j) {
      byte_io::write_le<std::uint16_t>(out, values_[slot * descriptor_length_ + j]);
    }
  }
}

void DissimilarityTable::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCategory::io, "cannot write " + path.string());
  save(out);
}

DissimilarityTable DissimilarityTable::load(std::istream& in, const std::string& source) {
  byte_io::Reader reader(in, source);
  reader.expect_magic("SLDV1");
  if (reader.read_le<std::uint8_t>("version") != 1) {
    fail(ErrorCategory::format, source + ": unsupported dissimilarity table version");
  }
  const auto n = reader.read_le<std::uint32_t>("row count");
  const auto h = reader.read_le<std::uint8_t>("descriptor length");
  const auto scale = reader.read_le<float>("scale");
  // Stored values are already quantized; reinsert them verbatim.
  DissimilarityTable table(scale, h);
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto id = reader.read_le<std::uint32_t>("image id");
    if (table.contains(id)) fail(ErrorCategory::format, source + ": duplicate image id " + std::to_string(id));
    table.slot_of_.emplace(id, table.image_ids_.size());
    table.image_ids_.push_back(id);
    for (std::size_t j = 0; j < h; ++j) table.values_.push_back(reader.read_le<std::uint16_t>("value"));
  }
  reader.expect_end();
  return table;
}

DissimilarityTable DissimilarityTable::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCategory::io, "cannot open " + path.string());
  return load(in, path.string());
}

std::filesystem::path dissimilarity_table_path(const std::filesystem::path& index_path) {
  auto p = index_path;
  p += ".dis";
  return p;
}

// --- MapModel ---------------------------------------------------------------

MapModel::MapModel(LandmarkSet landmarks, InvertedIndex index, std::optional<DissimilarityTable> simbad,
                   std::vector<FeatureVector> features)
    : landmarks_(std::move(landmarks)),
      index_(std::move(index)),
      simbad_(std::move(simbad)),
      features_(std::move(features)) {
  if (landmarks_.size() != index_.num_landmarks()) {
    fail(ErrorCategory::data, "index was built for r=" + std::to_string(index_.num_landmarks()) +
                                  " but " + std::to_string(landmarks_.size()) + " landmarks are loaded");
  }
  if (simbad_ && simbad_->descriptor_length() != index_.descriptor_length()) {
    fail(ErrorCategory::data, "dissimilarity table h does not match index h");
  }
}

MapModel MapModel::build(const FeatureCollection& map_images, LandmarkSet landmarks, std::size_t h,
                         const MapBuildOptions& options) {
  if (!map_images.empty() && map_images.dim() != landmarks.dim()) {
    fail(ErrorCategory::data, "map feature dimension " + std::to_string(map_images.dim()) +
                                  " does not match landmark dimension " + std::to_string(landmarks.dim()));
  }
  InvertedIndex index(landmarks.size(), h);
  std::vector<std::vector<double>> hot_values;
  hot_values.reserve(map_images.size());
  double max_value = 0.0;
  for (const auto& rec : map_images) {
    const auto prof = profile(rec.feature, landmarks);
    const auto desc = rank(prof, h);
    index.insert(rec.image_id, desc);
    std::vector<double> hot;
    hot.reserve(h);
    for (LandmarkId id : desc.ids()) {
      hot.push_back(prof.values[id]);
      max_value = std::max(max_value, prof.values[id]);
    }
    hot_values.push_back(std::move(hot));
  }

  std::optional<DissimilarityTable> simbad;
  if (options.simbad_table) {
    simbad.emplace(DissimilarityTable::scale_for(max_value), h);
    for (std::size_t i = 0; i < map_images.size(); ++i) {
      simbad->insert(map_images[i].image_id, hot_values[i]);
    }
  }
  std::vector<FeatureVector> features;
  if (options.keep_features) {
    features.reserve(map_images.size());
    for (const auto& rec : map_images) features.push_back(rec.feature);
  }
  return MapModel(std::move(landmarks), std::move(index), std::move(simbad), std::move(features));
}

// --- Localizer --------------------------------------------------------------

Localizer::Localizer(const MapModel& map, LocalizerConfig config) : map_(&map) {
  const std::size_t r = map.landmarks().size();
  const std::size_t h = map.index().descriptor_length();
  query_limit_ = config.query_limit == 0 ? r : config.query_limit;
  map_limit_ = config.map_limit == 0 ? h : config.map_limit;
  if (query_limit_ > r) fail(ErrorCategory::usage, "query RRF limit exceeds r");
  if (map_limit_ > h) fail(ErrorCategory::usage, "map RRF limit exceeds h");
}

QueryState Localizer::describe(const FeatureVector& query) const {
  QueryState state;
  state.feature = query;
  state.profile = profile(query, map_->landmarks());
  const std::size_t h = map_->index().descriptor_length();
  const auto full = rank(state.profile, std::max(h, query_limit_));
  state.top_h = RankedDescriptor(std::vector<LandmarkId>(full.ids().begin(), full.ids().begin() + h));
  state.rrf = RRFVector(full.ids(), query_limit_);
  return state;
}

RankingResult Localizer::localize(const FeatureVector& query, Method method) const {
  return localize(describe(query), method);
}

RankingResult Localizer::localize(const QueryState& query, Method method) const {
  switch (method) {
    case Method::rrf: return rank_rrf(query);
    case Method::bag_of_landmarks: return rank_bag(query);
    case Method::simbad_l2: return rank_simbad(query);
    case Method::brute_force: return rank_brute_force(query);
  }
  fail(ErrorCategory::usage, "unknown method");
}

RRFVector Localizer::map_rrf(ImageId image_id) const {
  return RRFVector(map_->index().descriptor(image_id).ids(), map_limit_);
}

RankingResult Localizer::rank_rrf(const QueryState& query) const {
  const auto& index = map_->index();
  RankingResult result{Method::rrf, {}};
  const auto candidates = index.shortlist(query.top_h);
  result.entries.reserve(candidates.size());
  for (ImageId id : candidates) {
    const auto& desc = index.descriptor(id);
    double score = 0.0;
    for (std::size_t j = 0; j < map_limit_; ++j) {
      score += query.rrf.weight(desc[j]) / static_cast<double>(j + 1);
    }
    result.entries.push_back({id, score});
  }
  sort_ranking(result.entries);
  return result;
}

RankingResult Localizer::rank_bag(const QueryState& query) const {
  const auto& index = map_->index();
  RankingResult result{Method::bag_of_landmarks, {}};
  const auto q_ids = query.top_h.ids();
  for (ImageId id : index.shortlist(query.top_h)) {
    const auto& desc = index.descriptor(id);
    std::size_t shared = 0;
    for (LandmarkId lm : desc.ids()) {
      if (std::find(q_ids.begin(), q_ids.end(), lm) != q_ids.end()) ++shared;
    }
    result.entries.push_back({id, static_cast<double>(shared)});
  }
  sort_ranking(result.entries);
  return result;
}

RankingResult Localizer::rank_simbad(const QueryState& query) const {
  const auto& table = map_->simbad();
  if (!table) fail(ErrorCategory::data, "simbad_l2 requires stored dissimilarity values");
  const auto& index = map_->index();
  RankingResult result{Method::simbad_l2, {}};
  const auto q_ids = query.top_h.ids();
  for (ImageId id : index.shortlist(query.top_h)) {
    const auto& desc = index.descriptor(id);
    const auto stored = table->values(id);
    double sum_sq = 0.0;
    for (std::size_t j = 0; j < desc.size(); ++j) {
      if (std::find(q_ids.begin(), q_ids.end(), desc[j]) == q_ids.end()) continue;
      // Both sides go through the same quantizer so self-matches cancel exactly.
      const double dq = table->dequantize(table->quantize(query.profile.values[desc[j]]));
      const double dm = table->dequantize(stored[j]);
      sum_sq += (dq - dm) * (dq - dm);
    }
    result.entries.push_back({id, -sum_sq});
  }
  sort_ranking(result.entries);
  return result;
}

RankingResult Localizer::rank_brute_force(const QueryState& query) const {
  const auto features = map_->features();
  if (features.empty()) fail(ErrorCategory::data, "brute_force requires map features");
  RankingResult result{Method::brute_force, {}};
  result.entries.reserve(features.size());
  for (std::size_t i = 0; i < features.size(); ++i) {
    result.entries.push_back({static_cast<ImageId>(i), -dissimilarity(query.feature, features[i])});
  }
  sort_ranking(result.entries);
  return result;
}

// --- ANR --------------------------------------------------------------------

std::size_t ground_truth_rank(const RankingResult& result, std::span<const ImageId> ground_truth,
                              std::size_t n_map) {
  if (ground_truth.empty()) fail(ErrorCategory::data, "query has no ground-truth image");
  for (std::size_t pos = 0; pos < result.entries.size(); ++pos) {
    const auto id = result.entries[pos].image_id;
    if (std::find(ground_truth.begin(), ground_truth.end(), id) != ground_truth.end()) return pos + 1;
  }
  return n_map;
}

double anr(std::span<const RankingResult> results, std::span<const std::vector<ImageId>> ground_truth,
           std::size_t n_map) {
  if (results.size() != ground_truth.size()) {
    fail(ErrorCategory::data, "ANR needs one ground-truth set per query");
  }
  if (results.empty()) fail(ErrorCategory::data, "ANR over zero queries");
  if (n_map == 0) fail(ErrorCategory::data, "ANR with empty map");
  double sum = 0.0;
  for (std::size_t q = 0; q < results.size(); ++q) {
    sum += static_cast<double>(ground_truth_rank(results[q], ground_truth[q], n_map)) /
           static_cast<double>(n_map);
  }
  return 100.0 * sum / static_cast<double>(results.size());
}

std::vector<ImageId> ground_truth_within(double arclength, std::span<const double> map_arclengths,
                                         double tau) {
  std::vector<ImageId> out;
  std::size_t nearest = 0;
  double nearest_dist = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < map_arclengths.size(); ++i) {
    const double dist = std::abs(map_arclengths[i] - arclength);
    if (dist <= tau) out.push_back(static_cast<ImageId>(i));
    if (dist < nearest_dist) {
      nearest_dist = dist;
      nearest = i;
    }
  }
  if (out.empty() && !map_arclengths.empty()) out.push_back(static_cast<ImageId>(nearest));
  return out;
}

}  // namespace lmloc
