#include "lmloc/landmark_select.hpp"

#include <algorithm>
#include <fstream>
#include <limits>

#include "lmloc/error.hpp"
#include "lmloc/parallel.hpp"
#include "lmloc/text.hpp"

namespace lmloc {

LandmarkSet::LandmarkSet(std::vector<Landmark> prototypes) : prototypes_(std::move(prototypes)) {
  for (std::size_t i = 0; i < prototypes_.size(); ++i) {
    if (prototypes_[i].landmark_id != i) {
      fail(ErrorCategory::data, "landmark ids must be dense 0..r-1");
    }
    if (prototypes_[i].feature.dim() != prototypes_.front().feature.dim()) {
      fail(ErrorCategory::data, "landmark " + std::to_string(i) + " has mismatched dimension");
    }
  }
}

std::vector<CandidateScore> score_candidates(std::span<const ImageRecord> candidates,
                                             std::size_t workers) {
  if (candidates.size() < 2) {
    fail(ErrorCategory::data, "landmark scoring needs at least 2 candidates, got " +
                                  std::to_string(candidates.size()));
  }
  std::vector<CandidateScore> scores(candidates.size());
  parallel_for(candidates.size(), workers, [&](std::size_t i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < candidates.size(); ++j) {
      if (j == i) continue;
      best = std::min(best, dissimilarity(candidates[i].feature, candidates[j].feature));
    }
    scores[i] = {candidates[i].image_id, best};
  });
  return scores;
}

std::vector<ImageRecord> subsample(std::span<const ImageRecord> candidates, std::size_t stride) {
  if (stride == 0) fail(ErrorCategory::usage, "stride must be positive");
  std::vector<ImageRecord> out;
  out.reserve(candidates.size() / stride + 1);
  for (std::size_t i = 0; i < candidates.size(); i += stride) out.push_back(candidates[i]);
  return out;
}

LandmarkSet select_landmarks(std::span<const ImageRecord> candidates, std::size_t r,
                             std::size_t workers) {
  if (r == 0) fail(ErrorCategory::usage, "number of landmarks must be positive");
  if (r > candidates.size()) {
    fail(ErrorCategory::data, "cannot select " + std::to_string(r) + " landmarks from " +
                                  std::to_string(candidates.size()) + " candidates");
  }
  auto scores = score_candidates(candidates, workers);

  std::vector<std::size_t> order(candidates.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a].score != scores[b].score) return scores[a].score > scores[b].score;
    return scores[a].image_id < scores[b].image_id;
  });

  std::vector<Landmark> prototypes;
  prototypes.reserve(r);
  for (std::size_t i = 0; i < r; ++i) {
    const auto& rec = candidates[order[i]];
    prototypes.push_back({static_cast<LandmarkId>(i), rec.image_id, rec.feature});
  }
  return LandmarkSet(std::move(prototypes));
}

std::filesystem::path landmark_sidecar_path(const std::filesystem::path& features) {
  auto p = features;
  p += ".csv";
  return p;
}

void save_landmarks(const LandmarkSet& landmarks, const std::filesystem::path& features,
                    const std::filesystem::path& sidecar) {
  FeatureMatrix m;
  m.rows = static_cast<std::uint32_t>(landmarks.size());
  m.dim = static_cast<std::uint32_t>(landmarks.dim());
  for (const auto& lm : landmarks.prototypes()) {
    auto v = lm.feature.values();
    m.data.insert(m.data.end(), v.begin(), v.end());
  }
  write_feature_matrix(features, m);

  std::ofstream out(sidecar, std::ios::binary);
  if (!out) fail(ErrorCategory::io, "cannot write " + sidecar.string());
  out << "landmark_id,source_image_id\n";
  for (const auto& lm : landmarks.prototypes()) out << lm.landmark_id << ',' << lm.source_image_id << '\n';
}

LandmarkSet load_landmarks(const std::filesystem::path& features, const std::filesystem::path& sidecar) {
  const auto m = read_feature_matrix(features);
  std::ifstream in(sidecar);
  if (!in) fail(ErrorCategory::io, "cannot open " + sidecar.string());

  std::vector<ImageId> sources(m.rows);
  std::vector<bool> seen(m.rows, false);
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    const auto fields = text::split(line, ',');
    if (fields.size() != 2) {
      fail(ErrorCategory::format, sidecar.string() + ":" + std::to_string(line_no) + ": expected 2 fields");
    }
    const auto id = text::parse_number<LandmarkId>(fields[0]);
    if (id >= m.rows || seen[id]) {
      fail(ErrorCategory::format, sidecar.string() + ":" + std::to_string(line_no) + ": bad landmark id");
    }
    seen[id] = true;
    sources[id] = text::parse_number<ImageId>(fields[1]);
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
    fail(ErrorCategory::format, sidecar.string() + ": missing landmark rows");
  }

  std::vector<Landmark> prototypes;
  prototypes.reserve(m.rows);
  for (std::uint32_t i = 0; i < m.rows; ++i) {
    auto row = m.row(i);
    prototypes.push_back({i, sources[i], FeatureVector(std::vector<float>(row.begin(), row.end()))});
  }
  return LandmarkSet(std::move(prototypes));
}

}  // namespace lmloc
