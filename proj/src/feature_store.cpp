#include "lmloc/feature_store.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "lmloc/byte_io.hpp"
#include "lmloc/error.hpp"
#include "lmloc/text.hpp"

namespace lmloc {

FeatureVector::FeatureVector(std::vector<float> values) : values_(std::move(values)) {
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      fail(ErrorCategory::data, "non-finite feature value at element " + std::to_string(i));
    }
  }
}

std::string_view to_string(DomainTag tag) {
  switch (tag) {
    case DomainTag::landmark: return "landmark";
    case DomainTag::train: return "train";
    case DomainTag::test: return "test";
  }
  return "unknown";
}

DomainTag parse_domain_tag(std::string_view text) {
  if (text == "landmark") return DomainTag::landmark;
  if (text == "train") return DomainTag::train;
  if (text == "test") return DomainTag::test;
  fail(ErrorCategory::format, "unknown domain tag \"" + std::string(text) + "\"");
}

FeatureCollection::FeatureCollection(std::vector<ImageRecord> records) : records_(std::move(records)) {
  if (records_.empty()) return;
  dim_ = records_.front().feature.dim();
  if (dim_ == 0) fail(ErrorCategory::data, "feature dimension must be positive");
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto& rec = records_[i];
    if (rec.image_id != i) {
      fail(ErrorCategory::data, "image ids must be dense 0..n-1; row " + std::to_string(i) +
                                    " has id " + std::to_string(rec.image_id));
    }
    if (rec.feature.dim() != dim_) {
      fail(ErrorCategory::data, "dimension mismatch at row " + std::to_string(i) + ": " +
                                    std::to_string(rec.feature.dim()) + " != " + std::to_string(dim_));
    }
    if (!std::isfinite(rec.arclength) || rec.arclength < 0.0) {
      fail(ErrorCategory::data, "invalid arclength at row " + std::to_string(i));
    }
    if (i > 0 && rec.arclength < records_[i - 1].arclength) {
      fail(ErrorCategory::data, "arclength decreases at row " + std::to_string(i));
    }
  }
}

std::vector<double> FeatureCollection::arclengths() const {
  std::vector<double> out;
  out.reserve(records_.size());
  for (const auto& rec : records_) out.push_back(rec.arclength);
  return out;
}

FeatureMatrix read_feature_matrix(std::istream& in, const std::string& source) {
  byte_io::Reader reader(in, source);
  reader.expect_magic(kFeatureMagic);
  const auto version = reader.read_le<std::uint8_t>("version");
  if (version != kFeatureVersion) {
    fail(ErrorCategory::format, source + ": unsupported version " + std::to_string(version) +
                                    " at byte offset 5");
  }
  FeatureMatrix m;
  m.rows = reader.read_le<std::uint32_t>("row count");
  m.dim = reader.read_le<std::uint32_t>("dimension");
  if (m.dim == 0 && m.rows > 0) fail(ErrorCategory::format, source + ": zero dimension in header");

  const std::uint64_t count = std::uint64_t{m.rows} * m.dim;
  // Grow as rows arrive so a corrupt header cannot force a huge allocation.
  m.data.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, std::uint64_t{1} << 24)));
  std::vector<unsigned char> buf(std::size_t{m.dim} * 4);
  for (std::uint64_t row = 0; row < m.rows; ++row) {
    const std::uint64_t row_offset = reader.offset();
    reader.read_bytes(buf.data(), buf.size(), "payload (row " + std::to_string(row) + ")");
    m.data.resize(m.data.size() + m.dim);
    float* dst = m.data.data() + row * m.dim;
    for (std::uint32_t j = 0; j < m.dim; ++j) {
      const std::uint32_t bits = std::uint32_t{buf[4 * j]} | (std::uint32_t{buf[4 * j + 1]} << 8) |
                                 (std::uint32_t{buf[4 * j + 2]} << 16) |
                                 (std::uint32_t{buf[4 * j + 3]} << 24);
      dst[j] = std::bit_cast<float>(bits);
    }
    for (std::uint32_t j = 0; j < m.dim; ++j) {
      if (!std::isfinite(dst[j])) {
        fail(ErrorCategory::format, source + ": non-finite value at row " + std::to_string(row) +
                                        ", byte offset " + std::to_string(row_offset + 4u * j));
      }
    }
  }
  reader.expect_end();
  return m;
}

FeatureMatrix read_feature_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCategory::io, "cannot open " + path.string());
  return read_feature_matrix(in, path.string());
}

void write_feature_matrix(std::ostream& out, const FeatureMatrix& matrix) {
  out.write(kFeatureMagic.data(), static_cast<std::streamsize>(kFeatureMagic.size()));
  byte_io::write_le<std::uint8_t>(out, kFeatureVersion);
  byte_io::write_le<std::uint32_t>(out, matrix.rows);
  byte_io::write_le<std::uint32_t>(out, matrix.dim);
  for (float v : matrix.data) byte_io::write_le<float>(out, v);
}

void write_feature_matrix(const std::filesystem::path& path, const FeatureMatrix& matrix) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCategory::io, "cannot write " + path.string());
  write_feature_matrix(out, matrix);
}

std::vector<ViewpointRow> read_viewpoints(std::istream& in, const std::string& source) {
  std::vector<ViewpointRow> rows;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (!header_seen) {
      header_seen = true;
      if (line.rfind("image_id", 0) == 0) continue;
      fail(ErrorCategory::format, source + ": missing header line");
    }
    const auto fields = text::split(line, ',');
    if (fields.size() != 3) {
      fail(ErrorCategory::format, source + ":" + std::to_string(line_no) + ": expected 3 fields");
    }
    ViewpointRow row;
    try {
      row.image_id = text::parse_number<ImageId>(fields[0]);
      row.arclength = text::parse_number<double>(fields[1]);
      row.domain = parse_domain_tag(fields[2]);
    } catch (const Error& e) {
      fail(ErrorCategory::format, source + ":" + std::to_string(line_no) + ": " + e.what());
    }
    rows.push_back(row);
  }
  if (!header_seen) fail(ErrorCategory::format, source + ": empty viewpoint file");
  return rows;
}

std::vector<ViewpointRow> read_viewpoints(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCategory::io, "cannot open " + path.string());
  return read_viewpoints(in, path.string());
}

void write_viewpoints(std::ostream& out, std::span<const ViewpointRow> rows) {
  out << "image_id,arclength_m,domain_tag\n";
  for (const auto& row : rows) {
    out << row.image_id << ',' << text::format_double(row.arclength) << ',' << to_string(row.domain)
        << '\n';
  }
}

void write_viewpoints(const std::filesystem::path& path, std::span<const ViewpointRow> rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCategory::io, "cannot write " + path.string());
  write_viewpoints(out, rows);
}

FeatureCollection make_collection(const FeatureMatrix& matrix, std::span<const ViewpointRow> rows,
                                  const LoadOptions& options) {
  if (rows.size() != matrix.rows) {
    fail(ErrorCategory::data, "viewpoint sidecar has " + std::to_string(rows.size()) +
                                  " rows but feature file has " + std::to_string(matrix.rows));
  }
  std::vector<const ViewpointRow*> by_id(rows.size(), nullptr);
  for (const auto& row : rows) {
    if (row.image_id >= rows.size() || by_id[row.image_id] != nullptr) {
      fail(ErrorCategory::data, "sidecar image ids must be a permutation of 0..n-1 (offending id " +
                                    std::to_string(row.image_id) + ")");
    }
    by_id[row.image_id] = &row;
  }

  std::vector<ImageRecord> records;
  records.reserve(matrix.rows);
  for (std::uint32_t i = 0; i < matrix.rows; ++i) {
    auto src = matrix.row(i);
    std::vector<float> values(src.begin(), src.end());
    if (options.l2_normalize) {
      double norm_sq = 0.0;
      for (float v : values) norm_sq += double{v} * v;
      if (norm_sq > 0.0) {
        const double inv = 1.0 / std::sqrt(norm_sq);
        for (float& v : values) v = static_cast<float>(v * inv);
      }
    }
    records.push_back({i, FeatureVector(std::move(values)), by_id[i]->arclength, by_id[i]->domain});
  }
  return FeatureCollection(std::move(records));
}

FeatureCollection load_features(const std::filesystem::path& features,
                                const std::filesystem::path& sidecar, const LoadOptions& options) {
  const auto matrix = read_feature_matrix(features);
  const auto rows = read_viewpoints(sidecar);
  return make_collection(matrix, rows, options);
}

FeatureMatrix to_matrix(const FeatureCollection& collection) {
  FeatureMatrix m;
  m.rows = static_cast<std::uint32_t>(collection.size());
  m.dim = static_cast<std::uint32_t>(collection.dim());
  m.data.reserve(std::size_t{m.rows} * m.dim);
  for (const auto& rec : collection) {
    auto v = rec.feature.values();
    m.data.insert(m.data.end(), v.begin(), v.end());
  }
  return m;
}

std::vector<ViewpointRow> to_viewpoints(const FeatureCollection& collection) {
  std::vector<ViewpointRow> rows;
  rows.reserve(collection.size());
  for (const auto& rec : collection) rows.push_back({rec.image_id, rec.arclength, rec.domain});
  return rows;
}

void save_features(const FeatureCollection& collection, const std::filesystem::path& features,
                   const std::filesystem::path& sidecar) {
  write_feature_matrix(features, to_matrix(collection));
  const auto rows = to_viewpoints(collection);
  write_viewpoints(sidecar, rows);
}

double dissimilarity(std::span<const float> x, std::span<const float> p) {
  if (x.size() != p.size()) {
    fail(ErrorCategory::data, "dimension mismatch: " + std::to_string(x.size()) + " vs " +
                                  std::to_string(p.size()));
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double diff = double{x[i]} - double{p[i]};
    sum += diff * diff;
  }
  return std::sqrt(sum);
}

double dissimilarity(const FeatureVector& x, const FeatureVector& p) {
  return dissimilarity(x.values(), p.values());
}

double EuclideanDissimilarity::operator()(const FeatureVector& x, const FeatureVector& p) const {
  return dissimilarity(x, p);
}

}  // namespace lmloc
