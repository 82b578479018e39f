#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lmloc {

using ImageId = std::uint32_t;

/// Dense embedding of one scene image. Entries are always finite.
class FeatureVector {
 public:
  FeatureVector() = default;
  explicit FeatureVector(std::vector<float> values);

  std::size_t dim() const noexcept { return values_.size(); }
  std::span<const float> values() const noexcept { return values_; }
  float operator[](std::size_t i) const { return values_[i]; }

  bool operator==(const FeatureVector&) const = default;

 private:
  std::vector<float> values_;
};

enum class DomainTag { landmark, train, test };

std::string_view to_string(DomainTag tag);
DomainTag parse_domain_tag(std::string_view text);

struct ImageRecord {
  ImageId image_id = 0;
  FeatureVector feature;
  double arclength = 0.0;  // meters along the route
  DomainTag domain = DomainTag::train;
};

/// Immutable set of images with dense ids 0..n-1, uniform dimension and
/// non-decreasing arclength.
class FeatureCollection {
 public:
  FeatureCollection() = default;
  explicit FeatureCollection(std::vector<ImageRecord> records);

  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }
  std::size_t dim() const noexcept { return dim_; }

  const ImageRecord& operator[](std::size_t i) const { return records_[i]; }
  std::span<const ImageRecord> records() const noexcept { return records_; }
  auto begin() const noexcept { return records_.begin(); }
  auto end() const noexcept { return records_.end(); }

  std::vector<double> arclengths() const;

 private:
  std::vector<ImageRecord> records_;
  std::size_t dim_ = 0;
};

// Raw feature file: "FVEC1", u8 version, u32 n, u32 d, n*d float32 LE.
struct FeatureMatrix {
  std::uint32_t rows = 0;
  std::uint32_t dim = 0;
  std::vector<float> data;  // row-major

  std::span<const float> row(std::size_t i) const {
    return std::span<const float>(data).subspan(i * dim, dim);
  }
};

inline constexpr std::string_view kFeatureMagic = "FVEC1";
inline constexpr std::uint8_t kFeatureVersion = 1;

FeatureMatrix read_feature_matrix(std::istream& in, const std::string& source);
FeatureMatrix read_feature_matrix(const std::filesystem::path& path);
void write_feature_matrix(std::ostream& out, const FeatureMatrix& matrix);
void write_feature_matrix(const std::filesystem::path& path, const FeatureMatrix& matrix);

struct ViewpointRow {
  ImageId image_id = 0;
  double arclength = 0.0;
  DomainTag domain = DomainTag::train;
};

// Sidecar: header "image_id,arclength_m,domain_tag", then one row per image.
std::vector<ViewpointRow> read_viewpoints(std::istream& in, const std::string& source);
std::vector<ViewpointRow> read_viewpoints(const std::filesystem::path& path);
void write_viewpoints(std::ostream& out, std::span<const ViewpointRow> rows);
void write_viewpoints(const std::filesystem::path& path, std::span<const ViewpointRow> rows);

struct LoadOptions {
  bool l2_normalize = false;
};

FeatureCollection make_collection(const FeatureMatrix& matrix, std::span<const ViewpointRow> rows,
                                  const LoadOptions& options = {});
FeatureCollection load_features(const std::filesystem::path& features,
                                const std::filesystem::path& sidecar,
                                const LoadOptions& options = {});

FeatureMatrix to_matrix(const FeatureCollection& collection);
std::vector<ViewpointRow> to_viewpoints(const FeatureCollection& collection);
void save_features(const FeatureCollection& collection, const std::filesystem::path& features,
                   const std::filesystem::path& sidecar);

/// Dissimilarity d(x, p) between an input scene x and a prototype p. The
/// argument order is significant; implementations need not be symmetric.
class DissimilarityEvaluator {
 public:
  virtual ~DissimilarityEvaluator() = default;
  virtual std::string_view name() const = 0;
  virtual double operator()(const FeatureVector& x, const FeatureVector& p) const = 0;
};

/// L2 distance between deep features, accumulated in double precision.
class EuclideanDissimilarity final : public DissimilarityEvaluator {
 public:
  std::string_view name() const override { return "euclidean"; }
  double operator()(const FeatureVector& x, const FeatureVector& p) const override;
};

double dissimilarity(const FeatureVector& x, const FeatureVector& p);
double dissimilarity(std::span<const float> x, std::span<const float> p);

}  // namespace lmloc
