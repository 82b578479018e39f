#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <unordered_map>
#include <vector>

#include "lmloc/feature_store.hpp"
#include "lmloc/scene_descriptor.hpp"

namespace lmloc {

// Packed descriptor entry: 11-bit landmark id followed by a 4-bit 1-based rank,
// entries concatenated MSB-first and zero-padded to a whole byte.
inline constexpr unsigned kLandmarkIdBits = 11;
inline constexpr unsigned kRankBits = 4;
inline constexpr unsigned kEntryBits = kLandmarkIdBits + kRankBits;
inline constexpr std::size_t kMaxLandmarks = std::size_t{1} << kLandmarkIdBits;   // 2048
inline constexpr std::size_t kMaxDescriptorLength = (std::size_t{1} << kRankBits) - 1;  // 15

constexpr std::size_t packed_size(std::size_t h) { return (kEntryBits * h + 7) / 8; }

struct PackedDescriptor {
  std::vector<std::uint8_t> bytes;

  bool operator==(const PackedDescriptor&) const = default;
};

PackedDescriptor encode(const RankedDescriptor& descriptor);
RankedDescriptor decode(std::span<const std::uint8_t> bytes, std::size_t h);
inline RankedDescriptor decode(const PackedDescriptor& packed, std::size_t h) {
  return decode(packed.bytes, h);
}

/// Incremental inverted index keyed by (landmark id, rank) with map image ids
/// as postings. Single writer, any number of concurrent readers.
class InvertedIndex {
 public:
  InvertedIndex() = default;
  InvertedIndex(std::size_t num_landmarks, std::size_t descriptor_length);

  std::size_t num_landmarks() const noexcept { return num_landmarks_; }
  std::size_t descriptor_length() const noexcept { return descriptor_length_; }
  std::size_t size() const noexcept { return image_ids_.size(); }
  bool empty() const noexcept { return image_ids_.empty(); }

  void insert(ImageId image_id, const RankedDescriptor& descriptor);
  bool contains(ImageId image_id) const { return slot_of_.count(image_id) != 0; }

  /// Map images sharing at least one of the query's landmark ids, at any rank.
  /// Ascending image ids.
  std::vector<ImageId> shortlist(const RankedDescriptor& query) const;

  /// Postings for one key; rank is 1-based.
  std::span<const ImageId> postings(LandmarkId landmark, std::size_t rank) const;

  const RankedDescriptor& descriptor(ImageId image_id) const;
  /// Image ids in insertion order.
  std::span<const ImageId> image_ids() const noexcept { return image_ids_; }

  // File: "SLIX1", u8 version, u32 r, u8 h, u32 n, n x (u32 image_id, packed descriptor).
  void save(std::ostream& out) const;
  void save(const std::filesystem::path& path) const;
  static InvertedIndex load(std::istream& in, const std::string& source);
  static InvertedIndex load(const std::filesystem::path& path);

 private:
  std::size_t key(LandmarkId landmark, std::size_t rank) const {
    return std::size_t{landmark} * descriptor_length_ + (rank - 1);
  }

  std::size_t num_landmarks_ = 0;
  std::size_t descriptor_length_ = 0;
  std::vector<std::vector<ImageId>> postings_;
  std::vector<ImageId> image_ids_;
  std::vector<RankedDescriptor> descriptors_;
  std::unordered_map<ImageId, std::size_t> slot_of_;
};

inline constexpr std::string_view kIndexMagic = "SLIX1";
inline constexpr std::uint8_t kIndexVersion = 1;

}  // namespace lmloc
