#include "lmloc/inverted_index.hpp"

#include <algorithm>
#include <fstream>

#include "lmloc/byte_io.hpp"
#include "lmloc/error.hpp"

namespace lmloc {
namespace {

class BitWriter {
 public:
  explicit BitWriter(std::vector<std::uint8_t>& out) : out_(out) {}

  void put(std::uint32_t value, unsigned bits) {
    for (unsigned i = bits; i-- > 0;) {
      if (used_ % 8 == 0) out_.push_back(0);
      if ((value >> i) & 1u) out_.back() |= static_cast<std::uint8_t>(0x80u >> (used_ % 8));
      ++used_;
    }
  }

 private:
  std::vector<std::uint8_t>& out_;
  std::size_t used_ = 0;
};

class BitReader {
 public:
  explicit BitReader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint32_t get(unsigned bits) {
    std::uint32_t value = 0;
    for (unsigned i = 0; i < bits; ++i, ++pos_) {
      const unsigned bit = (in_[pos_ / 8] >> (7 - pos_ % 8)) & 1u;
      value = (value << 1) | bit;
    }
    return value;
  }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

void check_capacity(const RankedDescriptor& descriptor) {
  if (descriptor.size() > kMaxDescriptorLength) {
    fail(ErrorCategory::data, "codec capacity: rank " + std::to_string(descriptor.size()) +
                                  " exceeds " + std::to_string(kMaxDescriptorLength));
  }
  for (LandmarkId id : descriptor.ids()) {
    if (id >= kMaxLandmarks) {
      fail(ErrorCategory::data, "codec capacity: landmark id " + std::to_string(id) + " exceeds " +
                                    std::to_string(kMaxLandmarks - 1));
    }
  }
}

}  // namespace

PackedDescriptor encode(const RankedDescriptor& descriptor) {
  check_capacity(descriptor);
  PackedDescriptor packed;
  packed.bytes.reserve(packed_size(descriptor.size()));
  BitWriter writer(packed.bytes);
  for (std::size_t j = 0; j < descriptor.size(); ++j) {
    writer.put(descriptor[j], kLandmarkIdBits);
    writer.put(static_cast<std::uint32_t>(j + 1), kRankBits);
  }
  return packed;
}

RankedDescriptor decode(std::span<const std::uint8_t> bytes, std::size_t h) {
  if (h > kMaxDescriptorLength) {
    fail(ErrorCategory::data, "codec capacity: h=" + std::to_string(h));
  }
  if (bytes.size() != packed_size(h)) {
    fail(ErrorCategory::format, "packed descriptor has " + std::to_string(bytes.size()) +
                                    " bytes, expected " + std::to_string(packed_size(h)));
  }
  BitReader reader(bytes);
  std::vector<LandmarkId> ids;
  ids.reserve(h);
  for (std::size_t j = 0; j < h; ++j) {
    const auto id = reader.get(kLandmarkIdBits);
    const auto rank = reader.get(kRankBits);
    if (rank != j + 1) {
      fail(ErrorCategory::format, "packed descriptor entry " + std::to_string(j) + " has rank " +
                                      std::to_string(rank));
    }
    ids.push_back(id);
  }
  return RankedDescriptor(std::move(ids));
}

InvertedIndex::InvertedIndex(std::size_t num_landmarks, std::size_t descriptor_length)
    : num_landmarks_(num_landmarks), descriptor_length_(descriptor_length) {
  if (num_landmarks == 0 || num_landmarks > kMaxLandmarks) {
    fail(ErrorCategory::data, "codec capacity: r=" + std::to_string(num_landmarks) +
                                  " must be in 1.." + std::to_string(kMaxLandmarks));
  }
  if (descriptor_length == 0 || descriptor_length > kMaxDescriptorLength ||
      descriptor_length > num_landmarks) {
    fail(ErrorCategory::data, "codec capacity: h=" + std::to_string(descriptor_length) +
                                  " must be in 1.." + std::to_string(kMaxDescriptorLength) +
                                  " and not exceed r");
  }
  postings_.resize(num_landmarks * descriptor_length);
}

void InvertedIndex::insert(ImageId image_id, const RankedDescriptor& descriptor) {
  if (contains(image_id)) {
    fail(ErrorCategory::data, "image " + std::to_string(image_id) + " is already indexed");
  }
  check_capacity(descriptor);
  if (descriptor.size() != descriptor_length_) {
    fail(ErrorCategory::data, "descriptor length " + std::to_string(descriptor.size()) +
                                  " does not match index h=" + std::to_string(descriptor_length_));
  }
  for (LandmarkId id : descriptor.ids()) {
    if (id >= num_landmarks_) {
      fail(ErrorCategory::data, "landmark id " + std::to_string(id) + " out of range for r=" +
                                    std::to_string(num_landmarks_));
    }
  }
  for (std::size_t j = 0; j < descriptor.size(); ++j) {
    auto& list = postings_[key(descriptor[j], j + 1)];
    list.insert(std::upper_bound(list.begin(), list.end(), image_id), image_id);
  }
  slot_of_.emplace(image_id, image_ids_.size());
  image_ids_.push_back(image_id);
  descriptors_.push_back(descriptor);
}

std::vector<ImageId> InvertedIndex::shortlist(const RankedDescriptor& query) const {
  std::vector<ImageId> out;
  for (LandmarkId id : query.ids()) {
    if (id >= num_landmarks_) continue;
    for (std::size_t rank = 1; rank <= descriptor_length_; ++rank) {
      const auto& list = postings_[key(id, rank)];
      out.insert(out.end(), list.begin(), list.end());
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::span<const ImageId> InvertedIndex::postings(LandmarkId landmark, std::size_t rank) const {
  if (landmark >= num_landmarks_ || rank == 0 || rank > descriptor_length_) return {};
  return postings_[key(landmark, rank)];
}

const RankedDescriptor& InvertedIndex::descriptor(ImageId image_id) const {
  const auto it = slot_of_.find(image_id);
  if (it == slot_of_.end()) fail(ErrorCategory::data, "image " + std::to_string(image_id) + " not indexed");
  return descriptors_[it->second];
}

void InvertedIndex::save(std::ostream& out) const {
  out.write(kIndexMagic.data(), static_cast<std::streamsize>(kIndexMagic.size()));
  byte_io::write_le<std::uint8_t>(out, kIndexVersion);
  byte_io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(num_landmarks_));
  byte_io::write_le<std::uint8_t>(out, static_cast<std::uint8_t>(descriptor_length_));
  byte_io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(image_ids_.size()));
  for (std::size_t slot = 0; slot < image_ids_.size(); ++slot) {
    byte_io::write_le<std::uint32_t>(out, image_ids_[slot]);
    const auto packed = encode(descriptors_[slot]);
    out.write(reinterpret_cast<const char*>(packed.bytes.data()),
              static_cast<std::streamsize>(packed.bytes.size()));
  }
}

void InvertedIndex::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCategory::io, "cannot write " + path.string());
  save(out);
}

InvertedIndex InvertedIndex::load(std::istream& in, const std::string& source) {
  byte_io::Reader reader(in, source);
  reader.expect_magic(kIndexMagic);
  const auto version = reader.read_le<std::uint8_t>("version");
  if (version != kIndexVersion) {
    fail(ErrorCategory::format, source + ": unsupported index version " + std::to_string(version));
  }
  const auto r = reader.read_le<std::uint32_t>("landmark count");
  const auto h = reader.read_le<std::uint8_t>("descriptor length");
  const auto n = reader.read_le<std::uint32_t>("image count");

  InvertedIndex index(r, h);
  std::vector<std::uint8_t> buf(packed_size(h));
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto id = reader.read_le<std::uint32_t>("image id");
    reader.read_bytes(buf.data(), buf.size(), "packed descriptor");
    index.insert(id, decode(buf, h));
  }
  reader.expect_end();
  return index;
}

InvertedIndex InvertedIndex::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCategory::io, "cannot open " + path.string());
  return load(in, path.string());
}

}  // namespace lmloc
