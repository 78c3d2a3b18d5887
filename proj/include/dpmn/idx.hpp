#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "dpmn/data.hpp"
#include "dpmn/errors.hpp"

namespace dpmn {

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

namespace detail {

inline std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open data file: " + path);
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

inline std::uint32_t read_be32(const std::vector<std::uint8_t>& buf, std::size_t offset,
                               const std::string& path) {
  if (buf.size() < offset + 4)
    throw FormatError(path, buf.size(),
                      "truncated header: expected at least " + std::to_string(offset + 4) +
                          " bytes, file has " + std::to_string(buf.size()));
  return (std::uint32_t{buf[offset]} << 24) | (std::uint32_t{buf[offset + 1]} << 16) |
         (std::uint32_t{buf[offset + 2]} << 8) | std::uint32_t{buf[offset + 3]};
}

inline void append_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

inline void check_length(const std::vector<std::uint8_t>& buf, std::size_t expected,
                         const std::string& path) {
  if (buf.size() < expected)
    throw FormatError(path, buf.size(),
                      "truncated file: expected " + std::to_string(expected) + " bytes, got " +
                          std::to_string(buf.size()));
}

}  // namespace detail

struct IdxImages {
  std::uint32_t count = 0;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<std::uint8_t> pixels;
};

inline IdxImages read_idx_images(const std::string& path) {
  const auto buf = detail::read_file(path);
  const auto magic = detail::read_be32(buf, 0, path);
  if (magic != kIdxImageMagic) throw FormatError(path, 0, "bad image magic number " + std::to_string(magic));
  IdxImages img;
  img.count = detail::read_be32(buf, 4, path);
  img.rows = detail::read_be32(buf, 8, path);
  img.cols = detail::read_be32(buf, 12, path);
  const std::size_t body = std::size_t{img.count} * img.rows * img.cols;
  detail::check_length(buf, 16 + body, path);
  img.pixels.assign(buf.begin() + 16, buf.begin() + 16 + static_cast<std::ptrdiff_t>(body));
  return img;
}

inline std::vector<std::uint8_t> read_idx_labels(const std::string& path) {
  const auto buf = detail::read_file(path);
  const auto magic = detail::read_be32(buf, 0, path);
  if (magic != kIdxLabelMagic) throw FormatError(path, 0, "bad label magic number " + std::to_string(magic));
  const std::size_t count = detail::read_be32(buf, 4, path);
  detail::check_length(buf, 8 + count, path);
  return std::vector<std::uint8_t>(buf.begin() + 8, buf.begin() + 8 + static_cast<std::ptrdiff_t>(count));
}

// Loads an image/label file pair into one pool. Pixels are scaled to [0, 1].
inline DatasetShard load_idx(const std::string& images_path, const std::string& labels_path) {
  const auto images = read_idx_images(images_path);
  const auto labels = read_idx_labels(labels_path);
  if (labels.size() != images.count)
    throw ConsistencyError("image/label count mismatch: " + images_path + " has " +
                           std::to_string(images.count) + " images, " + labels_path + " has " +
                           std::to_string(labels.size()) + " labels");
  DatasetShard pool;
  pool.feature_dim = std::size_t{images.rows} * images.cols;
  std::size_t max_label = 0;
  for (auto l : labels) max_label = std::max<std::size_t>(max_label, l);
  pool.num_classes = images.count == 0 ? 0 : max_label + 1;
  pool.features.resize(images.pixels.size());
  for (std::size_t k = 0; k < images.pixels.size(); ++k) pool.features[k] = images.pixels[k] / 255.0;
  pool.labels.assign(labels.begin(), labels.end());
  return pool;
}

// Writers for fixtures and tooling.
inline void write_idx_images(const std::string& path, std::uint32_t rows, std::uint32_t cols,
                             const std::vector<std::uint8_t>& pixels) {
  const std::size_t per = std::size_t{rows} * cols;
  if (per == 0 || pixels.size() % per != 0) throw PreconditionError("pixel buffer is not a whole number of images");
  std::vector<std::uint8_t> out;
  out.reserve(16 + pixels.size());
  detail::append_be32(out, kIdxImageMagic);
  detail::append_be32(out, static_cast<std::uint32_t>(pixels.size() / per));
  detail::append_be32(out, rows);
  detail::append_be32(out, cols);
  out.insert(out.end(), pixels.begin(), pixels.end());
  std::ofstream f(path, std::ios::binary);
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!f) throw Error("cannot write " + path);
}

inline void write_idx_labels(const std::string& path, const std::vector<std::uint8_t>& labels) {
  std::vector<std::uint8_t> out;
  out.reserve(8 + labels.size());
  detail::append_be32(out, kIdxLabelMagic);
  detail::append_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.insert(out.end(), labels.begin(), labels.end());
  std::ofstream f(path, std::ios::binary);
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!f) throw Error("cannot write " + path);
}

}  // namespace dpmn
