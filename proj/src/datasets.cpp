#include "nlps/envs.hpp"

#include <charconv>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <sstream>
#include <stdexcept>

namespace nlps::envs {

namespace {

constexpr std::uint32_t kIdxImageMagic = 2051;
constexpr std::uint32_t kIdxLabelMagic = 2049;

std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset,
                        const std::string& path) {
  if (bytes.size() < offset + 4) throw std::runtime_error(path + ": truncated IDX header");
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

}  // namespace

DigitDataset load_digits(const std::string& image_path, const std::string& label_path,
                         std::size_t limit) {
  const auto images = read_file(image_path);
  const auto labels = read_file(label_path);

  const auto image_magic = read_be32(images, 0, image_path);
  if (image_magic != kIdxImageMagic)
    throw std::runtime_error(image_path + ": bad IDX image magic " + std::to_string(image_magic));
  const auto label_magic = read_be32(labels, 0, label_path);
  if (label_magic != kIdxLabelMagic)
    throw std::runtime_error(label_path + ": bad IDX label magic " + std::to_string(label_magic));

  const std::size_t n_images = read_be32(images, 4, image_path);
  const std::size_t rows = read_be32(images, 8, image_path);
  const std::size_t cols = read_be32(images, 12, image_path);
  const std::size_t n_labels = read_be32(labels, 4, label_path);
  if (n_images != n_labels)
    throw std::runtime_error("image count " + std::to_string(n_images) +
                             " does not match label count " + std::to_string(n_labels));
  const std::size_t pixels = rows * cols;
  if (images.size() < 16 + n_images * pixels)
    throw std::runtime_error(image_path + ": truncated pixel data");
  if (labels.size() < 8 + n_labels) throw std::runtime_error(label_path + ": truncated labels");

  DigitDataset out;
  out.rows = rows;
  out.cols = cols;
  const std::size_t keep = std::min(n_images, limit);
  out.images.reserve(keep);
  out.labels.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) {
    Eigen::VectorXd img(static_cast<Eigen::Index>(pixels));
    const unsigned char* p = images.data() + 16 + i * pixels;
    for (std::size_t j = 0; j < pixels; ++j) img(static_cast<Eigen::Index>(j)) = p[j] / 255.0;
    const int label = labels[8 + i];
    if (label > 9) throw std::runtime_error(label_path + ": label outside 0..9");
    out.images.push_back(std::move(img));
    out.labels.push_back(label);
  }
  return out;
}

WallFollowingDataset load_wall_following(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  WallFollowingDataset out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, ',');) fields.push_back(trim(f));
    if (fields.size() != kWallSensors + 1)
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected " +
                               std::to_string(kWallSensors + 1) + " fields, got " +
                               std::to_string(fields.size()));
    Eigen::VectorXd reading(static_cast<Eigen::Index>(kWallSensors));
    for (std::size_t j = 0; j < kWallSensors; ++j) {
      const auto& f = fields[j];
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || ptr != f.data() + f.size() || f.empty())
        throw std::runtime_error(path + ":" + std::to_string(line_no) + ": field " +
                                 std::to_string(j + 1) + " is not numeric: '" + f + "'");
      reading(static_cast<Eigen::Index>(j)) = v;
    }
    const auto& label = fields.back();
    auto it = std::find(out.label_names.begin(), out.label_names.end(), label);
    if (it == out.label_names.end()) {
      if (out.label_names.size() == kWallClasses)
        throw std::runtime_error(path + ":" + std::to_string(line_no) + ": unknown label '" +
                                 label + "' beyond " + std::to_string(kWallClasses) + " classes");
      out.label_names.push_back(label);
      it = std::prev(out.label_names.end());
    }
    out.readings.push_back(std::move(reading));
    out.arms.push_back(static_cast<std::size_t>(it - out.label_names.begin()));
  }
  return out;
}

}  // namespace nlps::envs
