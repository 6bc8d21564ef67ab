#pragma once

// Synthetic dataset files and scratch directories for tests.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

namespace fixture {

namespace fs = std::filesystem;

class ScratchDir {
 public:
  explicit ScratchDir(const std::string& tag) {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("nlps_" + tag + "_" + std::to_string(rd()));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

inline void write_bytes(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

// IDX image file: magic 2051, count, rows, cols, then pixel bytes.
inline void write_idx_images(const fs::path& path, const std::vector<std::vector<std::uint8_t>>& images,
                             std::uint32_t rows, std::uint32_t cols, std::uint32_t magic = 2051) {
  std::vector<std::uint8_t> bytes;
  put_be32(bytes, magic);
  put_be32(bytes, static_cast<std::uint32_t>(images.size()));
  put_be32(bytes, rows);
  put_be32(bytes, cols);
  for (const auto& img : images) bytes.insert(bytes.end(), img.begin(), img.end());
  write_bytes(path, bytes);
}

inline void write_idx_labels(const fs::path& path, const std::vector<std::uint8_t>& labels,
                             std::uint32_t magic = 2049) {
  std::vector<std::uint8_t> bytes;
  put_be32(bytes, magic);
  put_be32(bytes, static_cast<std::uint32_t>(labels.size()));
  bytes.insert(bytes.end(), labels.begin(), labels.end());
  write_bytes(path, bytes);
}

// Ten 2x2 digit images, one per label, with distinct pixel patterns.
inline void write_digit_pair(const fs::path& images, const fs::path& labels, std::size_t count = 10) {
  std::vector<std::vector<std::uint8_t>> imgs;
  std::vector<std::uint8_t> labs;
  for (std::size_t i = 0; i < count; ++i) {
    const auto d = static_cast<std::uint8_t>(i % 10);
    imgs.push_back({static_cast<std::uint8_t>(25 * d), 255, 0, static_cast<std::uint8_t>(d)});
    labs.push_back(d);
  }
  write_idx_images(images, imgs, 2, 2);
  write_idx_labels(labels, labs);
}

// Wall-following CSV with `rows` lines cycling through the four labels.
inline void write_wall_csv(const fs::path& path, std::size_t rows) {
  static const char* labels[] = {"Move-Forward", "Slight-Right-Turn", "Sharp-Right-Turn",
                                 "Slight-Left-Turn"};
  std::ofstream out(path);
  for (std::size_t r = 0; r < rows; ++r) {
    for (int s = 0; s < 24; ++s) out << (0.5 + 0.01 * static_cast<double>(s + r)) << ',';
    out << labels[(r / 3) % 4] << '\n';
  }
}

}  // namespace fixture
