#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "freqattack/tensor.hpp"

namespace freqattack {

struct LabeledDataset {
  std::vector<Image> images;
  std::vector<int> labels;
  int num_classes = 0;

  std::size_t size() const { return images.size(); }
  // Throws ConfigError unless lengths match and labels lie in [0, num_classes).
  void validate() const;
};

// CIFAR-10 binary layout: per record one label byte followed by 3072 bytes,
// channel-planar R, G, B, each plane 32 x 32 row-major.
inline constexpr std::size_t kCifarSide = 32;
inline constexpr std::size_t kCifarRecordBytes = 1 + 3 * kCifarSide * kCifarSide;

LabeledDataset load_cifar10_binary(const std::filesystem::path& path, std::size_t count,
                                   int num_classes = 10);
// Images are quantized to 8 bits; they must be 32 x 32 x 3.
void save_cifar10_binary(const LabeledDataset& dataset, const std::filesystem::path& path);

// Three-class desk-scale dataset of 32 x 32 x 3 images:
//   0 - diagonal color gradient, 1 - vertical stripes, 2 - centered disk,
// each with Gaussian noise (sigma 0.05) and clipped to [0, 1]. Classes are
// assigned round-robin so any prefix is balanced.
struct SyntheticOptions {
  std::size_t count = 300;
  std::uint64_t seed = 1;
  double noise_sigma = 0.05;
};
LabeledDataset make_synthetic_dataset(const SyntheticOptions& options);

}  // namespace freqattack
