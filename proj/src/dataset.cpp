#include "freqattack/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "freqattack/errors.hpp"
#include "freqattack/rng.hpp"

namespace freqattack {

void LabeledDataset::validate() const {
  if (images.size() != labels.size()) throw ConfigError("dataset: image/label count mismatch");
  if (num_classes < 2) throw ConfigError("dataset: need at least two classes");
  for (int label : labels) {
    if (label < 0 || label >= num_classes) throw ConfigError("dataset: label out of range");
  }
}

LabeledDataset load_cifar10_binary(const std::filesystem::path& path, std::size_t count,
                                   int num_classes) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const auto bytes = std::filesystem::file_size(path);
  if (bytes % kCifarRecordBytes != 0) {
    throw IoError(path.string() + ": truncated CIFAR-10 file (size " + std::to_string(bytes) +
                  " is not a multiple of 3073)");
  }
  const std::size_t available = bytes / kCifarRecordBytes;
  if (count > available) {
    throw IoError("requested " + std::to_string(count) + " records but " + path.string() +
                  " holds " + std::to_string(available));
  }

  LabeledDataset dataset;
  dataset.num_classes = num_classes;
  std::vector<unsigned char> record(kCifarRecordBytes);
  constexpr std::size_t plane = kCifarSide * kCifarSide;
  for (std::size_t i = 0; i < count; ++i) {
    in.read(reinterpret_cast<char*>(record.data()), static_cast<std::streamsize>(record.size()));
    if (!in) throw IoError(path.string() + ": truncated record " + std::to_string(i));
    Tensor pixels({kCifarSide, kCifarSide, 3});
    for (std::size_t ch = 0; ch < 3; ++ch) {
      for (std::size_t p = 0; p < plane; ++p) {
        pixels.at(p / kCifarSide, p % kCifarSide, ch) = record[1 + ch * plane + p] / 255.0;
      }
    }
    if (record[0] >= num_classes) {
      throw IoError(path.string() + ": label " + std::to_string(record[0]) + " out of range");
    }
    dataset.labels.push_back(record[0]);
    dataset.images.emplace_back(std::move(pixels));
  }
  return dataset;
}

void save_cifar10_binary(const LabeledDataset& dataset, const std::filesystem::path& path) {
  dataset.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  constexpr std::size_t plane = kCifarSide * kCifarSide;
  std::vector<unsigned char> record(kCifarRecordBytes);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const Image& image = dataset.images[i];
    if (image.height() != kCifarSide || image.width() != kCifarSide || image.channels() != 3) {
      throw ConfigError("CIFAR-10 export requires 32x32x3 images");
    }
    record[0] = static_cast<unsigned char>(dataset.labels[i]);
    for (std::size_t ch = 0; ch < 3; ++ch) {
      for (std::size_t p = 0; p < plane; ++p) {
        const double v = image.tensor().at(p / kCifarSide, p % kCifarSide, ch);
        record[1 + ch * plane + p] = static_cast<unsigned char>(std::lround(v * 255.0));
      }
    }
    out.write(reinterpret_cast<const char*>(record.data()),
              static_cast<std::streamsize>(record.size()));
  }
  if (!out) throw IoError("failed writing " + path.string());
}

namespace {

constexpr double kSide = static_cast<double>(kCifarSide);

Tensor gradient_pattern(Rng& rng) {
  Tensor t({kCifarSide, kCifarSide, 3});
  const double angle = rng.uniform(0.0, std::numbers::pi / 2);
  const double dr = std::cos(angle), dc = std::sin(angle);
  double base[3], span[3];
  for (int ch = 0; ch < 3; ++ch) {
    base[ch] = rng.uniform(0.15, 0.35);
    span[ch] = rng.uniform(0.4, 0.6);
  }
  for (std::size_t r = 0; r < kCifarSide; ++r) {
    for (std::size_t c = 0; c < kCifarSide; ++c) {
      const double s = (dr * r + dc * c) / ((dr + dc) * (kSide - 1));
      for (std::size_t ch = 0; ch < 3; ++ch) t.at(r, c, ch) = base[ch] + span[ch] * s;
    }
  }
  return t;
}

Tensor stripe_pattern(Rng& rng) {
  Tensor t({kCifarSide, kCifarSide, 3});
  const double period = rng.uniform(4.0, 8.0);
  const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  double tint[3];
  for (double& v : tint) v = rng.uniform(0.4, 0.6);
  for (std::size_t r = 0; r < kCifarSide; ++r) {
    for (std::size_t c = 0; c < kCifarSide; ++c) {
      const double wave = 0.3 * std::sin(2.0 * std::numbers::pi * c / period + phase);
      for (std::size_t ch = 0; ch < 3; ++ch) t.at(r, c, ch) = tint[ch] + wave;
    }
  }
  return t;
}

Tensor disk_pattern(Rng& rng) {
  Tensor t({kCifarSide, kCifarSide, 3});
  const double radius = rng.uniform(8.0, 12.0);
  const double cr = 15.5 + rng.uniform(-3.0, 3.0);
  const double cc = 15.5 + rng.uniform(-3.0, 3.0);
  double inside[3], outside[3];
  for (int ch = 0; ch < 3; ++ch) {
    inside[ch] = rng.uniform(0.65, 0.85);
    outside[ch] = rng.uniform(0.2, 0.4);
  }
  for (std::size_t r = 0; r < kCifarSide; ++r) {
    for (std::size_t c = 0; c < kCifarSide; ++c) {
      const bool in = std::hypot(r - cr, c - cc) <= radius;
      for (std::size_t ch = 0; ch < 3; ++ch) t.at(r, c, ch) = in ? inside[ch] : outside[ch];
    }
  }
  return t;
}

}  // namespace

LabeledDataset make_synthetic_dataset(const SyntheticOptions& options) {
  Rng rng(options.seed);
  LabeledDataset dataset;
  dataset.num_classes = 3;
  for (std::size_t i = 0; i < options.count; ++i) {
    const int label = static_cast<int>(i % 3);
    Tensor pixels = label == 0 ? gradient_pattern(rng)
                    : label == 1 ? stripe_pattern(rng)
                                 : disk_pattern(rng);
    for (double& v : pixels.values()) v += options.noise_sigma * rng.normal();
    dataset.images.push_back(Image::from_clipped(std::move(pixels)));
    dataset.labels.push_back(label);
  }
  return dataset;
}

}  // namespace freqattack
