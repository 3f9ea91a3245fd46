#include "freqattack/wavelet.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "freqattack/errors.hpp"
#include "freqattack/io.hpp"

namespace freqattack {

WaveletFilter WaveletFilter::from_lowpass(std::string name, std::vector<double> lowpass) {
  const std::size_t length = lowpass.size();
  if (length < 2 || length % 2 != 0) throw ConfigError("wavelet filter length must be even");
  std::vector<double> highpass(length);
  for (std::size_t k = 0; k < length; ++k) {
    highpass[k] = (k % 2 == 0 ? 1.0 : -1.0) * lowpass[length - 1 - k];
  }
  return {std::move(name), std::move(lowpass), std::move(highpass)};
}

WaveletFilter haar() {
  const double h = 1.0 / std::sqrt(2.0);
  return WaveletFilter::from_lowpass("haar", {h, h});
}

WaveletFilter daubechies2() {
  const double s3 = std::sqrt(3.0);
  const double norm = 4.0 * std::sqrt(2.0);
  return WaveletFilter::from_lowpass(
      "db2", {(1 + s3) / norm, (3 + s3) / norm, (3 - s3) / norm, (1 - s3) / norm});
}

WaveletFilter daubechies4() {
  return WaveletFilter::from_lowpass(
      "db4", {0.2303778133088965, 0.7148465705529157, 0.6308807679298589,
              -0.027983769416859854, -0.18703481171909309, 0.030841381835560764,
              0.0328830116668852, -0.010597401785069032});
}

WaveletFilter filter_by_name(std::string_view name) {
  if (name == "haar") return haar();
  if (name == "db2") return daubechies2();
  if (name == "db4") return daubechies4();
  throw ConfigError("unknown wavelet filter '" + std::string(name) + "' (haar, db2, db4)");
}

std::pair<std::vector<double>, std::vector<double>> wpd_step_1d(std::span<const double> signal,
                                                                const WaveletFilter& filter) {
  const std::size_t n = signal.size();
  const std::size_t taps = filter.length();
  if (n % 2 != 0) throw ConfigError("wavelet step: signal length " + std::to_string(n) + " is odd");
  if (n < taps) {
    throw ConfigError("wavelet step: signal length " + std::to_string(n) +
                      " shorter than filter length " + std::to_string(taps));
  }
  std::vector<double> approx(n / 2, 0.0), detail(n / 2, 0.0);
  for (std::size_t k = 0; k < n / 2; ++k) {
    double a = 0.0, d = 0.0;
    for (std::size_t m = 0; m < taps; ++m) {
      const double s = signal[(2 * k + m) % n];
      a += filter.lowpass[m] * s;
      d += filter.highpass[m] * s;
    }
    approx[k] = a;
    detail[k] = d;
  }
  return {std::move(approx), std::move(detail)};
}

std::vector<double> iwpd_step_1d(std::span<const double> approx, std::span<const double> detail,
                                 const WaveletFilter& filter) {
  if (approx.size() != detail.size()) {
    throw ConfigError("inverse wavelet step: approx/detail length mismatch");
  }
  const std::size_t n = 2 * approx.size();
  const std::size_t taps = filter.length();
  if (n < taps) throw ConfigError("inverse wavelet step: signal shorter than filter");
  std::vector<double> signal(n, 0.0);
  for (std::size_t k = 0; k < approx.size(); ++k) {
    for (std::size_t m = 0; m < taps; ++m) {
      signal[(2 * k + m) % n] += filter.lowpass[m] * approx[k] + filter.highpass[m] * detail[k];
    }
  }
  return signal;
}

BandPath::BandPath(std::string path) : path_(std::move(path)) {
  if (path_.size() > static_cast<std::size_t>(kMaxDepth)) {
    throw ConfigError("band path '" + path_ + "' deeper than " + std::to_string(kMaxDepth));
  }
  if (!std::all_of(path_.begin(), path_.end(), [](char c) { return c == 'a' || c == 'd'; })) {
    throw ConfigError("band path '" + path_ + "' must use only 'a' and 'd'");
  }
}

BandPath BandPath::child(char filter) const { return BandPath(std::string(1, filter) + path_); }

std::vector<BandPath> band_paths(int depth) {
  std::vector<BandPath> level{BandPath()};
  for (int l = 0; l < depth; ++l) {
    std::vector<BandPath> next;
    for (const BandPath& parent : level) {
      next.push_back(parent.child('a'));
      next.push_back(parent.child('d'));
    }
    level = std::move(next);
  }
  return level;
}

std::size_t band_index(const BandPath& path) {
  std::size_t index = 0;
  for (std::size_t i = 0; i < path.depth(); ++i) {
    if (path.str()[i] == 'd') index |= std::size_t{1} << i;
  }
  return index;
}

namespace {

// Level l (1-based) transforms the width axis when odd, the height axis when even.
bool level_uses_width(int level) { return level % 2 == 1; }

}  // namespace

BandLayout BandLayout::for_image(const Shape& image_shape, int depth) {
  if (image_shape.size() != 3) throw ConfigError("wavelet: image must be H x W x C");
  if (depth < 0 || depth > kMaxDepth) {
    throw ConfigError("wavelet: depth must be in [0, " + std::to_string(kMaxDepth) + "]");
  }
  const std::size_t width_splits = static_cast<std::size_t>((depth + 1) / 2);
  const std::size_t height_splits = static_cast<std::size_t>(depth / 2);
  const std::size_t wdiv = std::size_t{1} << width_splits;
  const std::size_t hdiv = std::size_t{1} << height_splits;
  if (image_shape[1] % wdiv != 0 || image_shape[0] % hdiv != 0) {
    throw ConfigError("wavelet: depth " + std::to_string(depth) + " needs width divisible by " +
                      std::to_string(wdiv) + " and height divisible by " + std::to_string(hdiv) +
                      ", got " + std::to_string(image_shape[0]) + "x" +
                      std::to_string(image_shape[1]));
  }
  return {image_shape, depth, {image_shape[0] / hdiv, image_shape[1] / wdiv, image_shape[2]}};
}

BandTree::BandTree(BandLayout layout) : layout_(std::move(layout)) {
  bands_.assign(layout_.band_count(), Tensor(layout_.band_shape));
}

const Tensor& BandTree::band(const BandPath& path) const {
  if (path.depth() != static_cast<std::size_t>(layout_.depth)) {
    throw ConfigError("band '" + path.str() + "' does not exist at depth " +
                      std::to_string(layout_.depth));
  }
  return bands_[band_index(path)];
}

Tensor& BandTree::band(const BandPath& path) {
  return const_cast<Tensor&>(std::as_const(*this).band(path));
}

BandTree& BandTree::operator+=(const BandTree& other) {
  if (!(layout_ == other.layout_)) throw ConfigError("band tree layouts differ");
  for (std::size_t i = 0; i < bands_.size(); ++i) bands_[i] += other.bands_[i];
  return *this;
}

double BandTree::energy() const {
  double total = 0.0;
  for (const Tensor& t : bands_) total += squared_norm(t);
  return total;
}

namespace {

std::pair<Tensor, Tensor> split_band(const Tensor& parent, bool along_width,
                                     const WaveletFilter& filter) {
  const std::size_t h = parent.shape()[0], w = parent.shape()[1], c = parent.shape()[2];
  const Shape child_shape = along_width ? Shape{h, w / 2, c} : Shape{h / 2, w, c};
  Tensor low(child_shape), high(child_shape);
  const std::size_t lines = along_width ? h : w;
  const std::size_t length = along_width ? w : h;
  std::vector<double> signal(length);
  for (std::size_t line = 0; line < lines; ++line) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t i = 0; i < length; ++i) {
        signal[i] = along_width ? parent.at(line, i, ch) : parent.at(i, line, ch);
      }
      const auto [approx, detail] = wpd_step_1d(signal, filter);
      for (std::size_t i = 0; i < length / 2; ++i) {
        if (along_width) {
          low.at(line, i, ch) = approx[i];
          high.at(line, i, ch) = detail[i];
        } else {
          low.at(i, line, ch) = approx[i];
          high.at(i, line, ch) = detail[i];
        }
      }
    }
  }
  return {std::move(low), std::move(high)};
}

Tensor merge_bands(const Tensor& low, const Tensor& high, bool along_width,
                   const WaveletFilter& filter) {
  if (low.shape() != high.shape()) throw ConfigError("wavelet: inconsistent band shapes");
  const std::size_t h = low.shape()[0], w = low.shape()[1], c = low.shape()[2];
  Tensor parent(along_width ? Shape{h, 2 * w, c} : Shape{2 * h, w, c});
  const std::size_t lines = along_width ? h : w;
  const std::size_t half = along_width ? w : h;
  std::vector<double> approx(half), detail(half);
  for (std::size_t line = 0; line < lines; ++line) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t i = 0; i < half; ++i) {
        approx[i] = along_width ? low.at(line, i, ch) : low.at(i, line, ch);
        detail[i] = along_width ? high.at(line, i, ch) : high.at(i, line, ch);
      }
      const std::vector<double> signal = iwpd_step_1d(approx, detail, filter);
      for (std::size_t i = 0; i < 2 * half; ++i) {
        if (along_width) {
          parent.at(line, i, ch) = signal[i];
        } else {
          parent.at(i, line, ch) = signal[i];
        }
      }
    }
  }
  return parent;
}

}  // namespace

BandTree decompose_image(const Tensor& image, const WaveletFilter& filter, int depth) {
  if (depth < 1) throw ConfigError("wavelet: decomposition depth must be at least 1");
  return decompose_to_depth(image, filter, depth);
}

BandTree decompose_to_depth(const Tensor& image, const WaveletFilter& filter, int depth) {
  BandTree tree(BandLayout::for_image(image.shape(), depth));
  std::vector<Tensor> level{image};
  for (int l = 1; l <= depth; ++l) {
    std::vector<Tensor> next;
    next.reserve(level.size() * 2);
    for (const Tensor& parent : level) {
      auto [low, high] = split_band(parent, level_uses_width(l), filter);
      next.push_back(std::move(low));
      next.push_back(std::move(high));
    }
    level = std::move(next);
  }
  tree.bands() = std::move(level);
  return tree;
}

Tensor reconstruct_image(const BandTree& tree, const WaveletFilter& filter) {
  const BandLayout& layout = tree.layout();
  if (tree.bands().size() != layout.band_count()) {
    throw ConfigError("wavelet: band tree has wrong band count");
  }
  for (const Tensor& band : tree.bands()) {
    if (band.shape() != layout.band_shape) throw ConfigError("wavelet: inconsistent band shapes");
  }
  // Tree order keeps siblings adjacent, so each level merges pairs (2i, 2i+1).
  std::vector<Tensor> level = tree.bands();
  for (int l = layout.depth; l >= 1; --l) {
    std::vector<Tensor> parents;
    parents.reserve(level.size() / 2);
    for (std::size_t i = 0; i < level.size(); i += 2) {
      parents.push_back(merge_bands(level[i], level[i + 1], level_uses_width(l), filter));
    }
    level = std::move(parents);
  }
  return std::move(level.front());
}

Tensor basis_image(const BandLayout& layout, const BandPath& band, std::size_t coordinate,
                   const WaveletFilter& filter) {
  BandTree tree(layout);
  Tensor& target = tree.band(band);
  if (coordinate >= target.size()) {
    throw ConfigError("basis image: coordinate " + std::to_string(coordinate) +
                      " out of range for band of size " + std::to_string(target.size()));
  }
  target[coordinate] = 1.0;
  return reconstruct_image(tree, filter);
}

void save_band_tree(const BandTree& tree, const std::string& filter_name,
                    const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<BandPath> paths = band_paths(tree.depth());
  std::sort(paths.begin(), paths.end());
  nlohmann::json bands = nlohmann::json::array();
  for (const BandPath& path : paths) {
    const std::string file = "band_" + path.str() + ".tensor";
    save_tensor(tree.band(path), dir / file);
    bands.push_back({{"path", path.str()}, {"file", file}});
  }
  const nlohmann::json manifest = {{"depth", tree.depth()},
                                   {"filter", filter_name},
                                   {"image_shape", tree.layout().image_shape},
                                   {"band_shape", tree.layout().band_shape},
                                   {"bands", bands}};
  write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

LoadedBandTree load_band_tree(const std::filesystem::path& dir) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_text_file(dir / "manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("band manifest: " + std::string(e.what()));
  }
  try {
    const BandLayout layout =
        BandLayout::for_image(manifest.at("image_shape").get<Shape>(), manifest.at("depth").get<int>());
    BandTree tree(layout);
    const auto& bands = manifest.at("bands");
    if (bands.size() != layout.band_count()) throw IoError("band manifest: wrong band count");
    for (const auto& entry : bands) {
      Tensor values = load_tensor(dir / entry.at("file").get<std::string>());
      if (values.shape() != layout.band_shape) {
        throw IoError("band manifest: inconsistent shape for band " + entry.at("path").get<std::string>());
      }
      tree.band(BandPath(entry.at("path").get<std::string>())) = std::move(values);
    }
    return {std::move(tree), manifest.at("filter").get<std::string>()};
  } catch (const nlohmann::json::exception& e) {
    throw IoError("band manifest: " + std::string(e.what()));
  }
}

}  // namespace freqattack
