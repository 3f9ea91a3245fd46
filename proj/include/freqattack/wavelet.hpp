#pragma once

// Orthonormal wavelet packet decomposition of images into a binary band tree.
//
// Each level splits every band of the previous level into a low-pass ('a')
// and a high-pass ('d') child along one axis: width at odd levels, height at
// even levels. After n levels there are 2^n bands. A band is named by the
// filters on its path with the newest level prepended, so "da" is the
// high-pass child of "a" and "daa" is the high-pass child of "aa". The last
// character is the level-1 filter.
//
// Filters are orthonormal and boundaries are periodic, so the transform is
// an orthogonal change of basis: energy is preserved and every
// (band, coordinate) pair has a unit-norm, mutually orthogonal basis image.

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "freqattack/tensor.hpp"

namespace freqattack {

struct WaveletFilter {
  std::string name;
  std::vector<double> lowpass;
  std::vector<double> highpass;

  std::size_t length() const { return lowpass.size(); }

  // Builds the quadrature-mirror high-pass q_k = (-1)^k p_{L-1-k}.
  static WaveletFilter from_lowpass(std::string name, std::vector<double> lowpass);
};

WaveletFilter haar();
WaveletFilter daubechies2();
WaveletFilter daubechies4();
// "haar", "db2" or "db4"; throws ConfigError otherwise.
WaveletFilter filter_by_name(std::string_view name);

// One analysis step with periodic extension:
//   approx[k] = sum_m lowpass[m]  * signal[(2k + m) mod N]
//   detail[k] = sum_m highpass[m] * signal[(2k + m) mod N]
// Requires N even and N >= filter length.
std::pair<std::vector<double>, std::vector<double>> wpd_step_1d(std::span<const double> signal,
                                                                const WaveletFilter& filter);

// Exact inverse (adjoint) of wpd_step_1d.
std::vector<double> iwpd_step_1d(std::span<const double> approx, std::span<const double> detail,
                                 const WaveletFilter& filter);

// Validated string over {a, d}.
class BandPath {
 public:
  BandPath() = default;
  explicit BandPath(std::string path);

  const std::string& str() const { return path_; }
  std::size_t depth() const { return path_.size(); }
  // Child path one level deeper; the new filter is prepended.
  BandPath child(char filter) const;

  auto operator<=>(const BandPath&) const = default;

 private:
  std::string path_;
};

inline constexpr int kMaxDepth = 3;

// All 2^depth band paths in tree order: the two children of each parent are
// adjacent, parents in the order of the previous level (aa, da, ad, dd, ...).
std::vector<BandPath> band_paths(int depth);

// Position of `path` within band_paths(path.depth()).
std::size_t band_index(const BandPath& path);

struct BandLayout {
  Shape image_shape;  // H x W x C
  int depth = 0;
  Shape band_shape;  // identical for every band

  // Throws ConfigError on indivisible dimensions or depth outside [0, kMaxDepth].
  // Depth 0 is the identity transform: one band "" holding the pixels.
  static BandLayout for_image(const Shape& image_shape, int depth);

  std::size_t band_count() const { return std::size_t{1} << depth; }
  std::size_t band_size() const { return shape_size(band_shape); }
  bool operator==(const BandLayout&) const = default;
};

class BandTree {
 public:
  BandTree() = default;
  // All-zero tree.
  explicit BandTree(BandLayout layout);

  const BandLayout& layout() const { return layout_; }
  int depth() const { return layout_.depth; }

  const Tensor& band(const BandPath& path) const;
  Tensor& band(const BandPath& path);
  // Bands in band_paths() order.
  const std::vector<Tensor>& bands() const { return bands_; }
  std::vector<Tensor>& bands() { return bands_; }

  BandTree& operator+=(const BandTree& other);
  friend BandTree operator+(BandTree lhs, const BandTree& rhs) { return lhs += rhs; }

  double energy() const;

 private:
  BandLayout layout_;
  std::vector<Tensor> bands_;
};

// Requires depth >= 1.
BandTree decompose_image(const Tensor& image, const WaveletFilter& filter, int depth);
// Same transform but also accepts depth 0, which yields the pixel basis.
BandTree decompose_to_depth(const Tensor& image, const WaveletFilter& filter, int depth);
inline BandTree decompose_image(const Image& image, const WaveletFilter& filter, int depth) {
  return decompose_image(image.tensor(), filter, depth);
}

// Left inverse of decompose_image. The result is not clipped.
Tensor reconstruct_image(const BandTree& tree, const WaveletFilter& filter);

// Image-space vector of one coefficient direction: the reconstruction of a
// zero tree with a single 1 at `coordinate` (flat row-major index into the
// band tensor). Has unit L2 norm.
Tensor basis_image(const BandLayout& layout, const BandPath& band, std::size_t coordinate,
                   const WaveletFilter& filter);

// Directory holding manifest.json plus one raw tensor file per band, bands
// listed in lexicographic path order.
void save_band_tree(const BandTree& tree, const std::string& filter_name,
                    const std::filesystem::path& dir);
struct LoadedBandTree {
  BandTree tree;
  std::string filter_name;
};
LoadedBandTree load_band_tree(const std::filesystem::path& dir);

}  // namespace freqattack
