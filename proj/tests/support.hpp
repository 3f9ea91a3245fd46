#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <unistd.h>

#include "freqattack/dataset.hpp"
#include "freqattack/model.hpp"
#include "freqattack/rng.hpp"
#include "freqattack/tensor.hpp"

namespace testsupport {

using namespace freqattack;

inline Tensor random_tensor(Rng& rng, Shape shape, double lo = 0.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

inline Image random_image(Rng& rng, std::size_t h = 32, std::size_t w = 32, std::size_t c = 3) {
  return Image(random_tensor(rng, {h, w, c}));
}

// Unique scratch directory, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("freqattack_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// The standard desk-scale setup: 300 synthetic training images, MLP trained
// with default options. Built once per process.
struct TrainedSetup {
  LabeledDataset train_set;
  std::shared_ptr<const MlpClassifier> model;
  double train_accuracy = 0.0;
};

inline const TrainedSetup& trained_setup() {
  static const TrainedSetup setup = [] {
    TrainedSetup s;
    s.train_set = make_synthetic_dataset({300, 1, 0.05});
    MlpClassifier model =
        MlpClassifier::initialized(s.train_set.images.front().tensor().shape(), 3, 3);
    Rng rng(Rng::derive_seed(3, 0));
    s.train_accuracy = train(model, s.train_set, {}, rng).train_accuracy;
    s.model = std::make_shared<const MlpClassifier>(std::move(model));
    return s;
  }();
  return setup;
}

// ---- Reference wavelet packet transform ---------------------------------
// Written independently of the library: explicit analysis matrices applied
// with plain loops, bands kept in a map keyed by path.

using Matrix = std::vector<std::vector<double>>;

inline Matrix analysis_matrix(const std::vector<double>& p, std::size_t n) {
  const std::size_t len = p.size();
  std::vector<double> q(len);
  for (std::size_t k = 0; k < len; ++k) q[k] = ((k % 2) ? -1.0 : 1.0) * p[len - 1 - k];
  Matrix a(n, std::vector<double>(n, 0.0));
  for (std::size_t k = 0; k < n / 2; ++k) {
    for (std::size_t m = 0; m < len; ++m) {
      a[k][(2 * k + m) % n] += p[m];
      a[n / 2 + k][(2 * k + m) % n] += q[m];
    }
  }
  return a;
}

struct RefBand {
  std::size_t h, w, c;
  std::vector<double> v;  // row-major h x w x c
  double& at(std::size_t r, std::size_t col, std::size_t ch) { return v[(r * w + col) * c + ch]; }
  double at(std::size_t r, std::size_t col, std::size_t ch) const { return v[(r * w + col) * c + ch]; }
};

// Splits along width (axis 1) or height (axis 0) into low and high halves.
inline std::pair<RefBand, RefBand> ref_split(const RefBand& in, const std::vector<double>& p, int axis) {
  const std::size_t n = axis == 1 ? in.w : in.h;
  const Matrix a = analysis_matrix(p, n);
  RefBand lo{axis == 1 ? in.h : in.h / 2, axis == 1 ? in.w / 2 : in.w, in.c, {}};
  lo.v.assign(lo.h * lo.w * lo.c, 0.0);
  RefBand hi = lo;
  for (std::size_t r = 0; r < lo.h; ++r) {
    for (std::size_t col = 0; col < lo.w; ++col) {
      for (std::size_t ch = 0; ch < in.c; ++ch) {
        const std::size_t k = axis == 1 ? col : r;
        double sl = 0.0, sh = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double x = axis == 1 ? in.at(r, i, ch) : in.at(i, col, ch);
          sl += a[k][i] * x;
          sh += a[n / 2 + k][i] * x;
        }
        lo.at(r, col, ch) = sl;
        hi.at(r, col, ch) = sh;
      }
    }
  }
  return {lo, hi};
}

// Bands of exactly `depth` levels; level l splits width when l is odd and
// height when l is even, and the new filter letter goes in front.
inline std::map<std::string, RefBand> ref_decompose(const Tensor& image, const std::vector<double>& p,
                                                    int depth) {
  const Shape& s = image.shape();
  std::map<std::string, RefBand> bands{{"", RefBand{s[0], s[1], s[2], image.data()}}};
  for (int level = 1; level <= depth; ++level) {
    std::map<std::string, RefBand> next;
    for (const auto& [path, band] : bands) {
      auto [lo, hi] = ref_split(band, p, level % 2 == 1 ? 1 : 0);
      next["a" + path] = std::move(lo);
      next["d" + path] = std::move(hi);
    }
    bands = std::move(next);
  }
  return bands;
}

inline double ref_cosine(const std::vector<double>& f, const std::vector<double>& g) {
  double fg = 0.0, ff = 0.0, gg = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    fg += f[i] * g[i];
    ff += f[i] * f[i];
    gg += g[i] * g[i];
  }
  if (ff == 0.0 && gg == 0.0) return 1.0;
  if (ff == 0.0 || gg == 0.0) return 0.0;
  return std::abs(fg) / (std::sqrt(ff) * std::sqrt(gg));
}

}  // namespace testsupport
