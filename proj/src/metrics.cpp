#include "freqattack/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "freqattack/errors.hpp"

namespace freqattack {

void NdvConfig::validate() const {
  if (!(scale > 0.0)) throw ConfigError("ndv: C must be positive");
  if (!(eps > 0.0)) throw ConfigError("ndv: eps must be positive");
  if (!(zero_threshold >= 0.0)) throw ConfigError("ndv: zero threshold must be nonnegative");
}

double cosine_similarity(const Tensor& f, const Tensor& g) {
  if (f.shape() != g.shape()) throw ConfigError("cosine similarity: shape mismatch");
  const double nf = std::sqrt(squared_norm(f));
  const double ng = std::sqrt(squared_norm(g));
  if (nf == 0.0 && ng == 0.0) return 1.0;
  if (nf == 0.0 || ng == 0.0) return 0.0;
  return std::min(1.0, std::abs(dot(f, g)) / (nf * ng));
}

LpNorms lp_metrics(const Tensor& x, const Tensor& x_adv, double zero_threshold) {
  if (x.shape() != x_adv.shape()) throw ConfigError("lp metrics: shape mismatch");
  LpNorms norms;
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double diff = std::abs(x[i] - x_adv[i]);
    sum_sq += diff * diff;
    norms.linf = std::max(norms.linf, diff);
    if (diff > zero_threshold) norms.l0 += 1.0;
  }
  norms.l2 = std::sqrt(sum_sq);
  return norms;
}

double ndv(const Tensor& x, const Tensor& x_adv, const NdvConfig& cfg) {
  cfg.validate();
  const LpNorms norms = lp_metrics(x, x_adv, cfg.zero_threshold);
  return cfg.scale * norms.l2 / (norms.l0 + cfg.eps);
}

namespace {

std::vector<double> gaussian_window_1d() {
  constexpr double sigma = 1.5;
  std::vector<double> w(kSsimWindow);
  const double center = (kSsimWindow - 1) / 2.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < kSsimWindow; ++i) {
    const double d = i - center;
    w[i] = std::exp(-d * d / (2 * sigma * sigma));
    sum += w[i];
  }
  for (double& v : w) v /= sum;
  return w;
}

// Separable "valid" filtering of one channel plane.
std::vector<double> filter_valid(const std::vector<double>& plane, std::size_t h, std::size_t w,
                                 const std::vector<double>& win) {
  const std::size_t oh = h - kSsimWindow + 1, ow = w - kSsimWindow + 1;
  std::vector<double> rows(h * ow, 0.0);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < ow; ++c) {
      double s = 0.0;
      for (std::size_t k = 0; k < kSsimWindow; ++k) s += win[k] * plane[r * w + c + k];
      rows[r * ow + c] = s;
    }
  }
  std::vector<double> out(oh * ow, 0.0);
  for (std::size_t r = 0; r < oh; ++r) {
    for (std::size_t c = 0; c < ow; ++c) {
      double s = 0.0;
      for (std::size_t k = 0; k < kSsimWindow; ++k) s += win[k] * rows[(r + k) * ow + c];
      out[r * ow + c] = s;
    }
  }
  return out;
}

}  // namespace

double ssim(const Tensor& x, const Tensor& y) {
  if (x.shape() != y.shape()) throw ConfigError("ssim: shape mismatch");
  if (x.rank() != 3) throw ConfigError("ssim: expected H x W x C");
  const std::size_t h = x.shape()[0], w = x.shape()[1], channels = x.shape()[2];
  if (h < kSsimWindow || w < kSsimWindow) {
    throw ConfigError("ssim: image smaller than the 11x11 window");
  }
  constexpr double c1 = 0.01 * 0.01;
  constexpr double c2 = 0.03 * 0.03;
  const std::vector<double> win = gaussian_window_1d();

  double total = 0.0;
  std::vector<double> px(h * w), py(h * w), pxx(h * w), pyy(h * w), pxy(h * w);
  for (std::size_t ch = 0; ch < channels; ++ch) {
    for (std::size_t i = 0; i < h * w; ++i) {
      px[i] = x[i * channels + ch];
      py[i] = y[i * channels + ch];
      pxx[i] = px[i] * px[i];
      pyy[i] = py[i] * py[i];
      pxy[i] = px[i] * py[i];
    }
    const auto mx = filter_valid(px, h, w, win), my = filter_valid(py, h, w, win);
    const auto sxx = filter_valid(pxx, h, w, win), syy = filter_valid(pyy, h, w, win);
    const auto sxy = filter_valid(pxy, h, w, win);
    double sum = 0.0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double var_x = sxx[i] - mx[i] * mx[i];
      const double var_y = syy[i] - my[i] * my[i];
      const double cov = sxy[i] - mx[i] * my[i];
      const double num = (2 * mx[i] * my[i] + c1) * (2 * cov + c2);
      const double den = (mx[i] * mx[i] + my[i] * my[i] + c1) * (var_x + var_y + c2);
      // Identical windows give exactly 1 regardless of rounding in the moments.
      sum += num == den ? 1.0 : num / den;
    }
    total += sum / static_cast<double>(mx.size());
  }
  return total / static_cast<double>(channels);
}

PairMetrics pair_metrics(const Image& x, const Image& x_adv, const NdvConfig& cfg) {
  cfg.validate();
  const LpNorms norms = lp_metrics(x.tensor(), x_adv.tensor(), cfg.zero_threshold);
  PairMetrics m;
  m.l2 = norms.l2;
  m.linf = norms.linf;
  m.l0 = norms.l0;
  m.ndv = cfg.scale * norms.l2 / (norms.l0 + cfg.eps);
  m.ssim = ssim(x.tensor(), x_adv.tensor());
  return m;
}

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  if (values.size() % 2 == 1) return values[mid];
  return 0.5 * (values[mid - 1] + values[mid]);
}

namespace {

double mean(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

}  // namespace

AggregateReport aggregate(const std::vector<AttackOutcome>& outcomes, QueryStatMode mode) {
  if (outcomes.empty()) throw ConfigError("aggregate: no attack outcomes");
  AggregateReport report;
  report.mode = mode;
  report.attempted = outcomes.size();
  std::vector<double> success_queries, all_queries;
  PairMetrics sum{0, 0, 0, 0, 0};
  for (const AttackOutcome& o : outcomes) {
    all_queries.push_back(static_cast<double>(o.queries));
    if (!o.success) continue;
    ++report.succeeded;
    success_queries.push_back(static_cast<double>(o.queries));
    sum.l2 += o.metrics.l2;
    sum.linf += o.metrics.linf;
    sum.l0 += o.metrics.l0;
    sum.ssim += o.metrics.ssim;
    sum.ndv += o.metrics.ndv;
  }
  report.asr = static_cast<double>(report.succeeded) / static_cast<double>(report.attempted);
  report.anq_successes = mean(success_queries);
  report.mnq_successes = median(success_queries);
  report.anq_all = mean(all_queries);
  report.mnq_all = median(all_queries);
  report.anq = mode == QueryStatMode::kSuccessesOnly ? report.anq_successes : report.anq_all;
  report.mnq = mode == QueryStatMode::kSuccessesOnly ? report.mnq_successes : report.mnq_all;
  if (report.succeeded > 0) {
    const double n = static_cast<double>(report.succeeded);
    report.mean_metrics = {sum.l2 / n, sum.linf / n, sum.l0 / n, sum.ssim / n, sum.ndv / n};
  }
  return report;
}

std::string to_string(QueryStatMode mode) {
  return mode == QueryStatMode::kSuccessesOnly ? "successes-only" : "all-attempted";
}

}  // namespace freqattack
