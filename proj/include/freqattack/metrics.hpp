#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "freqattack/tensor.hpp"

namespace freqattack {

struct NdvConfig {
  double scale = 1000.0;          // C
  double eps = 1e-8;              // denominator stabilizer
  double zero_threshold = 1e-9;   // |diff| above this counts toward L0

  void validate() const;
};

struct PairMetrics {
  double l2 = 0.0;
  double linf = 0.0;
  double l0 = 0.0;
  double ssim = 1.0;
  double ndv = 0.0;
};

// |<f, g>| / (||f|| ||g||). One zero vector gives 0; both zero gives 1.
double cosine_similarity(const Tensor& f, const Tensor& g);

struct LpNorms {
  double l2 = 0.0;
  double linf = 0.0;
  double l0 = 0.0;
};
LpNorms lp_metrics(const Tensor& x, const Tensor& x_adv, double zero_threshold = 1e-9);

// Normalized disturbance visibility: C * ||x - x_adv||_2 / (||x - x_adv||_0 + eps).
double ndv(const Tensor& x, const Tensor& x_adv, const NdvConfig& cfg = {});

// Mean SSIM over all fully-contained 11x11 Gaussian windows (sigma 1.5),
// K1 = 0.01, K2 = 0.03, dynamic range 1, averaged over channels.
inline constexpr std::size_t kSsimWindow = 11;
double ssim(const Tensor& x, const Tensor& y);

PairMetrics pair_metrics(const Image& x, const Image& x_adv, const NdvConfig& cfg = {});

// Per-example attack outcome as seen by the aggregator.
struct AttackOutcome {
  bool success = false;
  std::size_t queries = 0;
  PairMetrics metrics;  // meaningful only for successes
};

enum class QueryStatMode { kSuccessesOnly, kAllAttempted };

struct AggregateReport {
  std::size_t attempted = 0;
  std::size_t succeeded = 0;
  double asr = 0.0;
  // The headline anq/mnq follow `mode`; both conventions are kept.
  QueryStatMode mode = QueryStatMode::kSuccessesOnly;
  double anq = 0.0;
  double mnq = 0.0;
  double anq_successes = 0.0;
  double mnq_successes = 0.0;
  double anq_all = 0.0;
  double mnq_all = 0.0;
  PairMetrics mean_metrics;  // over successes
};

AggregateReport aggregate(const std::vector<AttackOutcome>& outcomes,
                          QueryStatMode mode = QueryStatMode::kSuccessesOnly);

double median(std::vector<double> values);

std::string to_string(QueryStatMode mode);

}  // namespace freqattack
