#pragma once

// Score-based black-box attack that searches along orthonormal wavelet packet
// directions. Each iteration picks a band from the selected set according to
// adaptive weights, draws n unused coefficients of that band, and tries the
// step +eps, then -eps, on those coefficients. A trial is accepted only if the
// true-class probability strictly decreases. Coefficients are never reused,
// so accepted steps never cancel each other; the accumulated coefficient
// perturbation is delta_T = sum of accepted alpha_t * q_t.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "freqattack/errors.hpp"
#include "freqattack/metrics.hpp"
#include "freqattack/oracle.hpp"
#include "freqattack/rng.hpp"
#include "freqattack/wavelet.hpp"

namespace freqattack {

enum class AttackMode {
  kFrequency,      // wavelet packet coefficients of the selected bands
  kPixelBaseline,  // identity pixel basis, one band ""
};

enum class TrialOrder {
  kShortCircuit,  // try +eps, and -eps only if +eps was not accepted
  kBothSigns,     // query both signs, accept the better one
};

// Band weight update. Accepted step: w += gamma * drop. Discarded step:
// w = max(beta * w, w_min). Weights are normalized when sampling.
struct ProbabilityUpdate {
  double gamma = 10.0;
  double beta = 0.9;
  double w_min = 0.05;
};

struct AttackConfig {
  double epsilon = 1.5;
  std::size_t n = 4;
  std::vector<BandPath> bands{BandPath("aaa"), BandPath("daa"), BandPath("dad")};
  int depth = 3;
  std::string filter = "haar";
  std::size_t max_queries = 5000;
  ProbabilityUpdate prob_update;
  AttackMode mode = AttackMode::kFrequency;
  TrialOrder trial_order = TrialOrder::kShortCircuit;

  void validate() const;
  // Bands actually searched: `bands` in frequency mode, {""} in pixel mode.
  std::vector<BandPath> search_bands() const;
  int search_depth() const { return mode == AttackMode::kFrequency ? depth : 0; }
};

struct Direction {
  std::size_t slot = 0;  // index into the sampler's band list
  BandPath band;
  std::vector<std::size_t> coordinates;
  double alpha = 0.0;
};

class BandSampler {
 public:
  BandSampler(std::vector<BandPath> bands, std::size_t band_size, ProbabilityUpdate rule);

  const std::vector<BandPath>& bands() const { return bands_; }
  const std::vector<double>& weights() const { return weights_; }
  // Normalized weights; exhausted bands get probability 0.
  std::vector<double> probabilities() const;
  std::size_t remaining(std::size_t slot) const { return unused_[slot].size(); }
  bool exhausted() const;

  // Draws a band by probabilities() and min(n, remaining) distinct unused
  // coordinates of it. The coordinates stay pending until resolve().
  Direction propose(std::size_t n, Rng& rng);
  // Marks the pending coordinates used.
  void resolve();

  // drop > 0 counts as accepted, anything else as discarded.
  void update(std::size_t slot, double confidence_drop);

 private:
  std::vector<BandPath> bands_;
  ProbabilityUpdate rule_;
  std::vector<double> weights_;
  std::vector<std::vector<std::size_t>> unused_;
  std::size_t pending_slot_ = 0;
  std::size_t pending_count_ = 0;
};

// Coefficient perturbation after adding alpha at the direction's coordinates.
BandTree stepped_delta(const BandTree& delta, const Direction& direction);

// clip01(reconstruct(base + delta)), plus the unclipped reconstruction.
struct RenderedImage {
  Tensor unclipped;
  Image image;
};
RenderedImage render(const BandTree& base, const BandTree& delta, const WaveletFilter& filter);

// Candidate image clip01(reconstruct(base + delta + alpha * q)); base and
// delta are not modified.
Image apply_step(const BandTree& base, const BandTree& delta, const Direction& direction,
                 const WaveletFilter& filter);

struct TrialRecord {
  std::size_t iteration = 0;
  std::string band;
  std::vector<std::size_t> coordinates;
  double alpha = 0.0;
  double confidence = 0.0;   // true-class probability of the candidate
  bool accepted = false;
  std::uint64_t queries = 0;  // cumulative, including the initial check
};

enum class AttackStatus { kSuccess, kBudgetExhausted, kCoordinatesExhausted };
std::string to_string(AttackStatus status);

struct AttackResult {
  AttackStatus status = AttackStatus::kBudgetExhausted;
  bool success = false;
  Image adversarial;
  std::uint64_t queries = 0;
  double initial_confidence = 0.0;
  double final_confidence = 0.0;
  int final_label = -1;
  BandTree delta;
  std::vector<TrialRecord> trials;
  PairMetrics metrics;

  std::vector<TrialRecord> accepted_steps() const;
};

// Oracle failure in the middle of a run; carries the state reached so far.
class AttackInterrupted : public OracleError {
 public:
  AttackInterrupted(const OracleError& cause, std::shared_ptr<const AttackResult> partial)
      : OracleError(cause.kind(), cause.what()), partial_(std::move(partial)) {}
  const AttackResult& partial() const { return *partial_; }

 private:
  std::shared_ptr<const AttackResult> partial_;
};

// The oracle's first answer disagrees with the given label.
class MisclassifiedInput : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

// Requires the oracle to classify x as `label` (checked with the first,
// billed query). Budget exhaustion and running out of coordinates are
// reported through the result status, not by exceptions.
AttackResult run_attack(const Image& x, int label, Oracle& oracle, const AttackConfig& cfg,
                        Rng& rng, const NdvConfig& ndv_cfg = {});

// JSON lines: one "initial" record, then one record per trial.
void write_trace(std::ostream& out, const AttackResult& result);

std::string band_label(const BandPath& band);

}  // namespace freqattack
