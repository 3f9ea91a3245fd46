#include "freqattack/attack.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>
#include <set>

#include <json.hpp>

namespace freqattack {

void AttackConfig::validate() const {
  if (!(epsilon > 0.0)) throw ConfigError("attack: epsilon must be positive");
  if (n < 1) throw ConfigError("attack: n must be at least 1");
  if (max_queries < 1) throw ConfigError("attack: query budget must be at least 1");
  if (!(prob_update.gamma >= 0.0) || !(prob_update.beta > 0.0 && prob_update.beta <= 1.0) ||
      !(prob_update.w_min > 0.0)) {
    throw ConfigError("attack: need gamma >= 0, 0 < beta <= 1, w_min > 0");
  }
  filter_by_name(filter);
  if (mode == AttackMode::kPixelBaseline) return;
  if (depth < 1 || depth > kMaxDepth) throw ConfigError("attack: depth must be in [1, 3]");
  if (bands.empty()) throw ConfigError("attack: no bands selected");
  std::set<BandPath> seen;
  for (const BandPath& band : bands) {
    if (band.depth() != static_cast<std::size_t>(depth)) {
      throw ConfigError("attack: band '" + band.str() + "' does not match depth " +
                        std::to_string(depth));
    }
    if (!seen.insert(band).second) throw ConfigError("attack: duplicate band '" + band.str() + "'");
  }
}

std::vector<BandPath> AttackConfig::search_bands() const {
  if (mode == AttackMode::kPixelBaseline) return {BandPath()};
  return bands;
}

std::string band_label(const BandPath& band) { return band.depth() == 0 ? "pixel" : band.str(); }

BandSampler::BandSampler(std::vector<BandPath> bands, std::size_t band_size, ProbabilityUpdate rule)
    : bands_(std::move(bands)), rule_(rule), weights_(bands_.size(), 1.0) {
  if (bands_.empty()) throw ConfigError("band sampler: no bands");
  unused_.resize(bands_.size());
  for (auto& pool : unused_) {
    pool.resize(band_size);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
  }
}

bool BandSampler::exhausted() const {
  return std::all_of(unused_.begin(), unused_.end(), [](const auto& pool) { return pool.empty(); });
}

std::vector<double> BandSampler::probabilities() const {
  std::vector<double> probs(bands_.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < bands_.size(); ++i) {
    if (!unused_[i].empty()) total += weights_[i];
  }
  if (total <= 0.0) return probs;
  for (std::size_t i = 0; i < bands_.size(); ++i) {
    if (!unused_[i].empty()) probs[i] = weights_[i] / total;
  }
  return probs;
}

Direction BandSampler::propose(std::size_t n, Rng& rng) {
  if (exhausted()) throw ConfigError("band sampler: every band is exhausted");
  const std::vector<double> probs = probabilities();
  const double u = rng.uniform();
  std::size_t slot = 0;
  double cumulative = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] == 0.0) continue;
    slot = i;
    cumulative += probs[i];
    if (u < cumulative) break;
  }

  // Partial Fisher-Yates: the chosen coordinates end up at the pool's tail.
  auto& pool = unused_[slot];
  const std::size_t count = std::min(n, pool.size());
  Direction direction;
  direction.slot = slot;
  direction.band = bands_[slot];
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t last = pool.size() - 1 - i;
    std::swap(pool[rng.below(last + 1)], pool[last]);
    direction.coordinates.push_back(pool[last]);
  }
  pending_slot_ = slot;
  pending_count_ = count;
  return direction;
}

void BandSampler::resolve() {
  auto& pool = unused_[pending_slot_];
  pool.resize(pool.size() - pending_count_);
  pending_count_ = 0;
}

void BandSampler::update(std::size_t slot, double confidence_drop) {
  double& w = weights_.at(slot);
  if (confidence_drop > 0.0) {
    w += rule_.gamma * confidence_drop;
  } else {
    w = std::max(rule_.beta * w, rule_.w_min);
  }
}

BandTree stepped_delta(const BandTree& delta, const Direction& direction) {
  BandTree next = delta;
  Tensor& band = next.band(direction.band);
  for (std::size_t c : direction.coordinates) {
    if (c >= band.size()) throw ConfigError("direction coordinate out of range");
    band[c] += direction.alpha;
  }
  return next;
}

RenderedImage render(const BandTree& base, const BandTree& delta, const WaveletFilter& filter) {
  Tensor unclipped = reconstruct_image(base + delta, filter);
  Image image = Image::from_clipped(unclipped);
  return {std::move(unclipped), std::move(image)};
}

Image apply_step(const BandTree& base, const BandTree& delta, const Direction& direction,
                 const WaveletFilter& filter) {
  return render(base, stepped_delta(delta, direction), filter).image;
}

std::string to_string(AttackStatus status) {
  switch (status) {
    case AttackStatus::kSuccess: return "success";
    case AttackStatus::kBudgetExhausted: return "budget-exhausted";
    case AttackStatus::kCoordinatesExhausted: return "coordinates-exhausted";
  }
  return "unknown";
}

std::vector<TrialRecord> AttackResult::accepted_steps() const {
  std::vector<TrialRecord> steps;
  for (const TrialRecord& t : trials) {
    if (t.accepted) steps.push_back(t);
  }
  return steps;
}

namespace {

struct Trial {
  Direction direction;
  BandTree delta;
  Image image;
  std::vector<double> probs;
};

}  // namespace

AttackResult run_attack(const Image& x, int label, Oracle& oracle, const AttackConfig& cfg,
                        Rng& rng, const NdvConfig& ndv_cfg) {
  cfg.validate();
  if (label < 0 || label >= oracle.num_classes()) throw ConfigError("attack: label out of range");
  const WaveletFilter filter = filter_by_name(cfg.filter);
  const BandTree base = decompose_to_depth(x.tensor(), filter, cfg.search_depth());
  const auto y = static_cast<std::size_t>(label);

  auto result = std::make_shared<AttackResult>();
  result->delta = BandTree(base.layout());
  result->adversarial = x;
  const std::uint64_t start = oracle.queries();
  const auto used = [&] { return oracle.queries() - start; };
  const auto finish = [&](AttackStatus status) {
    result->status = status;
    result->success = status == AttackStatus::kSuccess;
    result->queries = used();
    result->metrics = pair_metrics(x, result->adversarial, ndv_cfg);
    return *result;
  };

  std::vector<double> probs;
  try {
    probs = oracle.query(x);
  } catch (const OracleError& e) {
    throw AttackInterrupted(e, result);
  }
  if (predicted_label(probs) != label) {
    throw MisclassifiedInput("attack: the oracle does not classify the input as label " +
                      std::to_string(label));
  }
  double confidence = probs[y];
  result->initial_confidence = confidence;
  result->final_confidence = confidence;
  result->final_label = label;

  BandSampler sampler(cfg.search_bands(), base.layout().band_size(), cfg.prob_update);
  const double signs[2] = {cfg.epsilon, -cfg.epsilon};
  for (std::size_t iteration = 1;; ++iteration) {
    if (result->final_label != label) return finish(AttackStatus::kSuccess);
    if (used() >= cfg.max_queries) return finish(AttackStatus::kBudgetExhausted);
    if (sampler.exhausted()) return finish(AttackStatus::kCoordinatesExhausted);

    const Direction proposal = sampler.propose(cfg.n, rng);
    std::vector<Trial> trials;
    for (double alpha : signs) {
      if (used() >= cfg.max_queries) break;
      Trial trial{proposal, {}, {}, {}};
      trial.direction.alpha = alpha;
      trial.delta = stepped_delta(result->delta, trial.direction);
      trial.image = render(base, trial.delta, filter).image;
      try {
        trial.probs = oracle.query(trial.image);
      } catch (const OracleError& e) {
        result->queries = used();
        throw AttackInterrupted(e, result);
      }
      result->trials.push_back({iteration, band_label(proposal.band), proposal.coordinates, alpha,
                                trial.probs[y], false, used()});
      const bool improves = trial.probs[y] < confidence;
      trials.push_back(std::move(trial));
      if (improves && cfg.trial_order == TrialOrder::kShortCircuit) break;
    }

    // Best candidate among the trials just evaluated; strict decrease only.
    std::size_t best = trials.size();
    for (std::size_t i = 0; i < trials.size(); ++i) {
      const double p = trials[i].probs[y];
      if (p < confidence && (best == trials.size() || p < trials[best].probs[y])) best = i;
    }
    sampler.resolve();
    if (best == trials.size()) {
      sampler.update(proposal.slot, 0.0);
      continue;
    }
    Trial& winner = trials[best];
    const double drop = confidence - winner.probs[y];
    confidence = winner.probs[y];
    result->trials[result->trials.size() - trials.size() + best].accepted = true;
    result->delta = std::move(winner.delta);
    result->adversarial = std::move(winner.image);
    result->final_confidence = confidence;
    result->final_label = predicted_label(winner.probs);
    sampler.update(proposal.slot, drop);
  }
}

void write_trace(std::ostream& out, const AttackResult& result) {
  out << nlohmann::json{{"iteration", 0},
                        {"kind", "initial"},
                        {"confidence", result.initial_confidence},
                        {"queries", 1}}
             .dump()
      << '\n';
  for (const TrialRecord& t : result.trials) {
    out << nlohmann::json{{"iteration", t.iteration},  {"kind", "trial"},
                          {"band", t.band},            {"coordinates", t.coordinates},
                          {"alpha", t.alpha},          {"confidence", t.confidence},
                          {"accepted", t.accepted},    {"queries", t.queries}}
               .dump()
        << '\n';
  }
}

}  // namespace freqattack
