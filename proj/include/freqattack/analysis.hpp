#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <utility>
#include <string>
#include <vector>

#include "freqattack/attack.hpp"
#include "freqattack/dataset.hpp"
#include "freqattack/metrics.hpp"
#include "freqattack/model.hpp"
#include "freqattack/oracle.hpp"
#include "freqattack/wavelet.hpp"

namespace freqattack {

// ---- Frequency similarity study ------------------------------------------

enum class WhiteboxMethod { kFgsm, kPgd };
WhiteboxMethod parse_whitebox_method(const std::string& name);
std::string to_string(WhiteboxMethod method);

// Every band of levels 1..depth, level by level in tree order:
// a, d, aa, da, ad, dd, aaa, daa, ada, dda, aad, dad, add, ddd.
std::vector<BandPath> similarity_columns(int depth);

struct SimilarityRow {
  std::string dataset;
  std::string model;
  std::string attack;
  std::vector<BandPath> columns;
  std::vector<double> values;  // mean cosine similarity per column
  std::size_t samples = 0;

  double at(const BandPath& band) const;
};

// Informational ordering checks; they depend on model and data.
struct SimilarityFlags {
  bool detail_below_approx = false;   // sim(d) < sim(a)
  bool daa_dad_lowest = false;        // daa and dad are the two lowest at depth 3
};
SimilarityFlags similarity_flags(const SimilarityRow& row);

// For each pair, decomposes both images at every depth 1..depth, takes the
// per-band cosine over the concatenated channel coefficients, and averages
// across pairs.
SimilarityRow band_similarity(const std::vector<Image>& clean, const std::vector<Image>& adversarial,
                              const WaveletFilter& filter, int depth);

struct WhiteboxSettings {
  WhiteboxMethod method = WhiteboxMethod::kFgsm;
  FgsmConfig fgsm;
  PgdConfig pgd;
};

// Generates FGSM or PGD examples for every image and runs band_similarity.
SimilarityRow band_similarity_study(const LabeledDataset& dataset, const MlpClassifier& model,
                                    const WhiteboxSettings& settings, const WaveletFilter& filter,
                                    int depth);

std::string similarity_csv(const std::vector<SimilarityRow>& rows);

// ---- Attack evaluation harness -------------------------------------------

struct ExampleRow {
  std::size_t index = 0;
  int label = 0;
  std::string status;  // attack status, or "misclassified" when skipped
  bool attempted = false;
  bool success = false;
  std::uint64_t queries = 0;
  double initial_confidence = 0.0;
  double final_confidence = 0.0;
  int final_label = -1;
  PairMetrics metrics;
};

struct EvaluationOptions {
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  std::size_t limit = 0;  // evaluate at most this many correctly classified images; 0 = all
  QueryStatMode mode = QueryStatMode::kSuccessesOnly;
  NdvConfig ndv;
  // Called once per image, in index order, as soon as all earlier images are done.
  std::function<void(const ExampleRow&, const AttackResult*)> on_result;
};

struct Evaluation {
  AggregateReport report;
  std::vector<ExampleRow> rows;
};

// Image i is attacked with Rng(Rng::derive_seed(seed, i)) on its own oracle
// instance, so results do not depend on the number of workers. Images the
// oracle misclassifies are recorded but not attempted.
Evaluation evaluate_attack(const LabeledDataset& dataset, const OracleFactory& oracles,
                           const AttackConfig& cfg, const EvaluationOptions& options);

// (queries, fraction of attempted images broken within that many queries),
// one point per distinct success query count, starting at (0, 0).
std::vector<std::pair<std::uint64_t, double>> query_success_curve(const std::vector<ExampleRow>& rows);

std::string rows_csv(const std::vector<ExampleRow>& rows);
std::string curve_csv(const std::vector<std::pair<std::uint64_t, double>>& curve);
nlohmann::json report_json(const AggregateReport& report);
// Per-example rows followed by a single summary row.
std::string report_csv(const std::vector<ExampleRow>& rows, const AggregateReport& report);

// ---- Band ablation -------------------------------------------------------

// The 7 nonempty subsets of {aaa, daa, dad}, singletons first.
std::vector<std::vector<BandPath>> default_ablation_subsets();

struct AblationEntry {
  std::vector<BandPath> bands;
  Evaluation evaluation;
};

// Same seeds for every subset, so results are paired per image.
std::vector<AblationEntry> ablation_run(const LabeledDataset& dataset, const OracleFactory& oracles,
                                        const AttackConfig& cfg,
                                        const std::vector<std::vector<BandPath>>& subsets,
                                        const EvaluationOptions& options);

std::string subset_label(const std::vector<BandPath>& bands);

}  // namespace freqattack
