#include "freqattack/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "freqattack/io.hpp"

namespace freqattack {

WhiteboxMethod parse_whitebox_method(const std::string& name) {
  if (name == "fgsm" || name == "FGSM") return WhiteboxMethod::kFgsm;
  if (name == "pgd" || name == "PGD") return WhiteboxMethod::kPgd;
  throw ConfigError("unknown whitebox attack '" + name + "' (fgsm, pgd)");
}

std::string to_string(WhiteboxMethod method) {
  return method == WhiteboxMethod::kFgsm ? "FGSM" : "PGD";
}

std::vector<BandPath> similarity_columns(int depth) {
  std::vector<BandPath> columns;
  for (int d = 1; d <= depth; ++d) {
    const auto level = band_paths(d);
    columns.insert(columns.end(), level.begin(), level.end());
  }
  return columns;
}

double SimilarityRow::at(const BandPath& band) const {
  const auto it = std::find(columns.begin(), columns.end(), band);
  if (it == columns.end()) throw ConfigError("similarity row has no column '" + band.str() + "'");
  return values[static_cast<std::size_t>(it - columns.begin())];
}

SimilarityFlags similarity_flags(const SimilarityRow& row) {
  SimilarityFlags flags;
  flags.detail_below_approx = row.at(BandPath("d")) < row.at(BandPath("a"));
  if (std::find(row.columns.begin(), row.columns.end(), BandPath("ddd")) != row.columns.end()) {
    std::vector<std::pair<double, std::string>> level3;
    for (const BandPath& band : band_paths(3)) level3.emplace_back(row.at(band), band.str());
    std::sort(level3.begin(), level3.end());
    const std::set<std::string> lowest{level3[0].second, level3[1].second};
    flags.daa_dad_lowest = lowest == std::set<std::string>{"daa", "dad"};
  }
  return flags;
}

SimilarityRow band_similarity(const std::vector<Image>& clean, const std::vector<Image>& adversarial,
                              const WaveletFilter& filter, int depth) {
  if (clean.empty()) throw ConfigError("similarity study: empty dataset");
  if (clean.size() != adversarial.size()) throw ConfigError("similarity study: pair count mismatch");
  SimilarityRow row;
  row.columns = similarity_columns(depth);
  row.values.assign(row.columns.size(), 0.0);
  row.samples = clean.size();
  for (std::size_t i = 0; i < clean.size(); ++i) {
    std::size_t column = 0;
    for (int d = 1; d <= depth; ++d) {
      const BandTree f = decompose_image(clean[i], filter, d);
      const BandTree g = decompose_image(adversarial[i], filter, d);
      for (const BandPath& band : band_paths(d)) {
        row.values[column++] += cosine_similarity(f.band(band), g.band(band));
      }
    }
  }
  for (double& v : row.values) v /= static_cast<double>(clean.size());
  return row;
}

SimilarityRow band_similarity_study(const LabeledDataset& dataset, const MlpClassifier& model,
                                    const WhiteboxSettings& settings, const WaveletFilter& filter,
                                    int depth) {
  if (dataset.size() == 0) throw ConfigError("similarity study: empty dataset");
  std::vector<Image> adversarial;
  adversarial.reserve(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    adversarial.push_back(settings.method == WhiteboxMethod::kFgsm
                              ? fgsm(model, dataset.images[i], dataset.labels[i], settings.fgsm)
                              : pgd(model, dataset.images[i], dataset.labels[i], settings.pgd));
  }
  SimilarityRow row = band_similarity(dataset.images, adversarial, filter, depth);
  row.attack = to_string(settings.method);
  return row;
}

std::string similarity_csv(const std::vector<SimilarityRow>& rows) {
  std::ostringstream out;
  out << "dataset,model,attack,samples";
  if (!rows.empty()) {
    for (const BandPath& band : rows.front().columns) out << ',' << band.str();
  }
  out << '\n';
  for (const SimilarityRow& row : rows) {
    out << row.dataset << ',' << row.model << ',' << row.attack << ',' << row.samples;
    for (double v : row.values) out << ',' << format_double(v);
    out << '\n';
  }
  return out.str();
}

namespace {

ExampleRow make_row(std::size_t index, int label, const AttackResult& result) {
  ExampleRow row;
  row.index = index;
  row.label = label;
  row.status = to_string(result.status);
  row.attempted = true;
  row.success = result.success;
  row.queries = result.queries;
  row.initial_confidence = result.initial_confidence;
  row.final_confidence = result.final_confidence;
  row.final_label = result.final_label;
  row.metrics = result.metrics;
  return row;
}

}  // namespace

Evaluation evaluate_attack(const LabeledDataset& dataset, const OracleFactory& oracles,
                           const AttackConfig& cfg, const EvaluationOptions& options) {
  if (dataset.size() == 0) throw ConfigError("evaluation: empty dataset");
  dataset.validate();
  cfg.validate();
  const std::size_t count = dataset.size();
  const std::size_t workers = std::max<std::size_t>(1, std::min(options.workers, count));

  struct Slot {
    bool done = false;
    ExampleRow row;
    std::optional<AttackResult> result;
  };
  std::vector<Slot> slots(count);
  std::mutex mutex;
  std::size_t flushed = 0;
  std::size_t attempted = 0;  // among flushed rows, for `limit`
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr failure;

  // Emits the finished prefix in index order and applies `limit`.
  const auto flush = [&] {
    while (flushed < count && slots[flushed].done) {
      Slot& slot = slots[flushed];
      if (options.limit != 0 && attempted >= options.limit) {
        slot.row.status = "not-evaluated";
        slot.row.attempted = false;
        slot.result.reset();
      } else if (slot.row.attempted) {
        ++attempted;
      }
      if (options.on_result && slot.row.status != "not-evaluated") {
        options.on_result(slot.row, slot.result ? &*slot.result : nullptr);
      }
      slot.result.reset();
      ++flushed;
    }
    if (options.limit != 0 && attempted >= options.limit) stop = true;
  };

  const auto work = [&] {
    std::unique_ptr<Oracle> oracle;
    try {
      oracle = oracles();
      for (;;) {
        if (stop) return;
        const std::size_t i = next++;
        if (i >= count) return;
        Slot local;
        const int label = dataset.labels[i];
        try {
          Rng rng(Rng::derive_seed(options.seed, i));
          AttackResult result = run_attack(dataset.images[i], label, *oracle, cfg, rng, options.ndv);
          local.row = make_row(i, label, result);
          if (options.on_result) local.result = std::move(result);
        } catch (const MisclassifiedInput&) {
          local.row.index = i;
          local.row.label = label;
          local.row.status = "misclassified";
        }
        local.done = true;
        std::lock_guard lock(mutex);
        slots[i] = std::move(local);
        flush();
      }
    } catch (...) {
      std::lock_guard lock(mutex);
      if (!failure) failure = std::current_exception();
      stop = true;
    }
  };

  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  Evaluation evaluation;
  std::vector<AttackOutcome> outcomes;
  for (std::size_t i = 0; i < flushed; ++i) {
    const ExampleRow& row = slots[i].row;
    if (row.status == "not-evaluated") continue;
    evaluation.rows.push_back(row);
    if (row.attempted) outcomes.push_back({row.success, row.queries, row.metrics});
  }
  if (outcomes.empty()) throw ConfigError("evaluation: no correctly classified images to attack");
  evaluation.report = aggregate(outcomes, options.mode);
  return evaluation;
}

std::vector<std::pair<std::uint64_t, double>> query_success_curve(const std::vector<ExampleRow>& rows) {
  std::map<std::uint64_t, std::size_t> successes_at;
  std::size_t attempted = 0;
  for (const ExampleRow& row : rows) {
    if (!row.attempted) continue;
    ++attempted;
    if (row.success) ++successes_at[row.queries];
  }
  std::vector<std::pair<std::uint64_t, double>> curve{{0, 0.0}};
  if (attempted == 0) return curve;
  std::size_t cumulative = 0;
  for (const auto& [queries, n] : successes_at) {
    cumulative += n;
    curve.emplace_back(queries, static_cast<double>(cumulative) / static_cast<double>(attempted));
  }
  return curve;
}

namespace {

void append_metrics(std::ostringstream& out, const PairMetrics& m) {
  out << ',' << format_double(m.l2) << ',' << format_double(m.linf) << ',' << format_double(m.l0)
      << ',' << format_double(m.ssim) << ',' << format_double(m.ndv);
}

constexpr const char* kRowHeader =
    "kind,index,label,status,success,queries,initial_confidence,final_confidence,final_label,"
    "l2,linf,l0,ssim,ndv,attempted,succeeded,asr,anq,mnq";

void append_row(std::ostringstream& out, const ExampleRow& row) {
  out << "example," << row.index << ',' << row.label << ',' << row.status << ','
      << (row.success ? 1 : 0) << ',' << row.queries << ',' << format_double(row.initial_confidence)
      << ',' << format_double(row.final_confidence) << ',' << row.final_label;
  append_metrics(out, row.metrics);
  out << ",,,,,\n";
}

}  // namespace

std::string rows_csv(const std::vector<ExampleRow>& rows) {
  std::ostringstream out;
  out << kRowHeader << '\n';
  for (const ExampleRow& row : rows) append_row(out, row);
  return out.str();
}

std::string curve_csv(const std::vector<std::pair<std::uint64_t, double>>& curve) {
  std::ostringstream out;
  out << "queries,asr\n";
  for (const auto& [queries, asr] : curve) out << queries << ',' << format_double(asr) << '\n';
  return out.str();
}

nlohmann::json report_json(const AggregateReport& report) {
  const PairMetrics& m = report.mean_metrics;
  return {{"attempted", report.attempted},
          {"succeeded", report.succeeded},
          {"asr", report.asr},
          {"query_stat_mode", to_string(report.mode)},
          {"anq", report.anq},
          {"mnq", report.mnq},
          {"anq_successes", report.anq_successes},
          {"mnq_successes", report.mnq_successes},
          {"anq_all", report.anq_all},
          {"mnq_all", report.mnq_all},
          {"mean_l2", m.l2},
          {"mean_linf", m.linf},
          {"mean_l0", m.l0},
          {"mean_ssim", m.ssim},
          {"mean_ndv", m.ndv}};
}

std::string report_csv(const std::vector<ExampleRow>& rows, const AggregateReport& report) {
  std::ostringstream out;
  out << kRowHeader << '\n';
  for (const ExampleRow& row : rows) append_row(out, row);
  // Summary row: metric columns hold means over successes.
  out << "summary,,," << to_string(report.mode) << ",,,,,";
  append_metrics(out, report.mean_metrics);
  out << ',' << report.attempted << ',' << report.succeeded << ',' << format_double(report.asr)
      << ',' << format_double(report.anq) << ',' << format_double(report.mnq) << '\n';
  return out.str();
}

std::vector<std::vector<BandPath>> default_ablation_subsets() {
  const BandPath a("aaa"), b("daa"), c("dad");
  return {{a}, {b}, {c}, {a, b}, {a, c}, {b, c}, {a, b, c}};
}

std::string subset_label(const std::vector<BandPath>& bands) {
  std::string label;
  for (const BandPath& band : bands) label += (label.empty() ? "" : "+") + band_label(band);
  return label;
}

std::vector<AblationEntry> ablation_run(const LabeledDataset& dataset, const OracleFactory& oracles,
                                        const AttackConfig& cfg,
                                        const std::vector<std::vector<BandPath>>& subsets,
                                        const EvaluationOptions& options) {
  if (subsets.empty()) throw ConfigError("ablation: no band subsets");
  std::vector<AblationEntry> entries;
  for (const auto& subset : subsets) {
    AttackConfig subset_cfg = cfg;
    subset_cfg.mode = AttackMode::kFrequency;
    subset_cfg.bands = subset;
    entries.push_back({subset, evaluate_attack(dataset, oracles, subset_cfg, options)});
  }
  return entries;
}

}  // namespace freqattack
