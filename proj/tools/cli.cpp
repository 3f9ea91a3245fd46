#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "freqattack/analysis.hpp"
#include "freqattack/attack.hpp"
#include "freqattack/dataset.hpp"
#include "freqattack/errors.hpp"
#include "freqattack/io.hpp"
#include "freqattack/metrics.hpp"
#include "freqattack/model.hpp"
#include "freqattack/oracle.hpp"
#include "freqattack/wavelet.hpp"

namespace freqattack::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

// Options that can come from the command line or from the JSON config file
// (flat dotted keys). Command-line values win.
class Settings {
 public:
  template <class T>
  CLI::Option* add(CLI::App* app, const std::string& flag, T& value, const std::string& key,
                   const std::string& help) {
    CLI::Option* opt = app->add_option(flag, value, help)->capture_default_str();
    entries_.push_back({key, opt, [&value, key](const json& j) {
                          try {
                            value = j.get<T>();
                          } catch (const json::exception&) {
                            throw ConfigError("config key '" + key + "' has the wrong type");
                          }
                        },
                        [&value] { return json(value); }});
    return opt;
  }

  CLI::Option* add_flag(CLI::App* app, const std::string& flag, bool& value,
                        const std::string& key, const std::string& help) {
    CLI::Option* opt = app->add_flag(flag, value, help);
    entries_.push_back({key, opt, [&value, key](const json& j) {
                          if (!j.is_boolean()) throw ConfigError("config key '" + key + "' must be a boolean");
                          value = j.get<bool>();
                        },
                        [&value] { return json(value); }});
    return opt;
  }

  // Applies config-file values to options not given on the command line, for
  // the entries registered on `app`.
  void apply(const json& config, const CLI::App* app) {
    for (Entry& e : entries_) {
      if (!owned_by(e.opt, app) || e.opt->count() > 0) continue;
      if (config.contains(e.key)) e.from_json(config.at(e.key));
    }
  }

  json echo(const CLI::App* app) const {
    json out = json::object();
    for (const Entry& e : entries_) {
      if (owned_by(e.opt, app)) out[e.key] = e.to_json();
    }
    return out;
  }

 private:
  struct Entry {
    std::string key;
    CLI::Option* opt;
    std::function<void(const json&)> from_json;
    std::function<json()> to_json;
  };

  static bool owned_by(const CLI::Option* opt, const CLI::App* app) {
    for (const CLI::Option* o : app->get_options()) {
      if (o == opt) return true;
    }
    return false;
  }

  std::vector<Entry> entries_;
};

struct AttackArgs {
  double epsilon = 1.5;
  std::size_t n = 4;
  std::string bands = "aaa,daa,dad";
  int depth = 3;
  std::string filter = "haar";
  std::size_t max_queries = 5000;
  double gamma = 10.0;
  double beta = 0.9;
  double w_min = 0.05;
  std::string mode = "frequency";
  std::string trial_order = "short-circuit";

  void add_to(CLI::App* app, Settings& settings) {
    settings.add(app, "--epsilon", epsilon, "attack.epsilon", "Coefficient step length");
    settings.add(app, "--n", n, "attack.n", "Coefficients per direction");
    settings.add(app, "--bands", bands, "attack.bands", "Comma-separated band paths to search");
    settings.add(app, "--depth", depth, "attack.depth", "Decomposition depth");
    settings.add(app, "--filter", filter, "attack.filter", "Wavelet filter (haar, db2, db4)");
    settings.add(app, "--max-queries", max_queries, "attack.max_queries", "Query budget per image");
    settings.add(app, "--gamma", gamma, "attack.prob_update.gamma", "Band weight reward");
    settings.add(app, "--beta", beta, "attack.prob_update.beta", "Band weight decay on discard");
    settings.add(app, "--w-min", w_min, "attack.prob_update.w_min", "Band weight floor");
    settings.add(app, "--mode", mode, "attack.mode", "frequency or pixel-baseline");
    settings.add(app, "--trial-order", trial_order, "attack.trial_order",
                 "short-circuit or both-signs");
  }

  AttackConfig build() const {
    AttackConfig cfg;
    cfg.epsilon = epsilon;
    cfg.n = n;
    cfg.bands.clear();
    std::stringstream list(bands);
    for (std::string item; std::getline(list, item, ',');) {
      if (!item.empty()) cfg.bands.emplace_back(item);
    }
    cfg.depth = depth;
    cfg.filter = filter;
    cfg.max_queries = max_queries;
    cfg.prob_update = {gamma, beta, w_min};
    if (mode == "frequency") {
      cfg.mode = AttackMode::kFrequency;
    } else if (mode == "pixel-baseline" || mode == "pixel") {
      cfg.mode = AttackMode::kPixelBaseline;
    } else {
      throw ConfigError("unknown attack mode '" + mode + "'");
    }
    if (trial_order == "short-circuit") {
      cfg.trial_order = TrialOrder::kShortCircuit;
    } else if (trial_order == "both-signs") {
      cfg.trial_order = TrialOrder::kBothSigns;
    } else {
      throw ConfigError("unknown trial order '" + trial_order + "'");
    }
    cfg.validate();
    return cfg;
  }
};

struct OracleArgs {
  std::string kind = "builtin";
  std::string target;
  int classes = 0;
  double timeout = 30.0;

  void add_to(CLI::App* app, Settings& settings) {
    settings.add(app, "--oracle", kind, "oracle.kind", "builtin, remote-http or remote-stdio");
    settings.add(app, "--target", target, "oracle.target",
                 "Checkpoint directory, http://host:port, or stdio command line");
    settings.add(app, "--classes", classes, "oracle.classes", "Class count (0 = from model/meta)");
    settings.add(app, "--timeout", timeout, "oracle.query_timeout", "Query timeout in seconds");
  }

  OracleSpec build() const {
    OracleSpec spec;
    spec.kind = OracleSpec::parse_kind(kind);
    spec.target = target;
    spec.num_classes = classes;
    spec.query_timeout_seconds = timeout;
    return spec;
  }
};

struct DataArgs {
  std::string path;
  std::size_t count = 0;
  int classes = 0;

  void add_to(CLI::App* app, Settings& settings, const std::string& prefix = "data") {
    settings.add(app, "--data", path, prefix + ".path", "CIFAR-10 style binary dataset")->required();
    settings.add(app, "--count", count, prefix + ".count", "Records to load (0 = all)");
    settings.add(app, "--data-classes", classes, prefix + ".classes",
                 "Class count (0 = sidecar .json, else 10)");
  }

  LabeledDataset load() const {
    int k = classes;
    const fs::path sidecar = path + ".json";
    if (k == 0 && fs::exists(sidecar)) {
      try {
        k = json::parse(read_text_file(sidecar)).at("classes").get<int>();
      } catch (const json::exception& e) {
        throw IoError("dataset sidecar: " + std::string(e.what()));
      }
    }
    if (k == 0) k = 10;
    if (!fs::exists(path)) throw IoError("file not found: " + path);
    const std::size_t available = fs::file_size(path) / kCifarRecordBytes;
    return load_cifar10_binary(path, count == 0 ? available : count, k);
  }
};

json versions() {
  return {{"freqattack", kVersion},
          {"compiler", __VERSION__},
          {"cplusplus", __cplusplus},
          {"nlohmann_json",
           std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
               std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
               std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
          {"cli11", CLI11_VERSION}};
}

void write_run_json(const fs::path& dir, const std::string& command, const json& config,
                    std::uint64_t seed) {
  fs::create_directories(dir);
  const json run = {{"command", command}, {"config", config}, {"seed", seed}, {"versions", versions()}};
  write_text_file(dir / "run.json", run.dump(2) + "\n");
}

void save_image_any(const Image& image, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  if (path.extension() == ".png") {
    save_png(image, path);
  } else {
    save_tensor(image.tensor(), path);
  }
}

std::string fmt(double v) { return format_double(v); }

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Wavelet packet frequency analysis and black-box attack toolkit", "freqattack"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  std::string config_path;
  app.add_option("--config", config_path, "JSON config file with flat dotted keys");

  Settings settings;
  std::uint64_t seed = 0;
  std::string out_dir = "out";

  // ---- gen-data
  CLI::App* gen = app.add_subcommand("gen-data", "Write the synthetic 3-class dataset");
  std::size_t gen_count = 300;
  double gen_sigma = 0.05;
  std::string gen_out;
  std::uint64_t gen_seed = 1;
  settings.add(gen, "--count", gen_count, "data.count", "Number of images");
  settings.add(gen, "--seed", gen_seed, "seed", "Generator seed");
  settings.add(gen, "--noise", gen_sigma, "data.noise_sigma", "Gaussian noise sigma");
  settings.add(gen, "--out", gen_out, "data.path", "Output binary file")->required();

  // ---- decompose / reconstruct
  CLI::App* decompose = app.add_subcommand("decompose", "Wavelet packet decomposition of an image");
  std::string dec_input, dec_filter = "haar";
  int dec_depth = 3;
  settings.add(decompose, "--input", dec_input, "input", "Image (.png or raw tensor)")->required();
  settings.add(decompose, "--filter", dec_filter, "wavelet.filter", "haar, db2 or db4");
  settings.add(decompose, "--depth", dec_depth, "wavelet.depth", "Decomposition depth");
  settings.add(decompose, "--out", out_dir, "out", "Output directory");

  CLI::App* reconstruct = app.add_subcommand("reconstruct", "Reassemble an image from band files");
  std::string rec_input, rec_output;
  bool rec_clip = false;
  settings.add(reconstruct, "--input", rec_input, "input", "Band directory with manifest.json")->required();
  settings.add(reconstruct, "--output", rec_output, "output", "Output image (.png or raw tensor)")->required();
  settings.add_flag(reconstruct, "--clip", rec_clip, "clip", "Clip to [0,1] before saving a raw tensor");

  // ---- train
  CLI::App* train_cmd = app.add_subcommand("train", "Train the builtin MLP classifier");
  DataArgs train_data;
  train_data.add_to(train_cmd, settings);
  TrainOptions train_opts;
  std::size_t hidden = MlpClassifier::kDefaultHidden;
  settings.add(train_cmd, "--epochs", train_opts.epochs, "train.epochs", "Training epochs");
  settings.add(train_cmd, "--lr", train_opts.learning_rate, "train.lr", "SGD learning rate");
  settings.add(train_cmd, "--batch", train_opts.batch_size, "train.batch", "Minibatch size");
  settings.add(train_cmd, "--hidden", hidden, "train.hidden", "Hidden units");
  settings.add(train_cmd, "--seed", seed, "seed", "Initialization and shuffling seed");
  settings.add(train_cmd, "--out", out_dir, "out", "Checkpoint directory");

  // ---- fgsm / pgd
  CLI::App* fgsm_cmd = app.add_subcommand("fgsm", "FGSM adversarial example");
  CLI::App* pgd_cmd = app.add_subcommand("pgd", "PGD adversarial example");
  std::string wb_model, wb_input, wb_output;
  int wb_label = -1;
  FgsmConfig fgsm_cfg;
  PgdConfig pgd_cfg;
  for (CLI::App* cmd : {fgsm_cmd, pgd_cmd}) {
    settings.add(cmd, "--model", wb_model, "model", "Checkpoint directory")->required();
    settings.add(cmd, "--input", wb_input, "input", "Clean image")->required();
    settings.add(cmd, "--label", wb_label, "label", "True label")->required();
    settings.add(cmd, "--output", wb_output, "output", "Adversarial image path")->required();
  }
  settings.add(fgsm_cmd, "--epsilon", fgsm_cfg.epsilon, "fgsm.epsilon", "L-inf budget");
  settings.add(pgd_cmd, "--epsilon", pgd_cfg.epsilon, "pgd.epsilon", "L-inf ball radius");
  settings.add(pgd_cmd, "--alpha", pgd_cfg.alpha, "pgd.alpha", "Step size");
  settings.add(pgd_cmd, "--steps", pgd_cfg.steps, "pgd.steps", "Iterations");

  // ---- analyze
  CLI::App* analyze = app.add_subcommand("analyze", "Per-band cosine similarity of FGSM/PGD examples");
  DataArgs an_data;
  an_data.add_to(analyze, settings);
  std::string an_model, an_attacks = "fgsm,pgd", an_filter = "haar", an_dataset_name = "synthetic";
  int an_depth = 3;
  FgsmConfig an_fgsm;
  PgdConfig an_pgd;
  settings.add(analyze, "--model", an_model, "model", "Checkpoint directory")->required();
  settings.add(analyze, "--attacks", an_attacks, "analyze.attacks", "Comma list of fgsm,pgd");
  settings.add(analyze, "--filter", an_filter, "wavelet.filter", "haar, db2 or db4");
  settings.add(analyze, "--depth", an_depth, "wavelet.depth", "Deepest level");
  settings.add(analyze, "--dataset-name", an_dataset_name, "analyze.dataset_name", "Row label");
  settings.add(analyze, "--fgsm-epsilon", an_fgsm.epsilon, "fgsm.epsilon", "FGSM budget");
  settings.add(analyze, "--pgd-epsilon", an_pgd.epsilon, "pgd.epsilon", "PGD radius");
  settings.add(analyze, "--pgd-alpha", an_pgd.alpha, "pgd.alpha", "PGD step");
  settings.add(analyze, "--pgd-steps", an_pgd.steps, "pgd.steps", "PGD iterations");
  settings.add(analyze, "--out", out_dir, "out", "Output directory");

  // ---- attack
  CLI::App* attack_cmd = app.add_subcommand("attack", "Black-box attack on one image");
  AttackArgs attack_args;
  OracleArgs attack_oracle;
  std::string at_input;
  int at_label = -1;
  attack_args.add_to(attack_cmd, settings);
  attack_oracle.add_to(attack_cmd, settings);
  settings.add(attack_cmd, "--input", at_input, "input", "Clean image")->required();
  settings.add(attack_cmd, "--label", at_label, "label", "True label")->required();
  settings.add(attack_cmd, "--seed", seed, "seed", "Attack seed");
  settings.add(attack_cmd, "--out", out_dir, "out", "Output directory");

  // ---- evaluate / ablation
  CLI::App* evaluate = app.add_subcommand("evaluate", "Attack every image of a dataset");
  CLI::App* ablation = app.add_subcommand("ablation", "Evaluate the attack on band subsets");
  AttackArgs eval_args;
  OracleArgs eval_oracle;
  DataArgs eval_data;
  std::size_t workers = 1, limit = 0;
  std::string stat_mode = "successes-only";
  bool write_traces = false;
  std::string subsets = "";
  for (CLI::App* cmd : {evaluate, ablation}) {
    eval_args.add_to(cmd, settings);
    eval_oracle.add_to(cmd, settings);
    eval_data.add_to(cmd, settings);
    settings.add(cmd, "--seed", seed, "seed", "Base seed; image i uses a derived stream");
    settings.add(cmd, "--workers", workers, "evaluate.workers", "Parallel attack workers");
    settings.add(cmd, "--limit", limit, "evaluate.limit", "Attack at most this many correctly classified images (0 = all)");
    settings.add(cmd, "--query-stats", stat_mode, "evaluate.query_stats", "successes-only or all-attempted");
    settings.add(cmd, "--out", out_dir, "out", "Output directory");
  }
  settings.add_flag(evaluate, "--traces", write_traces, "evaluate.traces", "Write per-image trace logs");
  settings.add(ablation, "--subsets", subsets, "ablation.subsets",
               "Semicolon-separated subsets, e.g. 'aaa;daa;aaa,daa,dad' (default: all 7)");

  // ---- metrics
  CLI::App* metrics_cmd = app.add_subcommand("metrics", "Compare a clean and an adversarial image");
  std::string m_clean, m_adv;
  NdvConfig ndv_cfg;
  metrics_cmd->add_option("clean", m_clean, "Clean image")->required();
  metrics_cmd->add_option("adversarial", m_adv, "Adversarial image")->required();
  settings.add(metrics_cmd, "--ndv-c", ndv_cfg.scale, "ndv.C", "NDV scale constant");
  settings.add(metrics_cmd, "--ndv-eps", ndv_cfg.eps, "ndv.eps", "NDV denominator constant");
  settings.add(metrics_cmd, "--zero-threshold", ndv_cfg.zero_threshold, "ndv.zero_threshold",
               "L0 counting threshold");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    CLI::App* cmd = app.get_subcommands().front();
    if (!config_path.empty()) {
      json config;
      try {
        config = json::parse(read_text_file(config_path));
      } catch (const json::exception& e) {
        throw ConfigError("config file: " + std::string(e.what()));
      }
      if (!config.is_object()) throw ConfigError("config file must hold a JSON object");
      settings.apply(config, cmd);
    }
    const json echo = settings.echo(cmd);
    const std::string name = cmd->get_name();

    if (cmd == gen) {
      SyntheticOptions opts{gen_count, gen_seed, gen_sigma};
      const LabeledDataset data = make_synthetic_dataset(opts);
      const fs::path path(gen_out);
      if (path.has_parent_path()) fs::create_directories(path.parent_path());
      save_cifar10_binary(data, path);
      write_text_file(gen_out + ".json",
                      json{{"classes", data.num_classes}, {"count", data.size()}, {"config", echo}}
                              .dump(2) + "\n");
      out << "wrote " << data.size() << " images to " << gen_out << "\n";
      return kOk;
    }

    if (cmd == decompose) {
      const WaveletFilter filter = filter_by_name(dec_filter);
      const BandTree tree = decompose_image(load_image(dec_input), filter, dec_depth);
      save_band_tree(tree, filter.name, out_dir);
      write_run_json(out_dir, name, echo, 0);
      out << "wrote " << tree.bands().size() << " bands to " << out_dir << "\n";
      return kOk;
    }

    if (cmd == reconstruct) {
      const LoadedBandTree loaded = load_band_tree(rec_input);
      Tensor pixels = reconstruct_image(loaded.tree, filter_by_name(loaded.filter_name));
      const fs::path path(rec_output);
      if (path.has_parent_path()) fs::create_directories(path.parent_path());
      if (path.extension() == ".png") {
        save_png(Image::from_clipped(std::move(pixels)), path);
      } else {
        save_tensor(rec_clip ? clip01(std::move(pixels)) : pixels, path);
      }
      out << "wrote " << rec_output << "\n";
      return kOk;
    }

    if (cmd == train_cmd) {
      const LabeledDataset data = train_data.load();
      if (data.size() == 0) throw ConfigError("train: empty dataset");
      MlpClassifier model = MlpClassifier::initialized(data.images.front().tensor().shape(),
                                                       data.num_classes, seed, hidden);
      Rng rng(Rng::derive_seed(seed, 0));
      const TrainReport report = train(model, data, train_opts, rng);
      save_checkpoint(model, out_dir);
      write_run_json(out_dir, name, echo, seed);
      write_text_file(fs::path(out_dir) / "train_report.json",
                      json{{"train_accuracy", report.train_accuracy}, {"final_loss", report.final_loss}}
                              .dump(2) + "\n");
      out << "train accuracy " << fmt(report.train_accuracy) << ", loss " << fmt(report.final_loss)
          << "\n";
      return kOk;
    }

    if (cmd == fgsm_cmd || cmd == pgd_cmd) {
      const MlpClassifier model = load_checkpoint(wb_model);
      const Image x = load_image(wb_input);
      const Image adv = cmd == fgsm_cmd ? fgsm(model, x, wb_label, fgsm_cfg)
                                        : pgd(model, x, wb_label, pgd_cfg);
      save_image_any(adv, wb_output);
      const LpNorms norms = lp_metrics(x.tensor(), adv.tensor());
      out << "wrote " << wb_output << " (linf " << fmt(norms.linf) << ", predicted "
          << predicted_label(model.forward(adv.tensor())) << ")\n";
      return kOk;
    }

    if (cmd == analyze) {
      const LabeledDataset data = an_data.load();
      const MlpClassifier model = load_checkpoint(an_model);
      const WaveletFilter filter = filter_by_name(an_filter);
      std::vector<SimilarityRow> rows;
      json flags = json::array();
      std::stringstream list(an_attacks);
      for (std::string item; std::getline(list, item, ',');) {
        WhiteboxSettings wb{parse_whitebox_method(item), an_fgsm, an_pgd};
        SimilarityRow row = band_similarity_study(data, model, wb, filter, an_depth);
        row.dataset = an_dataset_name;
        row.model = "mlp";
        const SimilarityFlags f = similarity_flags(row);
        flags.push_back({{"attack", row.attack},
                         {"d_below_a", f.detail_below_approx},
                         {"daa_dad_lowest_at_depth3", f.daa_dad_lowest}});
        rows.push_back(std::move(row));
      }
      fs::create_directories(out_dir);
      write_text_file(fs::path(out_dir) / "similarity.csv", similarity_csv(rows));
      write_text_file(fs::path(out_dir) / "ordering_flags.json", flags.dump(2) + "\n");
      write_run_json(out_dir, name, echo, 0);
      out << similarity_csv(rows);
      return kOk;
    }

    if (cmd == attack_cmd) {
      const AttackConfig cfg = attack_args.build();
      const OracleFactory factory = make_oracle_factory(attack_oracle.build());
      const std::unique_ptr<Oracle> oracle = factory();
      const Image x = load_image(at_input);
      Rng rng(seed);
      fs::create_directories(out_dir);
      write_run_json(out_dir, name, echo, seed);
      AttackResult result;
      try {
        result = run_attack(x, at_label, *oracle, cfg, rng);
      } catch (const AttackInterrupted& e) {
        std::ofstream trace(fs::path(out_dir) / "trace.jsonl", std::ios::binary);
        write_trace(trace, e.partial());
        throw;
      }
      {
        std::ofstream trace(fs::path(out_dir) / "trace.jsonl", std::ios::binary);
        write_trace(trace, result);
      }
      save_png(result.adversarial, fs::path(out_dir) / "adversarial.png");
      save_tensor(result.adversarial.tensor(), fs::path(out_dir) / "adversarial.tensor");
      save_band_tree(result.delta, cfg.filter, fs::path(out_dir) / "delta");
      const PairMetrics& m = result.metrics;
      const json summary = {{"status", to_string(result.status)},
                            {"success", result.success},
                            {"queries", result.queries},
                            {"initial_confidence", result.initial_confidence},
                            {"final_confidence", result.final_confidence},
                            {"final_label", result.final_label},
                            {"accepted_steps", result.accepted_steps().size()},
                            {"l2", m.l2}, {"linf", m.linf}, {"l0", m.l0},
                            {"ssim", m.ssim}, {"ndv", m.ndv}};
      write_text_file(fs::path(out_dir) / "result.json", summary.dump(2) + "\n");
      out << to_string(result.status) << ": queries " << result.queries << ", label " << at_label
          << " -> " << result.final_label << ", L2 " << fmt(m.l2) << ", NDV " << fmt(m.ndv) << "\n";
      return result.success ? kOk : kAttackFailed;
    }

    if (cmd == evaluate || cmd == ablation) {
      const AttackConfig cfg = eval_args.build();
      const OracleFactory factory = make_oracle_factory(eval_oracle.build());
      const LabeledDataset data = eval_data.load();
      EvaluationOptions opts;
      opts.seed = seed;
      opts.workers = workers;
      opts.limit = limit;
      if (stat_mode == "successes-only") {
        opts.mode = QueryStatMode::kSuccessesOnly;
      } else if (stat_mode == "all-attempted") {
        opts.mode = QueryStatMode::kAllAttempted;
      } else {
        throw ConfigError("unknown query statistics mode '" + stat_mode + "'");
      }
      const fs::path dir(out_dir);
      fs::create_directories(dir);
      write_run_json(dir, name, echo, seed);

      if (cmd == evaluate) {
        // Rows are appended as they complete so an interrupted run keeps them.
        std::ofstream partial(dir / "examples.csv", std::ios::binary);
        partial << rows_csv({});
        partial.flush();
        if (write_traces) fs::create_directories(dir / "traces");
        opts.on_result = [&](const ExampleRow& row, const AttackResult* result) {
          const std::string line = rows_csv({row});
          partial << line.substr(line.find('\n') + 1);
          partial.flush();
          if (write_traces && result) {
            std::ofstream trace(dir / "traces" / ("image_" + std::to_string(row.index) + ".jsonl"),
                                std::ios::binary);
            write_trace(trace, *result);
          }
        };
        const Evaluation evaluation = evaluate_attack(data, factory, cfg, opts);
        write_text_file(dir / "report.csv", report_csv(evaluation.rows, evaluation.report));
        json report = report_json(evaluation.report);
        report["config"] = echo;
        write_text_file(dir / "report.json", report.dump(2) + "\n");
        write_text_file(dir / "curve.csv", curve_csv(query_success_curve(evaluation.rows)));
        const AggregateReport& r = evaluation.report;
        out << "ASR " << fmt(r.asr) << " (" << r.succeeded << "/" << r.attempted << "), ANQ "
            << fmt(r.anq) << ", MNQ " << fmt(r.mnq) << "\n";
        return kOk;
      }

      std::vector<std::vector<BandPath>> subset_list;
      if (subsets.empty()) {
        subset_list = default_ablation_subsets();
      } else {
        std::stringstream groups(subsets);
        for (std::string group; std::getline(groups, group, ';');) {
          std::vector<BandPath> bands;
          std::stringstream items(group);
          for (std::string item; std::getline(items, item, ',');) bands.emplace_back(item);
          subset_list.push_back(std::move(bands));
        }
      }
      const auto entries = ablation_run(data, factory, cfg, subset_list, opts);
      std::ostringstream csv;
      csv << "bands,attempted,succeeded,asr,anq,mnq,mean_l2,mean_linf,mean_ssim,mean_ndv\n";
      json summary = json::array();
      for (const AblationEntry& e : entries) {
        const AggregateReport& r = e.evaluation.report;
        csv << subset_label(e.bands) << ',' << r.attempted << ',' << r.succeeded << ','
            << fmt(r.asr) << ',' << fmt(r.anq) << ',' << fmt(r.mnq) << ','
            << fmt(r.mean_metrics.l2) << ',' << fmt(r.mean_metrics.linf) << ','
            << fmt(r.mean_metrics.ssim) << ',' << fmt(r.mean_metrics.ndv) << '\n';
        json entry = report_json(r);
        entry["bands"] = subset_label(e.bands);
        summary.push_back(entry);
        out << subset_label(e.bands) << ": ASR " << fmt(r.asr) << ", ANQ " << fmt(r.anq) << "\n";
      }
      write_text_file(dir / "ablation.csv", csv.str());
      write_text_file(dir / "ablation.json", summary.dump(2) + "\n");
      return kOk;
    }

    if (cmd == metrics_cmd) {
      const Image x = load_image(m_clean);
      const Image y = load_image(m_adv);
      const PairMetrics m = pair_metrics(x, y, ndv_cfg);
      out << "L2 " << fmt(m.l2) << "\nLinf " << fmt(m.linf) << "\nL0 " << fmt(m.l0) << "\nSSIM "
          << fmt(m.ssim) << "\nNDV " << fmt(m.ndv) << "\n";
      return kOk;
    }
    throw ConfigError("unhandled subcommand " + name);
  } catch (const OracleError& e) {
    err << "oracle error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return kOracleError;
  } catch (const IoError& e) {
    err << "io error: " << e.what() << "\n";
    return kIoError;
  } catch (const fs::filesystem_error& e) {
    err << "io error: " << e.what() << "\n";
    return kIoError;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  }
}

}  // namespace freqattack::cli
