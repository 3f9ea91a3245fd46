#include "freqattack/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "freqattack/errors.hpp"
#include "freqattack/io.hpp"

namespace freqattack {

MlpClassifier::MlpClassifier(Shape input_shape, int num_classes, std::size_t hidden)
    : input_shape_(std::move(input_shape)), num_classes_(num_classes), hidden_(hidden) {
  if (num_classes_ < 2) throw ConfigError("model: need at least two classes");
  if (hidden_ == 0) throw ConfigError("model: hidden width must be positive");
  const std::size_t d_in = shape_size(input_shape_);
  w1_.assign(hidden_ * d_in, 0.0);
  b1_.assign(hidden_, 0.0);
  w2_.assign(static_cast<std::size_t>(num_classes_) * hidden_, 0.0);
  b2_.assign(static_cast<std::size_t>(num_classes_), 0.0);
}

MlpClassifier MlpClassifier::initialized(Shape input_shape, int num_classes, std::uint64_t seed,
                                         std::size_t hidden) {
  MlpClassifier model(std::move(input_shape), num_classes, hidden);
  model.seed_ = seed;
  Rng rng(seed);
  const double d_in = static_cast<double>(model.input_size());
  const double limit1 = std::sqrt(6.0 / d_in);
  for (double& w : model.w1_) w = rng.uniform(-limit1, limit1);
  const double limit2 = std::sqrt(6.0 / (static_cast<double>(hidden) + num_classes));
  for (double& w : model.w2_) w = rng.uniform(-limit2, limit2);
  return model;
}

void MlpClassifier::check_input(const Tensor& x) const {
  if (x.size() != input_size()) {
    throw ConfigError("model: input has " + std::to_string(x.size()) + " elements, expected " +
                      std::to_string(input_size()));
  }
}

void MlpClassifier::check_label(int label) const {
  if (label < 0 || label >= num_classes_) {
    throw ConfigError("model: label " + std::to_string(label) + " out of range");
  }
}

MlpClassifier::Activations MlpClassifier::run(const Tensor& x) const {
  check_input(x);
  const std::size_t d_in = input_size();
  const std::span<const double> in = x.values();
  Activations act;
  act.pre_hidden.resize(hidden_);
  act.hidden.resize(hidden_);
  for (std::size_t j = 0; j < hidden_; ++j) {
    const double* row = w1_.data() + j * d_in;
    double s = b1_[j];
    for (std::size_t i = 0; i < d_in; ++i) s += row[i] * in[i];
    act.pre_hidden[j] = s;
    act.hidden[j] = std::max(s, 0.0);
  }
  const auto k = static_cast<std::size_t>(num_classes_);
  std::vector<double> logits(k);
  for (std::size_t c = 0; c < k; ++c) {
    double s = b2_[c];
    for (std::size_t j = 0; j < hidden_; ++j) s += w2_[c * hidden_ + j] * act.hidden[j];
    logits[c] = s;
  }
  const double top = *std::max_element(logits.begin(), logits.end());
  act.probs.resize(k);
  double z = 0.0;
  for (std::size_t c = 0; c < k; ++c) z += act.probs[c] = std::exp(logits[c] - top);
  for (double& p : act.probs) p /= z;
  if (!std::all_of(act.probs.begin(), act.probs.end(), [](double p) { return std::isfinite(p); })) {
    throw ConfigError("model: non-finite parameters");
  }
  return act;
}

MlpClassifier::Gradients MlpClassifier::zero_gradients() const {
  return {std::vector<double>(w1_.size(), 0.0), std::vector<double>(b1_.size(), 0.0),
          std::vector<double>(w2_.size(), 0.0), std::vector<double>(b2_.size(), 0.0)};
}

void MlpClassifier::accumulate_gradients(const Tensor& x, int label, Gradients& grads) const {
  check_label(label);
  const Activations act = run(x);
  const std::size_t d_in = input_size();
  const auto k = static_cast<std::size_t>(num_classes_);
  std::vector<double> grad_logits = act.probs;
  grad_logits[static_cast<std::size_t>(label)] -= 1.0;
  for (std::size_t c = 0; c < k; ++c) {
    grads.b2[c] += grad_logits[c];
    for (std::size_t j = 0; j < hidden_; ++j) grads.w2[c * hidden_ + j] += grad_logits[c] * act.hidden[j];
  }
  const std::span<const double> in = x.values();
  for (std::size_t j = 0; j < hidden_; ++j) {
    if (act.pre_hidden[j] <= 0.0) continue;
    double dh = 0.0;
    for (std::size_t c = 0; c < k; ++c) dh += w2_[c * hidden_ + j] * grad_logits[c];
    grads.b1[j] += dh;
    double* row = grads.w1.data() + j * d_in;
    for (std::size_t i = 0; i < d_in; ++i) row[i] += dh * in[i];
  }
}

std::vector<double> MlpClassifier::forward(const Tensor& x) const { return run(x).probs; }

double MlpClassifier::loss(const Tensor& x, int label) const {
  check_label(label);
  return -std::log(run(x).probs[static_cast<std::size_t>(label)]);
}

Tensor MlpClassifier::input_gradient(const Tensor& x, int label) const {
  check_label(label);
  const Activations act = run(x);
  const std::size_t d_in = input_size();
  const auto k = static_cast<std::size_t>(num_classes_);
  std::vector<double> grad_logits = act.probs;
  grad_logits[static_cast<std::size_t>(label)] -= 1.0;

  std::vector<double> grad_hidden(hidden_, 0.0);
  for (std::size_t j = 0; j < hidden_; ++j) {
    if (act.pre_hidden[j] <= 0.0) continue;
    double s = 0.0;
    for (std::size_t c = 0; c < k; ++c) s += w2_[c * hidden_ + j] * grad_logits[c];
    grad_hidden[j] = s;
  }
  Tensor grad(x.shape());
  std::span<double> g = grad.values();
  for (std::size_t j = 0; j < hidden_; ++j) {
    if (grad_hidden[j] == 0.0) continue;
    const double* row = w1_.data() + j * d_in;
    for (std::size_t i = 0; i < d_in; ++i) g[i] += grad_hidden[j] * row[i];
  }
  return grad;
}

int predicted_label(const std::vector<double>& probs) {
  if (probs.empty()) throw ConfigError("predicted_label: empty probability vector");
  return static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

double accuracy(const MlpClassifier& model, const LabeledDataset& dataset) {
  if (dataset.size() == 0) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (predicted_label(model.forward(dataset.images[i].tensor())) == dataset.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(dataset.size());
}

TrainReport train(MlpClassifier& model, const LabeledDataset& dataset, const TrainOptions& options,
                  Rng& rng) {
  if (dataset.size() == 0) throw ConfigError("train: empty dataset");
  dataset.validate();
  if (dataset.num_classes != model.num_classes()) throw ConfigError("train: class count mismatch");
  if (options.learning_rate < 0.0) throw ConfigError("train: learning rate must be >= 0");
  if (options.batch_size == 0) throw ConfigError("train: batch size must be positive");
  if (options.epochs < 0) throw ConfigError("train: epochs must be >= 0");

  MlpClassifier::Gradients grads = model.zero_gradients();
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  const auto descend = [](std::vector<double>& params, std::vector<double>& grad, double step) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= step * grad[i];
    std::fill(grad.begin(), grad.end(), 0.0);
  };

  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t end = std::min(order.size(), start + options.batch_size);
      for (std::size_t b = start; b < end; ++b) {
        model.accumulate_gradients(dataset.images[order[b]].tensor(), dataset.labels[order[b]],
                                   grads);
      }
      const double step = options.learning_rate / static_cast<double>(end - start);
      descend(model.w1(), grads.w1, step);
      descend(model.b1(), grads.b1, step);
      descend(model.w2(), grads.w2, step);
      descend(model.b2(), grads.b2, step);
    }
  }

  TrainReport report;
  report.train_accuracy = accuracy(model, dataset);
  double total = 0.0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    total += model.loss(dataset.images[i].tensor(), dataset.labels[i]);
  }
  report.final_loss = total / static_cast<double>(dataset.size());
  return report;
}

void FgsmConfig::validate() const {
  if (!(epsilon >= 0.0)) throw ConfigError("fgsm: epsilon must be nonnegative");
}

void PgdConfig::validate() const {
  if (!(epsilon > 0.0) || !(alpha > 0.0) || steps < 1) {
    throw ConfigError("pgd: epsilon, alpha and steps must be positive");
  }
  if (alpha > epsilon) throw ConfigError("pgd: alpha must not exceed epsilon");
}

namespace {

double sign(double v) { return v > 0.0 ? 1.0 : v < 0.0 ? -1.0 : 0.0; }

}  // namespace

Image fgsm(const MlpClassifier& model, const Image& x, int label, const FgsmConfig& cfg) {
  cfg.validate();
  const Tensor grad = model.input_gradient(x.tensor(), label);
  Tensor adv = x.tensor();
  for (std::size_t i = 0; i < adv.size(); ++i) adv[i] += cfg.epsilon * sign(grad[i]);
  return Image::from_clipped(std::move(adv));
}

Image pgd(const MlpClassifier& model, const Image& x, int label, const PgdConfig& cfg) {
  cfg.validate();
  const Tensor& origin = x.tensor();
  Tensor current = origin;
  for (int t = 0; t < cfg.steps; ++t) {
    const Tensor grad = model.input_gradient(current, label);
    for (std::size_t i = 0; i < current.size(); ++i) {
      const double stepped = std::clamp(current[i] + cfg.alpha * sign(grad[i]), 0.0, 1.0);
      current[i] = std::clamp(stepped, origin[i] - cfg.epsilon, origin[i] + cfg.epsilon);
    }
  }
  return Image(std::move(current));
}

void save_checkpoint(const MlpClassifier& model, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const std::size_t hidden = model.hidden();
  const auto k = static_cast<std::size_t>(model.num_classes());
  save_tensor(Tensor({hidden, model.input_size()}, model.w1()), dir / "w1.tensor");
  save_tensor(Tensor({hidden}, model.b1()), dir / "b1.tensor");
  save_tensor(Tensor({k, hidden}, model.w2()), dir / "w2.tensor");
  save_tensor(Tensor({k}, model.b2()), dir / "b2.tensor");
  const nlohmann::json manifest = {
      {"format", "freqattack-mlp-v1"},
      {"architecture", "flatten-dense-relu-dense-softmax"},
      {"input_shape", model.input_shape()},
      {"hidden", hidden},
      {"classes", k},
      {"seed", model.seed()},
      {"layers",
       {{{"name", "dense1"}, {"weight", "w1.tensor"}, {"bias", "b1.tensor"},
         {"shape", {hidden, model.input_size()}}},
        {{"name", "dense2"}, {"weight", "w2.tensor"}, {"bias", "b2.tensor"},
         {"shape", {k, hidden}}}}}};
  write_text_file(dir / "model.json", manifest.dump(2) + "\n");
}

MlpClassifier load_checkpoint(const std::filesystem::path& dir) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_text_file(dir / "model.json"));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("checkpoint manifest: " + std::string(e.what()));
  }
  try {
    if (manifest.at("format") != "freqattack-mlp-v1") throw IoError("checkpoint: unknown format");
    MlpClassifier model(manifest.at("input_shape").get<Shape>(), manifest.at("classes").get<int>(),
                        manifest.at("hidden").get<std::size_t>());
    const auto read_into = [&](const char* file, std::vector<double>& dest) {
      const Tensor t = load_tensor(dir / file);
      if (t.size() != dest.size()) throw IoError(std::string("checkpoint: wrong size for ") + file);
      dest = t.data();
    };
    read_into("w1.tensor", model.w1());
    read_into("b1.tensor", model.b1());
    read_into("w2.tensor", model.w2());
    read_into("b2.tensor", model.b2());
    model.set_seed(manifest.at("seed").get<std::uint64_t>());
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("checkpoint manifest: " + std::string(e.what()));
  }
}

}  // namespace freqattack
