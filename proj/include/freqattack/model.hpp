#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "freqattack/dataset.hpp"
#include "freqattack/rng.hpp"
#include "freqattack/tensor.hpp"

namespace freqattack {

// flatten -> dense(d_in -> hidden) -> relu -> dense(hidden -> K) -> softmax.
// Weights are stored row-major: w1 is hidden x d_in, w2 is K x hidden.
class MlpClassifier {
 public:
  static constexpr std::size_t kDefaultHidden = 64;

  MlpClassifier() = default;
  // Zero-initialized parameters.
  MlpClassifier(Shape input_shape, int num_classes, std::size_t hidden = kDefaultHidden);
  // He-uniform first layer, Glorot-uniform second layer, zero biases.
  static MlpClassifier initialized(Shape input_shape, int num_classes, std::uint64_t seed,
                                   std::size_t hidden = kDefaultHidden);

  const Shape& input_shape() const { return input_shape_; }
  std::size_t input_size() const { return shape_size(input_shape_); }
  std::size_t hidden() const { return hidden_; }
  int num_classes() const { return num_classes_; }
  std::uint64_t seed() const { return seed_; }
  void set_seed(std::uint64_t seed) { seed_ = seed; }

  std::vector<double>& w1() { return w1_; }
  std::vector<double>& b1() { return b1_; }
  std::vector<double>& w2() { return w2_; }
  std::vector<double>& b2() { return b2_; }
  const std::vector<double>& w1() const { return w1_; }
  const std::vector<double>& b1() const { return b1_; }
  const std::vector<double>& w2() const { return w2_; }
  const std::vector<double>& b2() const { return b2_; }

  std::vector<double> forward(const Tensor& x) const;

  // Cross-entropy -log p_y.
  double loss(const Tensor& x, int label) const;

  // d loss / d x, by backpropagation through both dense layers.
  Tensor input_gradient(const Tensor& x, int label) const;

  // Parameter gradients of the cross-entropy, summed over calls.
  struct Gradients {
    std::vector<double> w1, b1, w2, b2;
  };
  Gradients zero_gradients() const;
  void accumulate_gradients(const Tensor& x, int label, Gradients& grads) const;

  bool operator==(const MlpClassifier&) const = default;

 private:
  struct Activations {
    std::vector<double> pre_hidden;
    std::vector<double> hidden;
    std::vector<double> probs;
  };
  Activations run(const Tensor& x) const;
  void check_input(const Tensor& x) const;
  void check_label(int label) const;

  Shape input_shape_;
  int num_classes_ = 0;
  std::size_t hidden_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<double> w1_, b1_, w2_, b2_;
};

// Index of the largest probability; ties go to the lowest index.
int predicted_label(const std::vector<double>& probs);

struct TrainOptions {
  int epochs = 20;
  double learning_rate = 0.05;
  std::size_t batch_size = 32;
};

struct TrainReport {
  double train_accuracy = 0.0;
  double final_loss = 0.0;  // mean cross-entropy over the dataset after training
};

// Minibatch SGD on mean cross-entropy; the sample order is reshuffled each
// epoch with `rng`.
TrainReport train(MlpClassifier& model, const LabeledDataset& dataset, const TrainOptions& options,
                  Rng& rng);

double accuracy(const MlpClassifier& model, const LabeledDataset& dataset);

struct FgsmConfig {
  double epsilon = 0.03;
  void validate() const;
};

struct PgdConfig {
  double epsilon = 0.03;
  double alpha = 0.0075;
  int steps = 10;
  void validate() const;
};

// clip01(x + epsilon * sign(grad)), with sign(0) = 0.
Image fgsm(const MlpClassifier& model, const Image& x, int label, const FgsmConfig& cfg);

// Starts at x; each step x <- project_{eps-ball(x0)}(clip01(x + alpha * sign(grad))).
Image pgd(const MlpClassifier& model, const Image& x, int label, const PgdConfig& cfg);

// Checkpoint directory: model.json manifest plus w1/b1/w2/b2 raw tensors.
void save_checkpoint(const MlpClassifier& model, const std::filesystem::path& dir);
MlpClassifier load_checkpoint(const std::filesystem::path& dir);

}  // namespace freqattack
