#pragma once

#include <vector>

#include "cusal/matrix.hpp"
#include "cusal/prob.hpp"
#include "cusal/rng.hpp"

namespace cusal {

struct TrainConfig {
  double learning_rate = 0.001;
  int batch_size = 128;
  int epochs = 30;
  double beta1 = 0.9;  // Adam moment decays
  double beta2 = 0.999;
  double epsilon = 1e-8;
  bool reinit_each_round = true;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Fully connected rectifier network trained with Adam on cross-entropy.
///
/// The reference classifier for the experiment harness: it produces softmax
/// forecasts, dropout-sampled forecasts, last-hidden-layer embeddings, and
/// last-layer gradient embeddings. All computations are plain double loops;
/// given equal seeds, training is bit-reproducible.
class MlpClassifier {
 public:
  MlpClassifier(int input_dim, std::vector<int> hidden_widths, int n_classes,
                double dropout_rate = 0.5);

  int input_dim() const { return input_dim_; }
  int n_classes() const { return n_classes_; }
  int last_hidden_width() const { return hidden_widths_.back(); }
  double dropout_rate() const { return dropout_rate_; }
  int n_layers() const { return static_cast<int>(weights_.size()); }

  /// Uniform init over +-sqrt(6 / (fan_in + fan_out)); biases zero.
  void init_weights(RngStream& rng);

  /// Mini-batch Adam on cross-entropy. Re-initializes weights first when
  /// cfg.reinit_each_round is set. Returns the final epoch's mean training
  /// loss; throws "training diverged" if it goes non-finite.
  double train(const Matrix& inputs, const std::vector<int>& labels,
               const TrainConfig& cfg, RngStream& rng);

  // Evaluation-mode forward passes (dropout off).
  Matrix logits(const Matrix& inputs) const;
  std::vector<ProbVector> predict_proba(const Matrix& inputs) const;
  Matrix penultimate_embedding(const Matrix& inputs) const;

  /// Last-layer cross-entropy gradient under the model's own prediction:
  /// row(x) = flatten over classes k of (p_k - [k == argmax p]) * z, where z
  /// is the penultimate embedding. Class-major layout [K x h_last].
  Matrix gradient_embedding(const Matrix& inputs) const;

  /// n_samples stochastic forward passes with dropout active.
  /// Result layout: [sample][input row]. Requires dropout_rate > 0.
  std::vector<std::vector<ProbVector>> mc_dropout_predict(const Matrix& inputs,
                                                          int n_samples,
                                                          RngStream& rng) const;

  /// Mean cross-entropy in evaluation mode.
  double loss(const Matrix& inputs, const std::vector<int>& labels) const;

  // Flat parameter access, canonical order (W0, b0, W1, b1, ...). Used by the
  // finite-difference checks and by tests that freeze weights.
  std::vector<double> flat_parameters() const;
  void set_flat_parameters(std::span<const double> theta);
  /// Analytic gradient of loss() w.r.t. the flat parameters (dropout off).
  std::vector<double> loss_gradient(const Matrix& inputs,
                                    const std::vector<int>& labels) const;

  std::vector<Matrix>& weights() { return weights_; }
  std::vector<std::vector<double>>& biases() { return biases_; }

 private:
  struct Workspace;
  void forward(std::span<const double> x, Workspace& ws, bool training,
               RngStream* rng) const;
  void backward(std::span<const double> x, int label, const Workspace& ws,
                std::vector<Matrix>& grad_w,
                std::vector<std::vector<double>>& grad_b) const;

  int input_dim_;
  std::vector<int> hidden_widths_;
  int n_classes_;
  double dropout_rate_;
  std::vector<Matrix> weights_;              // layer l: [out x in]
  std::vector<std::vector<double>> biases_;  // layer l: [out]
};

/// Post-hoc temperature scaling: divides logits by a fitted constant.
struct TemperatureScaler {
  double temperature = 1.0;

  ProbVector apply(std::span<const double> logits) const;
  std::vector<ProbVector> apply(const Matrix& logits) const;
};

/// Temperature minimizing mean cross-entropy of softmax(logits / T) on the
/// validation set; golden-section search on T in [0.05, 20].
TemperatureScaler fit_temperature(const Matrix& val_logits,
                                  const std::vector<int>& val_labels);
TemperatureScaler fit_temperature(const MlpClassifier& model, const Matrix& val_inputs,
                                  const std::vector<int>& val_labels);

}  // namespace cusal
