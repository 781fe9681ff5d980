#include "cusal/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cusal {

struct MlpClassifier::Workspace {
  std::vector<std::vector<double>> z;     // pre-activations per hidden layer
  std::vector<std::vector<double>> a;     // post-relu (and dropout) activations
  std::vector<std::vector<double>> mask;  // dropout scale per unit (1 in eval)
  std::vector<double> logits;
  std::vector<double> probs;  // raw softmax of the logits
};

MlpClassifier::MlpClassifier(int input_dim, std::vector<int> hidden_widths,
                             int n_classes, double dropout_rate)
    : input_dim_(input_dim),
      hidden_widths_(std::move(hidden_widths)),
      n_classes_(n_classes),
      dropout_rate_(dropout_rate) {
  if (input_dim_ < 1 || n_classes_ < 2) throw std::invalid_argument("bad layer widths");
  if (hidden_widths_.empty()) throw std::invalid_argument("need at least one hidden layer");
  for (int w : hidden_widths_)
    if (w < 1) throw std::invalid_argument("bad layer widths");
  if (dropout_rate_ < 0.0 || dropout_rate_ >= 1.0)
    throw std::invalid_argument("dropout rate must be in [0, 1)");

  int in = input_dim_;
  for (int w : hidden_widths_) {
    weights_.emplace_back(static_cast<std::size_t>(w), static_cast<std::size_t>(in));
    biases_.emplace_back(static_cast<std::size_t>(w), 0.0);
    in = w;
  }
  weights_.emplace_back(static_cast<std::size_t>(n_classes_), static_cast<std::size_t>(in));
  biases_.emplace_back(static_cast<std::size_t>(n_classes_), 0.0);
}

void MlpClassifier::init_weights(RngStream& rng) {
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Matrix& w = weights_[l];
    const double fan_in = static_cast<double>(w.cols());
    const double fan_out = static_cast<double>(w.rows());
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    for (double& v : w.data()) v = (2.0 * rng.uniform01() - 1.0) * bound;
    std::fill(biases_[l].begin(), biases_[l].end(), 0.0);
  }
}

namespace {

void affine(const Matrix& w, const std::vector<double>& b,
            std::span<const double> x, std::vector<double>& out) {
  out.resize(w.rows());
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const auto row = w.row(r);
    double s = b[r];
    for (std::size_t c = 0; c < row.size(); ++c) s += row[c] * x[c];
    out[r] = s;
  }
}

void softmax_raw(const std::vector<double>& logits, std::vector<double>& probs) {
  probs.resize(logits.size());
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    probs[i] = std::exp(logits[i] - m);
    sum += probs[i];
  }
  for (double& p : probs) p /= sum;
}

double cross_entropy(const std::vector<double>& logits, int label) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double l : logits) sum += std::exp(l - m);
  return m + std::log(sum) - logits[static_cast<std::size_t>(label)];
}

}  // namespace

void MlpClassifier::forward(std::span<const double> x, Workspace& ws, bool training,
                            RngStream* rng) const {
  const std::size_t n_hidden = hidden_widths_.size();
  ws.z.resize(n_hidden);
  ws.a.resize(n_hidden);
  ws.mask.resize(n_hidden);

  std::span<const double> cur = x;
  for (std::size_t l = 0; l < n_hidden; ++l) {
    affine(weights_[l], biases_[l], cur, ws.z[l]);
    auto& a = ws.a[l];
    auto& mask = ws.mask[l];
    a.resize(ws.z[l].size());
    mask.assign(ws.z[l].size(), 1.0);
    // dropout sits between the last hidden layer and the output layer
    const bool drop = training && dropout_rate_ > 0.0 && l == n_hidden - 1;
    const double keep_scale = drop ? 1.0 / (1.0 - dropout_rate_) : 1.0;
    for (std::size_t u = 0; u < a.size(); ++u) {
      double v = std::max(0.0, ws.z[l][u]);
      if (drop) {
        mask[u] = (rng->uniform01() < dropout_rate_) ? 0.0 : keep_scale;
        v *= mask[u];
      }
      a[u] = v;
    }
    cur = a;
  }
  affine(weights_.back(), biases_.back(), cur, ws.logits);
  softmax_raw(ws.logits, ws.probs);
}

void MlpClassifier::backward(std::span<const double> x, int label, const Workspace& ws,
                             std::vector<Matrix>& grad_w,
                             std::vector<std::vector<double>>& grad_b) const {
  const std::size_t n_hidden = hidden_widths_.size();

  // output layer: d logits = p - onehot(y)
  std::vector<double> delta = ws.probs;
  delta[static_cast<std::size_t>(label)] -= 1.0;

  const std::vector<double>& last_a = ws.a[n_hidden - 1];
  {
    Matrix& gw = grad_w.back();
    std::vector<double>& gb = grad_b.back();
    for (std::size_t r = 0; r < gw.rows(); ++r) {
      auto grow = gw.row(r);
      for (std::size_t c = 0; c < grow.size(); ++c) grow[c] += delta[r] * last_a[c];
      gb[r] += delta[r];
    }
  }

  // propagate through hidden layers in reverse
  std::vector<double> upstream;
  for (std::size_t l = n_hidden; l-- > 0;) {
    const Matrix& w_next = weights_[l + 1];
    upstream.assign(w_next.cols(), 0.0);
    for (std::size_t r = 0; r < w_next.rows(); ++r) {
      const auto wrow = w_next.row(r);
      for (std::size_t c = 0; c < wrow.size(); ++c) upstream[c] += wrow[c] * delta[r];
    }
    // dropout scale, then relu gate
    delta.resize(upstream.size());
    for (std::size_t u = 0; u < upstream.size(); ++u)
      delta[u] = ws.z[l][u] > 0.0 ? upstream[u] * ws.mask[l][u] : 0.0;

    const std::span<const double> prev =
        l == 0 ? x : std::span<const double>(ws.a[l - 1]);
    Matrix& gw = grad_w[l];
    std::vector<double>& gb = grad_b[l];
    for (std::size_t r = 0; r < gw.rows(); ++r) {
      auto grow = gw.row(r);
      for (std::size_t c = 0; c < grow.size(); ++c) grow[c] += delta[r] * prev[c];
      gb[r] += delta[r];
    }
  }
}

double MlpClassifier::train(const Matrix& inputs, const std::vector<int>& labels,
                            const TrainConfig& cfg, RngStream& rng) {
  const std::size_t n = inputs.rows();
  if (n == 0) throw std::invalid_argument("empty training set");
  if (inputs.cols() != static_cast<std::size_t>(input_dim_))
    throw std::invalid_argument("input dimension mismatch");
  if (labels.size() != n) throw std::invalid_argument("labels/inputs length mismatch");
  for (int y : labels)
    if (y < 0 || y >= n_classes_) throw std::invalid_argument("label out of range");
  if (cfg.epochs < 1 || cfg.batch_size < 1 || !(cfg.learning_rate > 0.0))
    throw std::invalid_argument("bad training config");

  if (cfg.reinit_each_round) init_weights(rng);

  std::vector<Matrix> adam_m, adam_v, grad_w;
  std::vector<std::vector<double>> adam_mb, adam_vb, grad_b;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    adam_m.emplace_back(weights_[l].rows(), weights_[l].cols());
    adam_v.emplace_back(weights_[l].rows(), weights_[l].cols());
    grad_w.emplace_back(weights_[l].rows(), weights_[l].cols());
    adam_mb.emplace_back(biases_[l].size(), 0.0);
    adam_vb.emplace_back(biases_[l].size(), 0.0);
    grad_b.emplace_back(biases_[l].size(), 0.0);
  }

  auto adam_update = [&](double& theta, double& m, double& v, double g,
                         double bc1, double bc2) {
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
    theta -= cfg.learning_rate * (m / bc1) / (std::sqrt(v / bc2) + cfg.epsilon);
  };

  Workspace ws;
  std::vector<int> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = static_cast<int>(i);

  long long step = 0;
  double epoch_loss = 0.0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(perm);
    epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(n, start + static_cast<std::size_t>(cfg.batch_size));
      const double batch_n = static_cast<double>(end - start);
      for (auto& g : grad_w) std::fill(g.data().begin(), g.data().end(), 0.0);
      for (auto& g : grad_b) std::fill(g.begin(), g.end(), 0.0);

      for (std::size_t i = start; i < end; ++i) {
        const std::size_t row = static_cast<std::size_t>(perm[i]);
        forward(inputs.row(row), ws, /*training=*/true, &rng);
        epoch_loss += cross_entropy(ws.logits, labels[row]);
        backward(inputs.row(row), labels[row], ws, grad_w, grad_b);
      }

      ++step;
      const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
      for (std::size_t l = 0; l < weights_.size(); ++l) {
        auto& w = weights_[l].data();
        auto& gw = grad_w[l].data();
        auto& m = adam_m[l].data();
        auto& v = adam_v[l].data();
        for (std::size_t i = 0; i < w.size(); ++i)
          adam_update(w[i], m[i], v[i], gw[i] / batch_n, bc1, bc2);
        for (std::size_t i = 0; i < biases_[l].size(); ++i)
          adam_update(biases_[l][i], adam_mb[l][i], adam_vb[l][i],
                      grad_b[l][i] / batch_n, bc1, bc2);
      }
    }
    epoch_loss /= static_cast<double>(n);
    if (!std::isfinite(epoch_loss)) throw std::runtime_error("training diverged");
  }
  return epoch_loss;
}

Matrix MlpClassifier::logits(const Matrix& inputs) const {
  if (inputs.cols() != static_cast<std::size_t>(input_dim_))
    throw std::invalid_argument("input dimension mismatch");
  Matrix out(inputs.rows(), static_cast<std::size_t>(n_classes_));
  Workspace ws;
  for (std::size_t r = 0; r < inputs.rows(); ++r) {
    forward(inputs.row(r), ws, /*training=*/false, nullptr);
    for (int k = 0; k < n_classes_; ++k)
      out.at(r, static_cast<std::size_t>(k)) = ws.logits[static_cast<std::size_t>(k)];
  }
  return out;
}

std::vector<ProbVector> MlpClassifier::predict_proba(const Matrix& inputs) const {
  const Matrix l = logits(inputs);
  std::vector<ProbVector> out;
  out.reserve(l.rows());
  for (std::size_t r = 0; r < l.rows(); ++r) out.push_back(softmax(l.row(r)));
  return out;
}

Matrix MlpClassifier::penultimate_embedding(const Matrix& inputs) const {
  if (inputs.cols() != static_cast<std::size_t>(input_dim_))
    throw std::invalid_argument("input dimension mismatch");
  Matrix out(inputs.rows(), static_cast<std::size_t>(last_hidden_width()));
  Workspace ws;
  for (std::size_t r = 0; r < inputs.rows(); ++r) {
    forward(inputs.row(r), ws, /*training=*/false, nullptr);
    const auto& a = ws.a.back();
    for (std::size_t c = 0; c < a.size(); ++c) out.at(r, c) = a[c];
  }
  return out;
}

Matrix MlpClassifier::gradient_embedding(const Matrix& inputs) const {
  if (inputs.cols() != static_cast<std::size_t>(input_dim_))
    throw std::invalid_argument("input dimension mismatch");
  const std::size_t h = static_cast<std::size_t>(last_hidden_width());
  Matrix out(inputs.rows(), static_cast<std::size_t>(n_classes_) * h);
  Workspace ws;
  for (std::size_t r = 0; r < inputs.rows(); ++r) {
    forward(inputs.row(r), ws, /*training=*/false, nullptr);
    const ProbVector p = ProbVector::from_raw(ws.probs);
    const int pred = p.argmax();
    const auto& z = ws.a.back();
    for (int k = 0; k < n_classes_; ++k) {
      const double coeff = p[k] - (k == pred ? 1.0 : 0.0);
      for (std::size_t j = 0; j < h; ++j)
        out.at(r, static_cast<std::size_t>(k) * h + j) = coeff * z[j];
    }
  }
  return out;
}

std::vector<std::vector<ProbVector>> MlpClassifier::mc_dropout_predict(
    const Matrix& inputs, int n_samples, RngStream& rng) const {
  if (dropout_rate_ <= 0.0)
    throw std::invalid_argument("MC-dropout requires dropout");
  if (n_samples < 2) throw std::invalid_argument("need at least 2 MC samples");
  if (inputs.cols() != static_cast<std::size_t>(input_dim_))
    throw std::invalid_argument("input dimension mismatch");

  std::vector<std::vector<ProbVector>> out(static_cast<std::size_t>(n_samples));
  Workspace ws;
  for (int s = 0; s < n_samples; ++s) {
    auto& slice = out[static_cast<std::size_t>(s)];
    slice.reserve(inputs.rows());
    for (std::size_t r = 0; r < inputs.rows(); ++r) {
      forward(inputs.row(r), ws, /*training=*/true, &rng);
      slice.push_back(ProbVector::from_raw(ws.probs));
    }
  }
  return out;
}

double MlpClassifier::loss(const Matrix& inputs, const std::vector<int>& labels) const {
  if (inputs.rows() == 0) throw std::invalid_argument("empty evaluation set");
  if (labels.size() != inputs.rows())
    throw std::invalid_argument("labels/inputs length mismatch");
  Workspace ws;
  double total = 0.0;
  for (std::size_t r = 0; r < inputs.rows(); ++r) {
    forward(inputs.row(r), ws, /*training=*/false, nullptr);
    total += cross_entropy(ws.logits, labels[r]);
  }
  return total / static_cast<double>(inputs.rows());
}

std::vector<double> MlpClassifier::flat_parameters() const {
  std::vector<double> theta;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    theta.insert(theta.end(), weights_[l].data().begin(), weights_[l].data().end());
    theta.insert(theta.end(), biases_[l].begin(), biases_[l].end());
  }
  return theta;
}

void MlpClassifier::set_flat_parameters(std::span<const double> theta) {
  std::size_t pos = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    for (double& v : weights_[l].data()) v = theta[pos++];
    for (double& v : biases_[l]) v = theta[pos++];
  }
  if (pos != theta.size()) throw std::invalid_argument("parameter size mismatch");
}

std::vector<double> MlpClassifier::loss_gradient(const Matrix& inputs,
                                                 const std::vector<int>& labels) const {
  std::vector<Matrix> grad_w;
  std::vector<std::vector<double>> grad_b;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    grad_w.emplace_back(weights_[l].rows(), weights_[l].cols());
    grad_b.emplace_back(biases_[l].size(), 0.0);
  }
  Workspace ws;
  for (std::size_t r = 0; r < inputs.rows(); ++r) {
    forward(inputs.row(r), ws, /*training=*/false, nullptr);
    backward(inputs.row(r), labels[r], ws, grad_w, grad_b);
  }
  const double inv_n = 1.0 / static_cast<double>(inputs.rows());
  std::vector<double> flat;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    for (double v : grad_w[l].data()) flat.push_back(v * inv_n);
    for (double v : grad_b[l]) flat.push_back(v * inv_n);
  }
  return flat;
}

ProbVector TemperatureScaler::apply(std::span<const double> logits) const {
  std::vector<double> scaled(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) scaled[i] = logits[i] / temperature;
  return softmax(scaled);
}

std::vector<ProbVector> TemperatureScaler::apply(const Matrix& logits) const {
  std::vector<ProbVector> out;
  out.reserve(logits.rows());
  for (std::size_t r = 0; r < logits.rows(); ++r) out.push_back(apply(logits.row(r)));
  return out;
}

TemperatureScaler fit_temperature(const Matrix& val_logits,
                                  const std::vector<int>& val_labels) {
  if (val_logits.rows() == 0) throw std::invalid_argument("empty validation set");
  if (val_labels.size() != val_logits.rows())
    throw std::invalid_argument("labels/logits length mismatch");

  auto nll = [&](double t) {
    double total = 0.0;
    std::vector<double> scaled(val_logits.cols());
    for (std::size_t r = 0; r < val_logits.rows(); ++r) {
      const auto row = val_logits.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) scaled[c] = row[c] / t;
      total += cross_entropy(scaled, val_labels[r]);
    }
    return total;
  };

  // golden-section search on [0.05, 20]
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = 0.05, hi = 20.0;
  double x1 = hi - phi * (hi - lo);
  double x2 = lo + phi * (hi - lo);
  double f1 = nll(x1), f2 = nll(x2);
  while (hi - lo > 1e-4) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - phi * (hi - lo);
      f1 = nll(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + phi * (hi - lo);
      f2 = nll(x2);
    }
  }
  return TemperatureScaler{0.5 * (lo + hi)};
}

TemperatureScaler fit_temperature(const MlpClassifier& model, const Matrix& val_inputs,
                                  const std::vector<int>& val_labels) {
  return fit_temperature(model.logits(val_inputs), val_labels);
}

}  // namespace cusal
