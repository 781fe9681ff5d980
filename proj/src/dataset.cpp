#include "cusal/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>

#include "cusal/prob.hpp"

namespace cusal {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::uint32_t read_u32_be(std::ifstream& in) {
  unsigned char buf[4];
  in.read(reinterpret_cast<char*>(buf), 4);
  if (in.gcount() != 4) throw std::runtime_error("short read");
  return (std::uint32_t{buf[0]} << 24) | (std::uint32_t{buf[1]} << 16) |
         (std::uint32_t{buf[2]} << 8) | std::uint32_t{buf[3]};
}

void write_u32_be(std::ofstream& out, std::uint32_t v) {
  const unsigned char buf[4] = {
      static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
      static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(buf), 4);
}

std::vector<unsigned char> read_bytes(std::ifstream& in, std::size_t n) {
  std::vector<unsigned char> buf(n);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n)
    throw std::runtime_error("short read");
  return buf;
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  std::ifstream images(images_path, std::ios::binary);
  if (!images) throw std::runtime_error("cannot open " + images_path);
  if (read_u32_be(images) != kImageMagic)
    throw std::runtime_error(images_path + ": not an IDX file");
  const std::uint32_t n = read_u32_be(images);
  const std::uint32_t rows = read_u32_be(images);
  const std::uint32_t cols = read_u32_be(images);
  const std::size_t pixels_per_image = std::size_t{rows} * cols;
  const auto pixels = read_bytes(images, std::size_t{n} * pixels_per_image);

  std::ifstream labels(labels_path, std::ios::binary);
  if (!labels) throw std::runtime_error("cannot open " + labels_path);
  if (read_u32_be(labels) != kLabelMagic)
    throw std::runtime_error(labels_path + ": not an IDX file");
  const std::uint32_t n_labels = read_u32_be(labels);
  if (n_labels != n) throw std::runtime_error("image/label count mismatch");
  const auto label_bytes = read_bytes(labels, n);

  Dataset out;
  out.features = Matrix(n, pixels_per_image);
  for (std::size_t i = 0; i < pixels.size(); ++i)
    out.features.data()[i] = static_cast<double>(pixels[i]) / 255.0;
  out.labels.reserve(n);
  int max_label = -1;
  for (unsigned char b : label_bytes) {
    out.labels.push_back(static_cast<int>(b));
    max_label = std::max(max_label, static_cast<int>(b));
  }
  out.n_classes = max_label + 1;
  out.name = images_path;
  return out;
}

void save_idx(const Dataset& dataset, int image_rows, int image_cols,
              const std::string& images_path, const std::string& labels_path) {
  if (static_cast<std::size_t>(image_rows) * static_cast<std::size_t>(image_cols) !=
      dataset.features.cols())
    throw std::invalid_argument("image geometry does not match feature width");
  for (int y : dataset.labels)
    if (y < 0 || y > 255) throw std::invalid_argument("label does not fit a byte");

  std::ofstream images(images_path, std::ios::binary);
  if (!images) throw std::runtime_error("cannot open " + images_path);
  write_u32_be(images, kImageMagic);
  write_u32_be(images, static_cast<std::uint32_t>(dataset.size()));
  write_u32_be(images, static_cast<std::uint32_t>(image_rows));
  write_u32_be(images, static_cast<std::uint32_t>(image_cols));
  for (double v : dataset.features.data()) {
    const double scaled = std::round(v * 255.0);
    const auto byte = static_cast<unsigned char>(
        std::clamp(scaled, 0.0, 255.0));
    images.write(reinterpret_cast<const char*>(&byte), 1);
  }

  std::ofstream labels(labels_path, std::ios::binary);
  if (!labels) throw std::runtime_error("cannot open " + labels_path);
  write_u32_be(labels, kLabelMagic);
  write_u32_be(labels, static_cast<std::uint32_t>(dataset.size()));
  for (int y : dataset.labels) {
    const auto byte = static_cast<unsigned char>(y);
    labels.write(reinterpret_cast<const char*>(&byte), 1);
  }
}

GaussianMixture::GaussianMixture(GaussianMixtureConfig cfg, RngStream& rng)
    : cfg_(std::move(cfg)) {
  if (cfg_.n_classes < 2) throw std::invalid_argument("need at least 2 classes");
  if (cfg_.dim < 1) throw std::invalid_argument("bad dimension");
  if (cfg_.n_samples < 0) throw std::invalid_argument("bad sample count");
  if (cfg_.label_noise < 0.0 || cfg_.label_noise >= 0.5)
    throw std::invalid_argument("label noise must lie in [0, 0.5)");

  const int k = cfg_.n_classes;
  if (cfg_.means.empty()) {
    // default layout: centers on a ring inside the unit box
    cfg_.means.assign(static_cast<std::size_t>(k),
                      std::vector<double>(static_cast<std::size_t>(cfg_.dim), 0.5));
    for (int c = 0; c < k; ++c) {
      const double angle = 2.0 * 3.14159265358979323846 * c / k;
      cfg_.means[static_cast<std::size_t>(c)][0] = 0.5 + 0.3 * std::cos(angle);
      if (cfg_.dim > 1)
        cfg_.means[static_cast<std::size_t>(c)][1] = 0.5 + 0.3 * std::sin(angle);
    }
  }
  if (cfg_.scales.empty())
    cfg_.scales.assign(static_cast<std::size_t>(k), 0.12);

  if (static_cast<int>(cfg_.means.size()) != k)
    throw std::invalid_argument("means count must equal class count");
  for (const auto& mu : cfg_.means)
    if (static_cast<int>(mu.size()) != cfg_.dim)
      throw std::invalid_argument("mean dimension mismatch");
  if (static_cast<int>(cfg_.scales.size()) != k)
    throw std::invalid_argument("scales count must equal class count");
  for (double s : cfg_.scales)
    if (!(s > 0.0)) throw std::invalid_argument("degenerate scale");

  dataset_.features = Matrix(static_cast<std::size_t>(cfg_.n_samples),
                             static_cast<std::size_t>(cfg_.dim));
  dataset_.labels.resize(static_cast<std::size_t>(cfg_.n_samples));
  dataset_.n_classes = k;
  dataset_.name = "gaussian-mixture";

  for (int i = 0; i < cfg_.n_samples; ++i) {
    const int c = static_cast<int>(rng.below(static_cast<std::uint64_t>(k)));
    const auto& mu = cfg_.means[static_cast<std::size_t>(c)];
    const double sigma = cfg_.scales[static_cast<std::size_t>(c)];
    auto row = dataset_.features.row(static_cast<std::size_t>(i));
    for (int d = 0; d < cfg_.dim; ++d)
      row[static_cast<std::size_t>(d)] =
          mu[static_cast<std::size_t>(d)] + sigma * rng.normal();
    int label = c;
    if (cfg_.label_noise > 0.0 && rng.uniform01() < cfg_.label_noise) {
      int other = static_cast<int>(rng.below(static_cast<std::uint64_t>(k - 1)));
      if (other >= c) ++other;
      label = other;
    }
    dataset_.labels[static_cast<std::size_t>(i)] = label;
  }
}

ProbVector GaussianMixture::posterior(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != cfg_.dim)
    throw std::invalid_argument("point dimension mismatch");
  const int k = cfg_.n_classes;
  // clean posterior by Bayes rule with the uniform class prior cancelling
  std::vector<double> log_q(static_cast<std::size_t>(k));
  for (int c = 0; c < k; ++c) {
    const auto& mu = cfg_.means[static_cast<std::size_t>(c)];
    const double sigma = cfg_.scales[static_cast<std::size_t>(c)];
    double d2 = 0.0;
    for (int d = 0; d < cfg_.dim; ++d) {
      const double diff = x[static_cast<std::size_t>(d)] - mu[static_cast<std::size_t>(d)];
      d2 += diff * diff;
    }
    log_q[static_cast<std::size_t>(c)] =
        -static_cast<double>(cfg_.dim) * std::log(sigma) - d2 / (2.0 * sigma * sigma);
  }
  const ProbVector clean = softmax(log_q);
  // symmetric label noise: observed label keeps the clean one w.p. 1 - eta,
  // otherwise lands uniformly on the other classes
  const double eta = cfg_.label_noise;
  std::vector<double> noisy(static_cast<std::size_t>(k));
  for (int c = 0; c < k; ++c)
    noisy[static_cast<std::size_t>(c)] =
        (1.0 - eta) * clean[c] + eta * (1.0 - clean[c]) / (k - 1);
  return ProbVector::from_raw(std::move(noisy));
}

Dataset make_longtail(const Dataset& dataset, double imbalance_factor,
                      RngStream& rng) {
  if (!(imbalance_factor >= 1.0))
    throw std::invalid_argument("imbalance factor must be at least 1");
  if (imbalance_factor == 1.0) return dataset;
  const int k = dataset.n_classes;
  if (k < 2) throw std::invalid_argument("long-tail needs at least 2 classes");

  std::vector<std::vector<int>> by_class(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < dataset.labels.size(); ++i)
    by_class[static_cast<std::size_t>(dataset.labels[i])].push_back(
        static_cast<int>(i));
  std::size_t n_max = 0;
  for (const auto& c : by_class) n_max = std::max(n_max, c.size());

  std::vector<bool> keep(dataset.size(), false);
  for (int c = 0; c < k; ++c) {
    const double frac =
        std::pow(1.0 / imbalance_factor, static_cast<double>(c) / (k - 1));
    const auto target = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor(static_cast<double>(n_max) * frac)));
    const auto& avail = by_class[static_cast<std::size_t>(c)];
    if (target > avail.size())
      throw std::runtime_error("class " + std::to_string(c) +
                               " has too few samples for the long-tail profile");
    const auto picked = rng.sample_without_replacement(
        static_cast<int>(avail.size()), static_cast<int>(target));
    for (int j : picked) keep[static_cast<std::size_t>(avail[static_cast<std::size_t>(j)])] = true;
  }

  Dataset out;
  out.n_classes = k;
  out.name = dataset.name + "-longtail";
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (!keep[i]) continue;
    out.features.append_row(dataset.features.row(i));
    out.labels.push_back(dataset.labels[i]);
  }
  return out;
}

SplitPlan plan_split(const Dataset& dataset, int warmup_size, double test_fraction,
                     bool balanced, RngStream& rng) {
  const int n = static_cast<int>(dataset.size());
  if (warmup_size < 0) throw std::invalid_argument("negative warm-up size");
  if (test_fraction < 0.0 || test_fraction >= 1.0)
    throw std::invalid_argument("test fraction must lie in [0, 1)");
  const int test_size = static_cast<int>(std::floor(n * test_fraction));
  if (warmup_size + test_size > n)
    throw std::invalid_argument("warm-up plus test exceeds dataset size");

  SplitPlan plan;
  plan.warmup_size = warmup_size;
  plan.warmup_balanced = balanced;
  plan.seed = rng.seed();

  std::vector<int> idx(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  rng.shuffle(idx);

  plan.test.assign(idx.begin(), idx.begin() + test_size);
  std::sort(plan.test.begin(), plan.test.end());
  const std::vector<int> remaining(idx.begin() + test_size, idx.end());

  if (!balanced || warmup_size == 0) {
    plan.warmup.assign(remaining.begin(), remaining.begin() + warmup_size);
    plan.pool.assign(remaining.begin() + warmup_size, remaining.end());
    return plan;
  }

  const int k = dataset.n_classes;
  if (k < 1) throw std::invalid_argument("balanced warm-up needs classes");
  std::vector<int> quota(static_cast<std::size_t>(k), warmup_size / k);
  if (warmup_size % k != 0) {
    // the remainder goes to randomly chosen classes
    std::vector<int> order(static_cast<std::size_t>(k));
    for (int c = 0; c < k; ++c) order[static_cast<std::size_t>(c)] = c;
    rng.shuffle(order);
    for (int r = 0; r < warmup_size % k; ++r)
      ++quota[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])];
  }

  std::vector<int> taken(static_cast<std::size_t>(k), 0);
  std::vector<bool> in_warmup(dataset.size(), false);
  int filled = 0;
  for (int i : remaining) {
    const int c = dataset.labels[static_cast<std::size_t>(i)];
    if (taken[static_cast<std::size_t>(c)] < quota[static_cast<std::size_t>(c)]) {
      ++taken[static_cast<std::size_t>(c)];
      in_warmup[static_cast<std::size_t>(i)] = true;
      plan.warmup.push_back(i);
      if (++filled == warmup_size) break;
    }
  }
  if (filled != warmup_size)
    throw std::runtime_error("not enough samples per class for a balanced warm-up");
  for (int i : remaining)
    if (!in_warmup[static_cast<std::size_t>(i)]) plan.pool.push_back(i);
  return plan;
}

}  // namespace cusal
