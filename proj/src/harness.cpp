#include "cusal/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <numeric>
#include <set>
#include <stdexcept>

#include "cusal/acquisition.hpp"
#include "cusal/calibration.hpp"
#include "cusal/dataset.hpp"
#include "cusal/mlp.hpp"
#include "cusal/special.hpp"

namespace cusal {

void LabeledSet::add(std::span<const double> x, int y, int round) {
  features.append_row(x);
  labels.push_back(y);
  acquired_round.push_back(round);
}

PoolSet::PoolSet(Matrix features, std::vector<int> hidden_labels)
    : all_features_(std::move(features)), all_labels_(std::move(hidden_labels)) {
  if (all_features_.rows() != all_labels_.size())
    throw std::invalid_argument("pool features/labels length mismatch");
  revealed_.assign(all_labels_.size(), false);
  remaining_.resize(all_labels_.size());
  std::iota(remaining_.begin(), remaining_.end(), 0);
  rebuild();
}

void PoolSet::rebuild() {
  compact_features_ = all_features_.select_rows(remaining_);
  compact_labels_.clear();
  compact_labels_.reserve(remaining_.size());
  for (int id : remaining_)
    compact_labels_.push_back(all_labels_[static_cast<std::size_t>(id)]);
}

std::vector<int> PoolSet::reveal(const std::vector<int>& positions) {
  std::vector<bool> in_batch(remaining_.size(), false);
  for (int p : positions) {
    if (p < 0 || p >= size()) throw std::out_of_range("pool position out of range");
    if (in_batch[static_cast<std::size_t>(p)])
      throw std::invalid_argument("duplicate pool position in batch");
    in_batch[static_cast<std::size_t>(p)] = true;
  }
  std::vector<int> labels;
  labels.reserve(positions.size());
  for (int p : positions) {
    const int id = remaining_[static_cast<std::size_t>(p)];
    if (revealed_[static_cast<std::size_t>(id)])
      throw std::logic_error("sample already revealed");
    revealed_[static_cast<std::size_t>(id)] = true;
    labels.push_back(all_labels_[static_cast<std::size_t>(id)]);
  }
  std::vector<int> next;
  next.reserve(remaining_.size() - positions.size());
  for (std::size_t pos = 0; pos < remaining_.size(); ++pos)
    if (!in_batch[pos]) next.push_back(remaining_[pos]);
  remaining_ = std::move(next);
  rebuild();
  return labels;
}

namespace {

Dataset build_dataset(const ExperimentConfig& cfg, RngStream& rng) {
  Dataset data;
  if (cfg.dataset == "idx") {
    data = load_idx(cfg.idx_images, cfg.idx_labels);
  } else {
    GaussianMixture mixture(cfg.synth, rng);
    data = mixture.dataset();
  }
  if (cfg.subset > 0 && cfg.subset < static_cast<int>(data.size())) {
    auto pick = rng.sample_without_replacement(static_cast<int>(data.size()),
                                              cfg.subset);
    std::sort(pick.begin(), pick.end());
    Dataset sub;
    sub.n_classes = data.n_classes;
    sub.name = data.name;
    sub.features = data.features.select_rows(pick);
    for (int i : pick) sub.labels.push_back(data.labels[static_cast<std::size_t>(i)]);
    data = std::move(sub);
  }
  if (cfg.imbalance_factor > 1.0)
    data = make_longtail(data, cfg.imbalance_factor, rng);
  return data;
}

double mean_of(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

/// Mean absolute difference between the hidden-label estimate (labeled
/// references only) and the label-revealed estimate (pool plus labeled
/// references, true pool labels substituted in).
}  // namespace

double estimator_gap(const std::vector<ProbVector>& pool_fc,
                     const std::vector<ProbVector>& labeled_fc,
                     const std::vector<int>& labeled_labels,
                     const std::vector<int>& pool_labels,
                     const CalibrationConfig& cal) {
  const auto hidden =
      per_sample_calibration_error(pool_fc, labeled_fc, labeled_labels, cal);
  std::vector<ProbVector> refs = pool_fc;
  refs.insert(refs.end(), labeled_fc.begin(), labeled_fc.end());
  std::vector<int> ref_labels = pool_labels;
  ref_labels.insert(ref_labels.end(), labeled_labels.begin(), labeled_labels.end());
  const auto revealed = per_sample_calibration_error(pool_fc, refs, ref_labels, cal);
  double total = 0.0;
  for (std::size_t j = 0; j < hidden.size(); ++j)
    total += std::abs(hidden[j] - revealed[j]);
  return hidden.empty() ? 0.0 : total / static_cast<double>(hidden.size());
}

std::vector<RoundRecord> run_replica(const ExperimentConfig& cfg,
                                     const std::string& strategy,
                                     std::uint64_t seed,
                                     std::vector<double>* gap_curve) {
  if (!strategy_registered(strategy))
    throw std::runtime_error("unknown strategy '" + strategy + "'");

  RngStream master(seed);
  RngStream data_rng = master.child(0);
  const Dataset data = build_dataset(cfg, data_rng);
  if (data.n_classes < 2)
    throw std::runtime_error("dataset needs at least 2 classes");
  const SplitPlan plan = plan_split(data, cfg.warmup_size, cfg.test_fraction,
                                    cfg.warmup_balanced, data_rng);

  LabeledSet labeled;
  for (int i : plan.warmup)
    labeled.add(data.features.row(static_cast<std::size_t>(i)),
                data.labels[static_cast<std::size_t>(i)], 0);
  std::vector<int> pool_labels;
  pool_labels.reserve(plan.pool.size());
  for (int i : plan.pool) pool_labels.push_back(data.labels[static_cast<std::size_t>(i)]);
  PoolSet pool(data.features.select_rows(plan.pool), std::move(pool_labels));
  const Matrix test_features = data.features.select_rows(plan.test);
  std::vector<int> test_labels;
  test_labels.reserve(plan.test.size());
  for (int i : plan.test) test_labels.push_back(data.labels[static_cast<std::size_t>(i)]);

  MlpClassifier model(static_cast<int>(data.features.cols()), cfg.hidden,
                      data.n_classes, cfg.dropout);
  TrainConfig train_cfg = cfg.train;
  train_cfg.reinit_each_round = true;

  RngStream warmup_rng = master.child(1);
  model.train(labeled.features, labeled.labels, train_cfg, warmup_rng);
  RngStream strategy_rng = master.child(2);

  // forecasts of the current model on the current pool/labeled sets; refreshed
  // after every retrain, reused for both evaluation and the next selection
  std::vector<ProbVector> pool_fc;
  std::vector<ProbVector> labeled_fc;
  auto refresh_forecasts = [&]() {
    pool_fc = pool.size() > 0 ? model.predict_proba(pool.features())
                              : std::vector<ProbVector>{};
    labeled_fc = model.predict_proba(labeled.features);
  };

  auto acq_scores = [&]() {
    AcquisitionScores s;
    s.calibration = per_sample_calibration_error(pool_fc, labeled_fc,
                                                 labeled.labels, cfg.calibration);
    s.confidence.reserve(pool_fc.size());
    for (const auto& p : pool_fc) s.confidence.push_back(p.max_prob());
    return s;
  };

  auto subset_forecasts = [&](std::span<const int> rows) {
    std::vector<ProbVector> out;
    out.reserve(rows.size());
    for (int r : rows) out.push_back(pool_fc[static_cast<std::size_t>(r)]);
    return out;
  };

  auto map_back = [](QueryResult r, std::span<const int> candidates) {
    for (int& i : r.indices) i = candidates[static_cast<std::size_t>(i)];
    return r;
  };

  // second-stage cluster pick: group shortlisted samples into k clusters and
  // take the best member of each, smallest cluster first
  auto cluster_stage = [&](std::span<const int> candidates, int n_select,
                           const std::function<bool(int, int)>& better) {
    std::vector<int> cvec(candidates.begin(), candidates.end());
    const Matrix sub_features = pool.features().select_rows(cvec);
    const Matrix emb = model.penultimate_embedding(sub_features);
    const auto clusters = average_linkage_clusters(emb, n_select);
    QueryResult out;
    for (const auto& members : clusters) {
      int best = members.front();
      for (int local : members)
        if (better(cvec[static_cast<std::size_t>(local)],
                   cvec[static_cast<std::size_t>(best)]))
          best = local;
      out.indices.push_back(cvec[static_cast<std::size_t>(best)]);
      out.reasons.push_back(SelectionReason::kStrategySpecific);
    }
    return out;
  };

  auto select_batch = [&](int k) -> QueryResult {
    const int m = pool.size();
    const int k_m = std::clamp(cfg.shortlist_factor * k, k, m);

    if (strategy == "cusal") return cusal_select(acq_scores(), k, cfg.tie);
    if (strategy == "random") return random_select(m, k, strategy_rng);
    if (strategy == "least_confident") return least_confident_select(pool_fc, k);
    if (strategy == "margin") return margin_select(pool_fc, k);
    if (strategy == "entropy") return entropy_select(pool_fc, k);
    if (strategy == "bald")
      return bald_select(
          model.mc_dropout_predict(pool.features(), cfg.mc_samples, strategy_rng), k);
    if (strategy == "coreset")
      return coreset_select(model.penultimate_embedding(pool.features()),
                            model.penultimate_embedding(labeled.features), k);
    if (strategy == "badge")
      return badge_select(model.gradient_embedding(pool.features()), k, strategy_rng);

    if (strategy == "rand_entropy") {
      SubsetStrategy first = [&](std::span<const int> c, int n) {
        return map_back(random_select(static_cast<int>(c.size()), n, strategy_rng), c);
      };
      SubsetStrategy second = [&](std::span<const int> c, int n) {
        return map_back(entropy_select(subset_forecasts(c), n), c);
      };
      return two_stage_select(first, k_m, second, k, m);
    }
    if (strategy == "cluster_margin") {
      SubsetStrategy first = [&](std::span<const int> c, int n) {
        return map_back(margin_select(subset_forecasts(c), n), c);
      };
      SubsetStrategy second = [&](std::span<const int> c, int n) {
        return cluster_stage(c, n, [&](int a, int b) {
          const double ga = pool_fc[static_cast<std::size_t>(a)].margin();
          const double gb = pool_fc[static_cast<std::size_t>(b)].margin();
          if (ga != gb) return ga < gb;
          return a < b;
        });
      };
      return two_stage_select(first, k_m, second, k, m);
    }
    if (strategy == "cluster_cusal") {
      const AcquisitionScores scores = acq_scores();
      std::vector<double> rounded(scores.calibration.size());
      for (std::size_t i = 0; i < rounded.size(); ++i)
        rounded[i] = cfg.tie.round(scores.calibration[i]);
      SubsetStrategy first = [&](std::span<const int> c, int n) {
        AcquisitionScores sub;
        for (int r : c) {
          sub.calibration.push_back(scores.calibration[static_cast<std::size_t>(r)]);
          sub.confidence.push_back(scores.confidence[static_cast<std::size_t>(r)]);
        }
        return map_back(cusal_select(sub, n, cfg.tie), c);
      };
      SubsetStrategy second = [&](std::span<const int> c, int n) {
        return cluster_stage(c, n, [&](int a, int b) {
          const auto sa = static_cast<std::size_t>(a), sb = static_cast<std::size_t>(b);
          if (rounded[sa] != rounded[sb]) return rounded[sa] > rounded[sb];
          if (scores.confidence[sa] != scores.confidence[sb])
            return scores.confidence[sa] < scores.confidence[sb];
          return a < b;
        });
      };
      return two_stage_select(first, k_m, second, k, m);
    }

    if (strategy == "combo_uniform")
      return weighted_combo_select(acq_scores(), ComboWeighting{false, 1.0}, k);
    if (strategy == "combo_adaptive")
      return weighted_combo_select(
          acq_scores(), ComboWeighting{true, cfg.combo_multiplier}, k);
    if (strategy == "calibration_only")
      return calibration_only_select(acq_scores(), k);

    if (strategy == "least_confident_ts") {
      // hold out 20% of the labeled set to fit the temperature
      const int n = labeled.size();
      const int n_val = std::max(1, n / 5);
      const auto val_idx = strategy_rng.sample_without_replacement(n, n_val);
      const Matrix val_inputs = labeled.features.select_rows(val_idx);
      std::vector<int> val_labels;
      for (int i : val_idx) val_labels.push_back(labeled.labels[static_cast<std::size_t>(i)]);
      const TemperatureScaler scaler =
          fit_temperature(model.logits(val_inputs), val_labels);
      const auto scaled = scaler.apply(model.logits(pool.features()));
      return least_confident_select(scaled, k);
    }
    throw std::logic_error("unhandled strategy " + strategy);
  };

  std::vector<RoundRecord> records;
  auto evaluate = [&](int round, int n_cal, int n_unc, double secs) {
    RoundRecord r;
    r.round = round;
    r.n_labeled = labeled.size();
    r.pool_size = pool.size();
    if (!test_labels.empty()) {
      const auto test_fc = model.predict_proba(test_features);
      int correct = 0;
      for (std::size_t i = 0; i < test_labels.size(); ++i)
        if (test_fc[i].argmax() == test_labels[i]) ++correct;
      r.test_acc = static_cast<double>(correct) / static_cast<double>(test_labels.size());
      r.test_ece = expected_calibration_error(test_fc, test_labels, cfg.ece);
    }
    if (pool.size() > 0) {
      r.pool_ece =
          expected_calibration_error(pool_fc, pool.evaluation_labels(), cfg.ece);
      r.mean_pool_cal_estimate = mean_of(per_sample_calibration_error(
          pool_fc, labeled_fc, labeled.labels, cfg.calibration));
    }
    r.n_cal_selected = n_cal;
    r.n_unc_selected = n_unc;
    r.wallclock_s = secs;
    records.push_back(r);
  };

  const bool timed = cfg.timing == "wall";
  refresh_forecasts();
  evaluate(0, 0, 0, 0.0);

  for (int t = 1; t <= cfg.rounds; ++t) {
    if (pool.size() == 0) {
      std::cerr << "warning: pool exhausted, stopping at round " << (t - 1) << "\n";
      break;
    }
    const auto start = std::chrono::steady_clock::now();
    const int k = std::min(cfg.batch, pool.size());

    if (gap_curve)
      gap_curve->push_back(estimator_gap(pool_fc, labeled_fc, labeled.labels,
                                         pool.evaluation_labels(), cfg.calibration));

    const QueryResult sel = select_batch(k);
    int n_cal = 0, n_unc = 0;
    if (strategy == "cusal") {
      n_cal = sel.count(SelectionReason::kDistinctCalibration);
      n_unc = sel.count(SelectionReason::kTieBrokenByUncertainty);
    }

    std::vector<std::vector<double>> new_rows;
    new_rows.reserve(sel.indices.size());
    for (int pos : sel.indices) {
      const auto row = pool.features().row(static_cast<std::size_t>(pos));
      new_rows.emplace_back(row.begin(), row.end());
    }
    const std::vector<int> new_labels = pool.reveal(sel.indices);
    for (std::size_t i = 0; i < new_labels.size(); ++i)
      labeled.add(new_rows[i], new_labels[i], t);

    RngStream round_rng = master.child(100 + static_cast<std::uint64_t>(t));
    model.train(labeled.features, labeled.labels, train_cfg, round_rng);
    refresh_forecasts();

    double secs = 0.0;
    if (timed)
      secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                 .count();
    evaluate(t, n_cal, n_unc, secs);
  }
  return records;
}

std::vector<double> estimator_gap_study(const ExperimentConfig& cfg,
                                        const std::string& strategy,
                                        std::uint64_t seed) {
  std::vector<double> gaps;
  run_replica(cfg, strategy, seed, &gaps);
  return gaps;
}

double welch_p_value(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2)
    throw std::invalid_argument("Welch test needs at least 2 samples per side");
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double ma = mean_of(a), mb = mean_of(b);
  double va = 0.0, vb = 0.0;
  for (double x : a) va += (x - ma) * (x - ma);
  for (double x : b) vb += (x - mb) * (x - mb);
  va /= na - 1.0;
  vb /= nb - 1.0;
  const double sa = va / na, sb = vb / nb;
  const double se2 = sa + sb;
  if (se2 == 0.0) return ma == mb ? 1.0 : 0.0;
  const double t = (ma - mb) / std::sqrt(se2);
  const double df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
  return student_t_two_sided_p(t, df);
}

RunSummary aggregate(const std::vector<StrategyRuns>& runs) {
  if (runs.empty()) throw std::invalid_argument("no runs to aggregate");
  std::size_t length = 0;
  bool first = true;
  for (const auto& sr : runs) {
    if (sr.per_seed.empty())
      throw std::invalid_argument("strategy " + sr.strategy + " has no replicas");
    for (const auto& records : sr.per_seed) {
      if (first) {
        length = records.size();
        first = false;
      }
      if (records.size() != length)
        throw std::invalid_argument("replica record counts differ");
    }
  }
  if (length == 0) throw std::invalid_argument("empty replica records");

  RunSummary summary;
  summary.rounds = static_cast<int>(length) - 1;

  auto summarize = [&](const StrategyRuns& sr, auto metric) {
    MetricSummary ms;
    const std::size_t n_seeds = sr.per_seed.size();
    for (std::size_t r = 0; r < length; ++r) {
      double m = 0.0;
      for (const auto& records : sr.per_seed) m += metric(records[r]);
      m /= static_cast<double>(n_seeds);
      ms.mean.push_back(m);
    }
    if (n_seeds >= 2) {
      for (std::size_t r = 0; r < length; ++r) {
        double v = 0.0;
        for (const auto& records : sr.per_seed) {
          const double d = metric(records[r]) - ms.mean[r];
          v += d * d;
        }
        ms.stddev.push_back(std::sqrt(v / static_cast<double>(n_seeds - 1)));
      }
    }
    return ms;
  };

  for (const auto& sr : runs) {
    StrategySummary ss;
    ss.strategy = sr.strategy;
    ss.test_acc = summarize(sr, [](const RoundRecord& r) { return r.test_acc; });
    ss.test_ece = summarize(sr, [](const RoundRecord& r) { return r.test_ece; });
    ss.pool_ece = summarize(sr, [](const RoundRecord& r) { return r.pool_ece; });
    summary.strategies.push_back(std::move(ss));
  }

  const int t_final = summary.rounds;
  std::set<int> test_rounds{t_final / 4, t_final / 2, 3 * t_final / 4, t_final};
  for (std::size_t i = 0; i < runs.size(); ++i) {
    for (std::size_t j = i + 1; j < runs.size(); ++j) {
      if (runs[i].per_seed.size() < 2 || runs[j].per_seed.size() < 2) continue;
      for (int r : test_rounds) {
        auto gather = [&](const StrategyRuns& sr, auto metric) {
          std::vector<double> xs;
          for (const auto& records : sr.per_seed)
            xs.push_back(metric(records[static_cast<std::size_t>(r)]));
          return xs;
        };
        const struct {
          const char* name;
          double (*get)(const RoundRecord&);
        } metrics[] = {
            {"test_acc", [](const RoundRecord& rec) { return rec.test_acc; }},
            {"test_ece", [](const RoundRecord& rec) { return rec.test_ece; }},
        };
        for (const auto& metric : metrics) {
          WelchResult w;
          w.metric = metric.name;
          w.round = r;
          w.strategy_a = runs[i].strategy;
          w.strategy_b = runs[j].strategy;
          const auto xa = gather(runs[i], metric.get);
          const auto xb = gather(runs[j], metric.get);
          w.mean_a = mean_of(xa);
          w.mean_b = mean_of(xb);
          w.p_value = welch_p_value(xa, xb);
          summary.welch.push_back(std::move(w));
        }
      }
    }
  }
  return summary;
}

}  // namespace cusal
