// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sepred/dataset.hpp"
#include "sepred/errors.hpp"
#include "sepred/gnn.hpp"
#include "sepred/metrics.hpp"
#include "sepred/neural.hpp"

namespace sepred {

struct TrainConfig {
  int batch_size = 32;
  int max_epochs = 8000;
  int patience = 2000;
  double loss_threshold = 0.15;
  bool use_loss_threshold = true;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
  int k_folds = 5;
  std::uint64_t seed = 0;
  double validation_fraction = 0.1;
  double threshold = 0.5;  // classification threshold for metrics
  GnnArch arch;

  void validate() const {
    if (batch_size < 1) throw DataError("batch_size must be >= 1");
    if (validation_fraction <= 0.0 || validation_fraction >= 1.0)
      throw DataError("validation_fraction must lie in (0, 1)");
    if (use_loss_threshold && loss_threshold <= 0.0)
      throw DataError("loss_threshold must be positive");
    if (k_folds < 2) throw DataError("k_folds must be >= 2");
  }

  AdamConfig adam() const { return {learning_rate, beta1, beta2, epsilon}; }
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainResult {
  GnnParams params;          // weights at the best validation loss
  std::vector<EpochRecord> history;
  double best_val_loss = 0.0;
  int best_epoch = -1;
  std::string stop_reason;   // "max_epochs" | "patience" | "loss_threshold"
};

namespace detail {

inline Eigen::VectorXd target_vector(const MolGraph& g) {
  Eigen::VectorXd t(static_cast<Eigen::Index>(g.target.size()));
  for (size_t i = 0; i < g.target.size(); ++i) t[static_cast<Eigen::Index>(i)] = g.target[i];
  return t;
}

inline double graph_loss(const GnnParams& params, const MolGraph& g,
                         const Eigen::VectorXd& target) {
  return bce_loss(gnn_forward(params, g), target).first;
}

}  // namespace detail

/// Trains on every fold except test_fold, carving a deterministic validation
/// slice for early stopping. Returns the parameters with the best recorded
/// validation loss.
inline TrainResult train_fold(const SePredDataset& dataset, int test_fold,
                              GnnParams params, const TrainConfig& config) {
  config.validate();

  std::vector<size_t> train_idx;
  for (size_t i = 0; i < dataset.drugs.size(); ++i)
    if (dataset.drugs[i].fold != test_fold) train_idx.push_back(i);
  if (train_idx.empty()) throw DataError("train_fold: empty training set");

  std::mt19937_64 rng(config.seed * 0x9e3779b97f4a7c15ULL +
                      static_cast<std::uint64_t>(test_fold + 1));
  std::shuffle(train_idx.begin(), train_idx.end(), rng);
  size_t n_val = std::max<size_t>(
      1, static_cast<size_t>(config.validation_fraction *
                             static_cast<double>(train_idx.size())));
  if (n_val >= train_idx.size()) n_val = train_idx.size() - 1;
  std::vector<size_t> val_idx(train_idx.begin(), train_idx.begin() + n_val);
  train_idx.erase(train_idx.begin(), train_idx.begin() + n_val);
  if (train_idx.empty()) throw DataError("train_fold: empty training set");

  std::vector<Eigen::VectorXd> targets(dataset.drugs.size());
  for (size_t i = 0; i < dataset.drugs.size(); ++i)
    targets[i] = detail::target_vector(dataset.drugs[i].graph);

  AdamState adam(config.adam());
  std::vector<TensorRef> param_refs;
  collect_tensor_refs(params.state_net, "f_w", param_refs);
  collect_tensor_refs(params.output_net, "g_w", param_refs);

  TrainResult result;
  GnnParams best_params = params;
  double best_val = std::numeric_limits<double>::infinity();
  int best_epoch = -1;
  int since_improve = 0;
  result.stop_reason = "max_epochs";

  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    std::shuffle(train_idx.begin(), train_idx.end(), rng);
    double loss_sum = 0.0;
    for (size_t start = 0; start < train_idx.size();
         start += static_cast<size_t>(config.batch_size)) {
      size_t end = std::min(train_idx.size(),
                            start + static_cast<size_t>(config.batch_size));
      GnnGrads grads = GnnGrads::zeros_like(params);
      for (size_t b = start; b < end; ++b) {
        const auto& drug = dataset.drugs[train_idx[b]];
        GnnForwardCache cache;
        Eigen::VectorXd y = gnn_forward(params, drug.graph, &cache);
        auto [loss, dy] = bce_loss(y, targets[train_idx[b]]);
        if (!std::isfinite(loss))
          throw NumericalError("non-finite training loss");
        loss_sum += loss;
        gnn_backward(params, drug.graph, cache, dy, grads);
      }
      grads *= 1.0 / static_cast<double>(end - start);
      std::vector<TensorRef> grad_refs;
      collect_tensor_refs(grads.state_net, "f_w", grad_refs);
      collect_tensor_refs(grads.output_net, "g_w", grad_refs);
      adam.step(param_refs, grad_refs);
    }
    double train_loss = loss_sum / static_cast<double>(train_idx.size());

    double val_loss = 0.0;
    for (size_t i : val_idx)
      val_loss += detail::graph_loss(params, dataset.drugs[i].graph, targets[i]);
    val_loss /= static_cast<double>(val_idx.size());

    result.history.push_back({epoch, train_loss, val_loss});

    if (val_loss < best_val) {
      best_val = val_loss;
      best_params = params;
      best_epoch = epoch;
      since_improve = 0;
    } else {
      ++since_improve;
    }

    if (config.use_loss_threshold && train_loss <= config.loss_threshold) {
      result.stop_reason = "loss_threshold";
      break;
    }
    if (since_improve >= config.patience) {
      result.stop_reason = "patience";
      break;
    }
  }

  result.params = std::move(best_params);
  result.best_val_loss = best_val;
  result.best_epoch = best_epoch;
  return result;
}

/// Scores every drug of one fold with the given parameters.
inline MetricsReport evaluate_fold(const GnnParams& params,
                                   const SePredDataset& dataset, int fold,
                                   double threshold = 0.5, int top_n = 10) {
  std::vector<size_t> idx;
  for (size_t i = 0; i < dataset.drugs.size(); ++i)
    if (dataset.drugs[i].fold == fold) idx.push_back(i);
  if (idx.empty()) throw DataError("evaluate_fold: empty fold");

  const int C = params.num_classes();
  Eigen::MatrixXd scores(static_cast<Eigen::Index>(idx.size()), C);
  Eigen::MatrixXd targets(static_cast<Eigen::Index>(idx.size()), C);
  for (size_t r = 0; r < idx.size(); ++r) {
    scores.row(static_cast<Eigen::Index>(r)) =
        gnn_forward(params, dataset.drugs[idx[r]].graph).transpose();
    targets.row(static_cast<Eigen::Index>(r)) =
        detail::target_vector(dataset.drugs[idx[r]].graph).transpose();
  }
  return evaluate_scores(scores, targets, dataset.vocab_counts(), threshold,
                         top_n);
}

struct CvAggregate {
  MeanDev binary_accuracy, auc, aupr, ppv, npv, sensitivity, specificity;
};

struct CvResult {
  std::vector<MetricsReport> fold_reports;
  std::vector<TrainResult> fold_training;
  CvAggregate aggregate;
};

inline CvAggregate aggregate_reports(const std::vector<MetricsReport>& reports) {
  auto pull = [&](auto getter) {
    std::vector<double> vals;
    for (const auto& r : reports) vals.push_back(getter(r));
    return mean_dev(vals);
  };
  CvAggregate agg;
  agg.binary_accuracy = pull([](const MetricsReport& r) { return r.binary_accuracy; });
  agg.auc = pull([](const MetricsReport& r) { return r.auc; });
  agg.aupr = pull([](const MetricsReport& r) { return r.aupr; });
  agg.ppv = pull([](const MetricsReport& r) { return r.confusion.ppv.mean; });
  agg.npv = pull([](const MetricsReport& r) { return r.confusion.npv.mean; });
  agg.sensitivity =
      pull([](const MetricsReport& r) { return r.confusion.sensitivity.mean; });
  agg.specificity =
      pull([](const MetricsReport& r) { return r.confusion.specificity.mean; });
  return agg;
}

/// k-fold cross-validation: trains one model per fold and aggregates the
/// per-fold metrics as mean +/- sample standard deviation.
inline CvResult cross_validate(const SePredDataset& dataset,
                               const TrainConfig& config) {
  config.validate();
  if (dataset.k_folds < config.k_folds)
    throw DataError("dataset has fewer folds than requested");
  CvResult result;
  const int C = static_cast<int>(dataset.vocab.size());
  for (int fold = 0; fold < config.k_folds; ++fold) {
    GnnParams init = init_gnn_params(
        config.arch, C, config.seed + 7919ULL * static_cast<std::uint64_t>(fold));
    TrainResult trained = train_fold(dataset, fold, std::move(init), config);
    result.fold_reports.push_back(
        evaluate_fold(trained.params, dataset, fold, config.threshold));
    result.fold_training.push_back(std::move(trained));
  }
  result.aggregate = aggregate_reports(result.fold_reports);
  return result;
}

// ---------------------------------------------------------------------------
// Structured report emission.

inline std::string history_to_csv(const std::vector<EpochRecord>& history) {
  std::ostringstream out;
  out << "epoch,train_loss,val_loss\n";
  out.precision(17);
  for (const auto& e : history)
    out << e.epoch << ',' << e.train_loss << ',' << e.val_loss << '\n';
  return out.str();
}

inline nlohmann::ordered_json mean_dev_to_json(const MeanDev& m) {
  return {{"mean", m.mean}, {"dev", m.dev}};
}

inline nlohmann::ordered_json metrics_report_to_json(const MetricsReport& r) {
  nlohmann::ordered_json j;
  j["binary_accuracy"] = r.binary_accuracy;
  j["auc"] = r.auc;
  j["aupr"] = r.aupr;
  j["confusion"] = {{"tp", r.confusion.tp},
                    {"fp", r.confusion.fp},
                    {"tn", r.confusion.tn},
                    {"fn", r.confusion.fn},
                    {"ppv", mean_dev_to_json(r.confusion.ppv)},
                    {"npv", mean_dev_to_json(r.confusion.npv)},
                    {"sensitivity", mean_dev_to_json(r.confusion.sensitivity)},
                    {"specificity", mean_dev_to_json(r.confusion.specificity)},
                    {"excluded_drug_count", r.confusion.excluded_drug_count}};
  j["dse_frequency"] = {{"top_n", r.dse.top_n},
                        {"most_frequent", mean_dev_to_json(r.dse.most_frequent)},
                        {"least_frequent", mean_dev_to_json(r.dse.least_frequent)},
                        {"overall", mean_dev_to_json(r.dse.overall)}};
  return j;
}

inline nlohmann::ordered_json cv_aggregate_to_json(const CvAggregate& a) {
  nlohmann::ordered_json j;
  j["binary_accuracy"] = mean_dev_to_json(a.binary_accuracy);
  j["auc"] = mean_dev_to_json(a.auc);
  j["aupr"] = mean_dev_to_json(a.aupr);
  j["ppv"] = mean_dev_to_json(a.ppv);
  j["npv"] = mean_dev_to_json(a.npv);
  j["sensitivity"] = mean_dev_to_json(a.sensitivity);
  j["specificity"] = mean_dev_to_json(a.specificity);
  return j;
}

}  // namespace sepred
