// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "sepred/errors.hpp"

namespace sepred {

struct MeanDev {
  double mean = 0.0;
  double dev = 0.0;
};

/// Mean and sample standard deviation (0 for fewer than two values).
inline MeanDev mean_dev(const std::vector<double>& values) {
  if (values.empty()) return {std::numeric_limits<double>::quiet_NaN(), 0.0};
  double mean = std::accumulate(values.begin(), values.end(), 0.0) /
                static_cast<double>(values.size());
  if (values.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(values.size() - 1))};
}

/// Element-wise match rate between thresholded scores and binary targets,
/// as a percentage over all (drug, class) pairs.
inline double binary_accuracy(const Eigen::MatrixXd& scores,
                              const Eigen::MatrixXd& targets,
                              double threshold = 0.5) {
  if (scores.size() == 0) throw DataError("binary_accuracy: empty input");
  if (scores.rows() != targets.rows() || scores.cols() != targets.cols())
    throw DataError("binary_accuracy: shape mismatch");
  long matches = 0;
  for (Eigen::Index r = 0; r < scores.rows(); ++r)
    for (Eigen::Index c = 0; c < scores.cols(); ++c) {
      int pred = scores(r, c) >= threshold ? 1 : 0;
      int t = targets(r, c) > 0.5 ? 1 : 0;
      if (pred == t) ++matches;
    }
  return 100.0 * static_cast<double>(matches) /
         static_cast<double>(scores.size());
}

/// Rank-based ROC-AUC (Mann-Whitney statistic, ties counted half), as a
/// percentage. Requires at least one positive and one negative label.
inline double roc_auc(const std::vector<double>& scores,
                      const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw DataError("roc_auc: shape mismatch");
  const size_t n = scores.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return scores[a] < scores[b]; });

  // Average ranks over tie groups, then the U statistic from positive ranks.
  std::vector<double> rank(n);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (size_t k = i; k <= j; ++k) rank[order[k]] = avg;
    i = j + 1;
  }
  long n_pos = 0;
  double rank_sum = 0.0;
  for (size_t k = 0; k < n; ++k)
    if (labels[k] > 0) {
      ++n_pos;
      rank_sum += rank[k];
    }
  long n_neg = static_cast<long>(n) - n_pos;
  if (n_pos == 0 || n_neg == 0)
    throw DataError("roc_auc: undefined for single-class input");
  double u = rank_sum - static_cast<double>(n_pos) *
                            (static_cast<double>(n_pos) + 1.0) / 2.0;
  return 100.0 * u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

/// Area under the precision-recall curve by descending-score sweep with
/// trapezoidal interpolation between threshold points, anchored at
/// (recall 0, precision 1). Percentage.
inline double aupr(const std::vector<double>& scores,
                   const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw DataError("aupr: shape mismatch");
  long total_pos = std::count_if(labels.begin(), labels.end(),
                                 [](int l) { return l > 0; });
  if (total_pos == 0) throw DataError("aupr: no positive labels");

  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return scores[a] > scores[b]; });

  double area = 0.0;
  double prev_recall = 0.0;
  double prev_precision = 1.0;
  long tp = 0, fp = 0;
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i;
    while (j + 1 < order.size() &&
           scores[order[j + 1]] == scores[order[i]])
      ++j;
    for (size_t k = i; k <= j; ++k)
      (labels[order[k]] > 0 ? tp : fp) += 1;
    double recall = static_cast<double>(tp) / static_cast<double>(total_pos);
    double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    area += (recall - prev_recall) * (precision + prev_precision) / 2.0;
    prev_recall = recall;
    prev_precision = precision;
    i = j + 1;
  }
  return 100.0 * area;
}

struct ConfusionReport {
  long tp = 0, fp = 0, tn = 0, fn = 0;  // totals over all (drug, class) pairs
  MeanDev ppv, npv, sensitivity, specificity;  // per-drug averages
  int excluded_drug_count = 0;  // drugs with no predicted positives
};

/// Per-drug confusion metrics, averaged across drugs. Drugs where PPV is
/// undefined (no predicted positives) are excluded from the PPV average and
/// counted; other undefined cells are silently excluded from their average.
inline ConfusionReport confusion_metrics(const Eigen::MatrixXd& scores,
                                         const Eigen::MatrixXd& targets,
                                         double threshold = 0.5) {
  if (scores.rows() != targets.rows() || scores.cols() != targets.cols())
    throw DataError("confusion_metrics: shape mismatch");
  ConfusionReport r;
  std::vector<double> ppvs, npvs, senss, specs;
  for (Eigen::Index d = 0; d < scores.rows(); ++d) {
    long tp = 0, fp = 0, tn = 0, fn = 0;
    for (Eigen::Index c = 0; c < scores.cols(); ++c) {
      int pred = scores(d, c) >= threshold ? 1 : 0;
      int t = targets(d, c) > 0.5 ? 1 : 0;
      if (pred && t) ++tp;
      else if (pred && !t) ++fp;
      else if (!pred && !t) ++tn;
      else ++fn;
    }
    r.tp += tp; r.fp += fp; r.tn += tn; r.fn += fn;
    if (tp + fp > 0)
      ppvs.push_back(100.0 * tp / static_cast<double>(tp + fp));
    else
      ++r.excluded_drug_count;
    if (tn + fn > 0) npvs.push_back(100.0 * tn / static_cast<double>(tn + fn));
    if (tp + fn > 0) senss.push_back(100.0 * tp / static_cast<double>(tp + fn));
    if (tn + fp > 0) specs.push_back(100.0 * tn / static_cast<double>(tn + fp));
  }
  r.ppv = mean_dev(ppvs);
  r.npv = mean_dev(npvs);
  r.sensitivity = mean_dev(senss);
  r.specificity = mean_dev(specs);
  return r;
}

struct DseFrequencyReport {
  int top_n = 10;
  MeanDev most_frequent;
  MeanDev least_frequent;
  MeanDev overall;
};

/// Per-side-effect detection ratio (true positives / occurrences in the
/// evaluated targets), summarized for the top_n most and least frequent
/// side effects by dataset occurrence count, plus the overall average.
inline DseFrequencyReport dse_frequency_analysis(
    const Eigen::MatrixXd& scores, const Eigen::MatrixXd& targets,
    const std::vector<long>& vocab_counts, int top_n = 10,
    double threshold = 0.5) {
  const auto num_classes = scores.cols();
  if (static_cast<Eigen::Index>(vocab_counts.size()) != num_classes)
    throw DataError("dse_frequency_analysis: vocab count size mismatch");

  std::vector<double> ratio(num_classes,
                            std::numeric_limits<double>::quiet_NaN());
  for (Eigen::Index c = 0; c < num_classes; ++c) {
    long occ = 0, tp = 0;
    for (Eigen::Index d = 0; d < scores.rows(); ++d) {
      if (targets(d, c) > 0.5) {
        ++occ;
        if (scores(d, c) >= threshold) ++tp;
      }
    }
    if (occ > 0) ratio[c] = 100.0 * tp / static_cast<double>(occ);
  }

  std::vector<Eigen::Index> by_freq(num_classes);
  std::iota(by_freq.begin(), by_freq.end(), Eigen::Index{0});
  std::sort(by_freq.begin(), by_freq.end(), [&](Eigen::Index a, Eigen::Index b) {
    return vocab_counts[a] != vocab_counts[b] ? vocab_counts[a] > vocab_counts[b]
                                              : a < b;
  });

  auto collect = [&](auto begin, auto end) {
    std::vector<double> vals;
    for (auto it = begin; it != end; ++it)
      if (!std::isnan(ratio[*it])) vals.push_back(ratio[*it]);
    return vals;
  };

  DseFrequencyReport rep;
  rep.top_n = top_n;
  const auto n_take =
      std::min<Eigen::Index>(top_n, static_cast<Eigen::Index>(num_classes));
  rep.most_frequent = mean_dev(collect(by_freq.begin(), by_freq.begin() + n_take));
  rep.least_frequent = mean_dev(collect(by_freq.end() - n_take, by_freq.end()));
  rep.overall = mean_dev(collect(by_freq.begin(), by_freq.end()));
  return rep;
}

// All per-evaluation quantities: global rates, rank metrics, per-drug
// confusion averages, and the side-effect frequency analysis.
struct MetricsReport {
  double binary_accuracy = 0.0;
  double auc = 0.0;
  double aupr = 0.0;
  ConfusionReport confusion;
  DseFrequencyReport dse;
};

inline MetricsReport evaluate_scores(const Eigen::MatrixXd& scores,
                                     const Eigen::MatrixXd& targets,
                                     const std::vector<long>& vocab_counts,
                                     double threshold = 0.5, int top_n = 10) {
  MetricsReport rep;
  rep.binary_accuracy = binary_accuracy(scores, targets, threshold);
  std::vector<double> flat_scores(scores.size());
  std::vector<int> flat_labels(scores.size());
  size_t k = 0;
  for (Eigen::Index d = 0; d < scores.rows(); ++d)
    for (Eigen::Index c = 0; c < scores.cols(); ++c, ++k) {
      flat_scores[k] = scores(d, c);
      flat_labels[k] = targets(d, c) > 0.5 ? 1 : 0;
    }
  rep.auc = roc_auc(flat_scores, flat_labels);
  rep.aupr = aupr(flat_scores, flat_labels);
  rep.confusion = confusion_metrics(scores, targets, threshold);
  rep.dse = dse_frequency_analysis(scores, targets, vocab_counts, top_n,
                                   threshold);
  return rep;
}

}  // namespace sepred
