#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "hit/dataset.hpp"
#include "hit/embedding_table.hpp"
#include "hit/error.hpp"
#include "hit/hierarchy.hpp"
#include "hit/manifold.hpp"
#include "hit/parallel.hpp"

namespace hit {

struct ProbeParams {
  double lambda = 1.0;
  double threshold = 0.0;
  bool operator==(const ProbeParams&) const = default;
};

struct Metrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;
  bool operator==(const Metrics&) const = default;
};

struct GridSpec {
  std::vector<double> lambda_values{0.1, 0.2, 0.5, 1.0, 1.5, 2.0};
  /// Explicit thresholds; when empty, `threshold_quantiles` empirical
  /// quantiles of the validation scores plus -inf/+inf are used.
  std::vector<double> threshold_values;
  std::size_t threshold_quantiles = 512;
};

/// Subsumption score for e1 below e2:
///   -(d_c(e1, e2) + lambda * (|e2|_c - |e1|_c)).
inline double score(EntityId e1, EntityId e2, const EmbeddingTable& table, double lambda) {
  const auto& m = table.manifold();
  const auto u = table.row(e1);
  const auto v = table.row(e2);
  return -(distance(u, v, m) + lambda * (hnorm(v, m) - hnorm(u, m)));
}

inline Metrics metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn) {
  Metrics m{0.0, 0.0, 0.0, tp, fp, fn, tn};
  m.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  m.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  // Harmonic mean of P and R as a single quotient of counts.
  m.f1 = tp > 0 ? static_cast<double>(2 * tp) / static_cast<double>(2 * tp + fp + fn) : 0.0;
  return m;
}

inline Metrics precision_recall_f1(const std::vector<bool>& predictions,
                                   const std::vector<bool>& labels) {
  if (predictions.size() != labels.size())
    throw Error(ErrorKind::LengthMismatch, "probe_eval",
                std::to_string(predictions.size()) + " predictions for " +
                    std::to_string(labels.size()) + " labels");
  if (labels.empty()) throw Error(ErrorKind::LengthMismatch, "probe_eval", "no pairs to score");
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (predictions[i]) (labels[i] ? tp : fp)++;
    else (labels[i] ? fn : tn)++;
  }
  return metrics_from_counts(tp, fp, fn, tn);
}

inline std::vector<bool> labels_of(std::span<const LabeledPair> pairs) {
  std::vector<bool> out(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) out[i] = pairs[i].label;
  return out;
}

/// Distances and norm gaps |e2|_c - |e1|_c for each pair; the score for any
/// lambda is -(distance + lambda * gap).
struct PairGeometry {
  std::vector<double> distance;
  std::vector<double> norm_gap;

  double score(std::size_t i, double lambda) const { return -(distance[i] + lambda * norm_gap[i]); }
};

inline PairGeometry pair_geometry(std::span<const LabeledPair> pairs, const EmbeddingTable& table) {
  PairGeometry g{std::vector<double>(pairs.size()), std::vector<double>(pairs.size())};
  const auto& m = table.manifold();
  parallel_for(pairs.size(), [&](std::size_t i) {
    const auto u = table.row(pairs[i].child);
    const auto v = table.row(pairs[i].candidate_parent);
    g.distance[i] = distance(u, v, m);
    g.norm_gap[i] = hnorm(v, m) - hnorm(u, m);
  });
  return g;
}

/// Predicted true iff score >= threshold.
inline std::vector<bool> predict(std::span<const LabeledPair> pairs, const EmbeddingTable& table,
                                 const ProbeParams& params) {
  const auto g = pair_geometry(pairs, table);
  std::vector<bool> out(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) out[i] = g.score(i, params.lambda) >= params.threshold;
  return out;
}

/// Quantile thresholds of `scores` (evenly spaced order statistics) with the
/// -inf/+inf sentinels, sorted ascending and deduplicated.
inline std::vector<double> threshold_candidates(std::vector<double> scores, std::size_t quantiles) {
  std::vector<double> out{-std::numeric_limits<double>::infinity(),
                          std::numeric_limits<double>::infinity()};
  std::sort(scores.begin(), scores.end());
  if (!scores.empty() && quantiles > 0) {
    if (quantiles == 1) {
      out.push_back(scores.front());
    } else {
      for (std::size_t q = 0; q < quantiles; ++q)
        out.push_back(scores[q * (scores.size() - 1) / (quantiles - 1)]);
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

struct GridResult {
  ProbeParams params;
  Metrics metrics;
};

namespace detail {

/// Order on candidates: higher F1, then higher precision, then lower
/// threshold, then smaller lambda.
inline bool better(const GridResult& a, const GridResult& b) {
  if (a.metrics.f1 != b.metrics.f1) return a.metrics.f1 > b.metrics.f1;
  if (a.metrics.precision != b.metrics.precision) return a.metrics.precision > b.metrics.precision;
  if (a.params.threshold != b.params.threshold) return a.params.threshold < b.params.threshold;
  return a.params.lambda < b.params.lambda;
}

}  // namespace detail

/// Exhaustive search over lambda x threshold maximising validation F1.
inline GridResult grid_search(std::span<const LabeledPair> val_pairs, const EmbeddingTable& table,
                              const GridSpec& grid) {
  if (grid.lambda_values.empty())
    throw Error(ErrorKind::EmptyGrid, "probe_eval", "lambda grid is empty");
  if (grid.threshold_values.empty() && grid.threshold_quantiles == 0)
    throw Error(ErrorKind::EmptyGrid, "probe_eval", "threshold grid is empty");
  for (double l : grid.lambda_values)
    if (!(l > 0.0)) throw Error(ErrorKind::Config, "probe_eval", "lambda values must be positive");
  std::size_t n_pos = 0;
  for (const auto& p : val_pairs) n_pos += p.label ? 1 : 0;
  if (val_pairs.empty() || n_pos == 0)
    throw Error(ErrorKind::Config, "probe_eval", "validation set needs at least one positive pair");

  const auto geom = pair_geometry(val_pairs, table);
  std::vector<GridResult> per_lambda(grid.lambda_values.size());
  parallel_for(grid.lambda_values.size(), [&](std::size_t li) {
    const double lambda = grid.lambda_values[li];
    std::vector<double> all(val_pairs.size()), pos, neg;
    for (std::size_t i = 0; i < val_pairs.size(); ++i) {
      all[i] = geom.score(i, lambda);
      (val_pairs[i].label ? pos : neg).push_back(all[i]);
    }
    std::sort(pos.begin(), pos.end());
    std::sort(neg.begin(), neg.end());
    const auto thresholds = grid.threshold_values.empty()
                                ? threshold_candidates(std::move(all), grid.threshold_quantiles)
                                : grid.threshold_values;
    const auto at_least = [](const std::vector<double>& sorted, double t) {
      return static_cast<std::size_t>(sorted.end() - std::lower_bound(sorted.begin(), sorted.end(), t));
    };
    GridResult best{};
    bool have = false;
    for (double t : thresholds) {
      const std::size_t tp = at_least(pos, t);
      const std::size_t fp = at_least(neg, t);
      GridResult cand{{lambda, t}, metrics_from_counts(tp, fp, pos.size() - tp, neg.size() - fp)};
      if (!have || detail::better(cand, best)) {
        best = cand;
        have = true;
      }
    }
    per_lambda[li] = best;
  });
  GridResult best = per_lambda.front();
  for (const auto& r : per_lambda)
    if (detail::better(r, best)) best = r;
  return best;
}

/// Throws a coverage error naming every entity in `pairs` the table lacks.
inline void require_coverage(std::span<const LabeledPair> pairs, const EmbeddingTable& table,
                             const Lexicon* lexicon = nullptr) {
  std::vector<EntityId> missing;
  for (const auto& p : pairs)
    for (EntityId e : {p.child, p.candidate_parent})
      if (!table.covered(e)) missing.push_back(e);
  if (missing.empty()) return;
  std::sort(missing.begin(), missing.end());
  missing.erase(std::unique(missing.begin(), missing.end()), missing.end());
  std::string list;
  for (std::size_t i = 0; i < missing.size(); ++i) {
    if (i) list += ", ";
    list += lexicon && missing[i] < lexicon->size() ? lexicon->name(missing[i])
                                                    : "#" + std::to_string(missing[i]);
  }
  throw Error(ErrorKind::Coverage, "probe_eval",
              std::to_string(missing.size()) + " entities lack embeddings: " + list);
}

/// Test-split metrics with parameters frozen from validation.
inline Metrics evaluate(const TaskDataset& ds, const EmbeddingTable& table, const ProbeParams& params,
                        const Lexicon* lexicon = nullptr) {
  require_coverage(ds.test, table, lexicon);
  return precision_recall_f1(predict(ds.test, table, params), labels_of(ds.test));
}

/// Predicting positive with the prior rate gives P = R = F1 = ratio.
inline Metrics naive_prior_metrics(double ratio_pos = 1.0 / 11.0) {
  if (!(ratio_pos > 0.0 && ratio_pos < 1.0))
    throw Error(ErrorKind::Config, "probe_eval", "prior ratio must lie in (0, 1)");
  Metrics m;
  m.precision = m.recall = m.f1 = ratio_pos;
  return m;
}

}  // namespace hit
