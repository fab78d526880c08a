#pragma once

#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "hit/embedding_table.hpp"
#include "hit/error.hpp"
#include "hit/hierarchy.hpp"
#include "hit/manifold.hpp"

namespace hit {

/// Pearson r between depth(e) and |e|_c over every covered entity.
inline double pearson_depth_norm(const Hierarchy& h, const EmbeddingTable& table) {
  if (table.rows() != h.size())
    throw Error(ErrorKind::LengthMismatch, "probe_eval", "table rows differ from hierarchy size");
  std::vector<double> xs, ys;
  for (EntityId e = 0; e < h.size(); ++e) {
    if (!table.covered(e)) continue;
    xs.push_back(static_cast<double>(h.depth(e)));
    ys.push_back(hnorm(table.row(e), table.manifold()));
  }
  if (xs.size() < 2)
    throw Error(ErrorKind::UndefinedCorrelation, "probe_eval", "fewer than two entities");
  const auto n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0) throw Error(ErrorKind::UndefinedCorrelation, "probe_eval", "depth is constant");
  if (syy == 0.0) throw Error(ErrorKind::UndefinedCorrelation, "probe_eval", "hyperbolic norm is constant");
  return sxy / std::sqrt(sxx * syy);
}

struct HistogramBin {
  double lower = 0.0;
  std::size_t count = 0;
};

/// Entities per hyperbolic-norm bin [k w, (k+1) w), from 0 up to the highest
/// populated bin.
inline std::vector<HistogramBin> norm_histogram(const EmbeddingTable& table, double bin_width) {
  if (!(bin_width > 0.0)) throw Error(ErrorKind::Config, "probe_eval", "bin width must be positive");
  std::vector<std::size_t> counts;
  for (EntityId e = 0; e < table.rows(); ++e) {
    if (!table.covered(e)) continue;
    const auto bin = static_cast<std::size_t>(std::floor(hnorm(table.row(e), table.manifold()) / bin_width));
    if (bin >= counts.size()) counts.resize(bin + 1, 0);
    ++counts[bin];
  }
  std::vector<HistogramBin> out(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) out[i] = {static_cast<double>(i) * bin_width, counts[i]};
  return out;
}

struct PairReport {
  std::vector<EntityId> entities;
  std::vector<std::vector<double>> distances;
  std::vector<double> hnorms;
  std::vector<std::size_t> depths;
};

inline PairReport pair_report(std::span<const EntityId> entities, const EmbeddingTable& table,
                              const Hierarchy& h) {
  PairReport r;
  r.entities.assign(entities.begin(), entities.end());
  const auto n = entities.size();
  r.distances.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    r.hnorms.push_back(hnorm(table.row(entities[i]), table.manifold()));
    r.depths.push_back(h.depth(entities[i]));
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = distance(table.row(entities[i]), table.row(entities[j]), table.manifold());
      r.distances[i][j] = d;
      r.distances[j][i] = d;
    }
  }
  return r;
}

}  // namespace hit
