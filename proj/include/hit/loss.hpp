#pragma once

#include <algorithm>
#include <span>
#include <unordered_map>
#include <vector>

#include "hit/dataset.hpp"
#include "hit/embedding_table.hpp"
#include "hit/error.hpp"
#include "hit/manifold.hpp"

namespace hit {

struct LossConfig {
  double alpha = 5.0;  // clustering (distance) margin
  double beta = 0.1;   // centripetal (norm) margin
  double cluster_weight = 1.0;
  double centripetal_weight = 1.0;

  void validate() const {
    if (!(alpha >= 0.0) || !(beta >= 0.0))
      throw Error(ErrorKind::Config, "training", "loss margins must be nonnegative");
    if (!(cluster_weight >= 0.0) || !(centripetal_weight >= 0.0))
      throw Error(ErrorKind::Config, "training", "loss weights must be nonnegative");
  }
};

/// Sparse per-row Euclidean gradients, rows kept in first-touch order.
class RowGradients {
 public:
  explicit RowGradients(std::size_t dim = 0) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }
  std::span<const EntityId> ids() const { return ids_; }

  std::span<const double> grad(std::size_t slot) const { return {data_.data() + slot * dim_, dim_}; }

  /// Gradient of row e, or an empty span when untouched.
  std::span<const double> find(EntityId e) const {
    if (auto it = slot_.find(e); it != slot_.end()) return grad(it->second);
    return {};
  }

  void add(EntityId e, std::span<const double> g, double scale = 1.0) {
    auto [it, inserted] = slot_.try_emplace(e, ids_.size());
    if (inserted) {
      ids_.push_back(e);
      data_.resize(data_.size() + dim_, 0.0);
    }
    double* row = data_.data() + it->second * dim_;
    for (std::size_t i = 0; i < dim_; ++i) row[i] += scale * g[i];
  }

  void merge(const RowGradients& other, double scale = 1.0) {
    for (std::size_t s = 0; s < other.size(); ++s) add(other.ids_[s], other.grad(s), scale);
  }

 private:
  std::size_t dim_;
  std::vector<EntityId> ids_;
  std::vector<double> data_;
  std::unordered_map<EntityId, std::size_t> slot_;
};

struct LossValue {
  double value = 0.0;
  RowGradients grads;
};

/// Sum over triplets of max(d(e, e+) - d(e, e-) + alpha, 0). The subgradient
/// at an exactly-zero hinge argument is taken as 0.
inline LossValue clustering_loss(std::span<const Triplet> batch, const EmbeddingTable& table,
                                 const LossConfig& cfg) {
  const auto& m = table.manifold();
  LossValue out{0.0, RowGradients(table.dim())};
  for (const auto& t : batch) {
    const auto e = table.row(t.child);
    const auto pos = table.row(t.positive_parent);
    const auto neg = table.row(t.negative_parent);
    const double z = distance(e, pos, m) - distance(e, neg, m) + cfg.alpha;
    if (!(z > 0.0)) continue;
    out.value += z;
    const auto gp = distance_grad(e, pos, m);
    const auto gn = distance_grad(e, neg, m);
    out.grads.add(t.child, gp.du);
    out.grads.add(t.child, gn.du, -1.0);
    out.grads.add(t.positive_parent, gp.dv);
    out.grads.add(t.negative_parent, gn.dv, -1.0);
  }
  return out;
}

/// Sum over triplets of max(|e+|_c - |e|_c + beta, 0). Negatives are unused.
inline LossValue centripetal_loss(std::span<const Triplet> batch, const EmbeddingTable& table,
                                  const LossConfig& cfg) {
  const auto& m = table.manifold();
  LossValue out{0.0, RowGradients(table.dim())};
  for (const auto& t : batch) {
    const auto e = table.row(t.child);
    const auto pos = table.row(t.positive_parent);
    const double z = hnorm(pos, m) - hnorm(e, m) + cfg.beta;
    if (!(z > 0.0)) continue;
    out.value += z;
    out.grads.add(t.positive_parent, hnorm_grad(pos, m));
    out.grads.add(t.child, hnorm_grad(e, m), -1.0);
  }
  return out;
}

/// Weighted sum of the two losses (unit weights by default).
inline LossValue hit_loss(std::span<const Triplet> batch, const EmbeddingTable& table,
                          const LossConfig& cfg) {
  LossValue out{0.0, RowGradients(table.dim())};
  if (cfg.cluster_weight != 0.0) {
    auto c = clustering_loss(batch, table, cfg);
    out.value += cfg.cluster_weight * c.value;
    out.grads.merge(c.grads, cfg.cluster_weight);
  }
  if (cfg.centripetal_weight != 0.0) {
    auto r = centripetal_loss(batch, table, cfg);
    out.value += cfg.centripetal_weight * r.value;
    out.grads.merge(r.grads, cfg.centripetal_weight);
  }
  return out;
}

/// Loss value only, summed over `triplets`.
inline double hit_loss_value(std::span<const Triplet> triplets, const EmbeddingTable& table,
                             const LossConfig& cfg) {
  const auto& m = table.manifold();
  double total = 0.0;
  for (const auto& t : triplets) {
    const auto e = table.row(t.child);
    const auto pos = table.row(t.positive_parent);
    const auto neg = table.row(t.negative_parent);
    total += cfg.cluster_weight *
             std::max(distance(e, pos, m) - distance(e, neg, m) + cfg.alpha, 0.0);
    total += cfg.centripetal_weight * std::max(hnorm(pos, m) - hnorm(e, m) + cfg.beta, 0.0);
  }
  return total;
}

}  // namespace hit
