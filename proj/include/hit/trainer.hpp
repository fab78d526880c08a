#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "hit/dataset.hpp"
#include "hit/embedding_table.hpp"
#include "hit/error.hpp"
#include "hit/loss.hpp"
#include "hit/manifold.hpp"
#include "hit/probe.hpp"
#include "hit/riemannian_adam.hpp"
#include "hit/rng.hpp"

namespace hit {

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 256;
  double learning_rate = 1e-2;
  std::size_t warmup_steps = 500;
  std::uint64_t seed = 0;
  /// Euclidean radius of the initialisation ball; 0 selects 1e-3 / sqrt(c).
  double init_scale = 0.0;
  /// Verify the in-ball invariant after every step instead of every epoch.
  bool check_every_step = false;
  AdamConfig adam{};

  void validate() const {
    if (epochs == 0 || batch_size == 0)
      throw Error(ErrorKind::Config, "training", "epochs and batch_size must be >= 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
      throw Error(ErrorKind::Config, "training", "learning_rate must be positive");
    if (init_scale < 0.0 || !std::isfinite(init_scale))
      throw Error(ErrorKind::Config, "training", "init_scale must be nonnegative");
  }
};

/// Linear warm-up from 0 to `base` over `warmup` steps, constant afterwards.
/// `step` counts from 1.
inline double warmup_rate(double base, std::size_t step, std::size_t warmup) {
  if (warmup == 0 || step >= warmup) return base;
  return base * static_cast<double>(step) / static_cast<double>(warmup);
}

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;  // mean per-triplet loss after the epoch
  std::optional<GridResult> validation;
};

struct TrainResult {
  EmbeddingTable table;  // snapshot selected on validation F1
  double initial_loss = 0.0;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  std::optional<GridResult> best_validation;
};

inline double mean_loss(std::span<const Triplet> triplets, const EmbeddingTable& table,
                        const LossConfig& cfg) {
  return hit_loss_value(triplets, table, cfg) / static_cast<double>(triplets.size());
}

/// Trains a free embedding table on ds.train. After each epoch the probe is
/// grid-searched on ds.val and the snapshot with the best validation F1 is
/// kept (the later epoch wins ties); without validation pairs the last epoch
/// is kept.
inline TrainResult train(const TaskDataset& ds, std::size_t num_entities, const TrainConfig& tcfg,
                         const LossConfig& lcfg, const ManifoldConfig& manifold,
                         const GridSpec& grid = {},
                         const std::function<void(const EpochRecord&)>& on_epoch = {}) {
  tcfg.validate();
  lcfg.validate();
  if (ds.train.empty()) throw Error(ErrorKind::Config, "training", "training set is empty");
  for (const auto& t : ds.train)
    if (std::max({t.child, t.positive_parent, t.negative_parent}) >= num_entities)
      throw Error(ErrorKind::Config, "training", "triplet id beyond entity count");

  auto init_rng = Rng::stream(tcfg.seed, "init");
  auto shuffle_rng = Rng::stream(tcfg.seed, "shuffle");
  const double radius = tcfg.init_scale > 0.0 ? tcfg.init_scale : 1e-3 / std::sqrt(manifold.curvature);
  EmbeddingTable table = init_table(num_entities, manifold, radius, init_rng);
  table.set_source_checksum(ds.source_checksum);
  RiemannianAdam optimizer(num_entities, manifold.dim, tcfg.adam);

  TrainResult result;
  result.initial_loss = mean_loss(ds.train, table, lcfg);
  result.table = table;

  std::vector<Triplet> order(ds.train.begin(), ds.train.end());
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= tcfg.epochs; ++epoch) {
    shuffle_rng.shuffle(std::span<Triplet>(order));
    for (std::size_t begin = 0; begin < order.size(); begin += tcfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + tcfg.batch_size);
      const std::span<const Triplet> batch(order.data() + begin, end - begin);
      const auto loss = hit_loss(batch, table, lcfg);
      ++step;
      optimizer.step(table, loss.grads, warmup_rate(tcfg.learning_rate, step, tcfg.warmup_steps));
      if (tcfg.check_every_step) table.check_in_ball();
    }
    table.check_in_ball();

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = mean_loss(ds.train, table, lcfg);
    if (!ds.val.empty()) {
      rec.validation = grid_search(ds.val, table, grid);
      if (!result.best_validation || rec.validation->metrics.f1 >= result.best_validation->metrics.f1) {
        result.best_validation = rec.validation;
        result.best_epoch = epoch;
        result.table = table;
      }
    } else {
      result.best_epoch = epoch;
      result.table = table;
    }
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return result;
}

}  // namespace hit
