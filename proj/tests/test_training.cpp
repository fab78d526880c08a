#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "hit/riemannian_adam.hpp"
#include "hit/toys.hpp"
#include "hit/trainer.hpp"
#include "oracles.hpp"

using hit::EmbeddingTable;
using hit::EntityId;
using hit::ErrorKind;
using hit::LossConfig;
using hit::ManifoldConfig;
using hit::Triplet;

namespace {

// One-dimensional unit ball: the point tanh(r/2) sits at hyperbolic norm r.
EmbeddingTable line_table(std::vector<double> xs) {
  EmbeddingTable t(xs.size(), ManifoldConfig(1, 1.0));
  for (EntityId i = 0; i < xs.size(); ++i) t.row_mut(i)[0] = xs[i];
  return t;
}

EmbeddingTable random_table(hit::Rng& rng, std::size_t rows, const ManifoldConfig& m, double frac) {
  EmbeddingTable t(rows, m);
  for (EntityId i = 0; i < rows; ++i) {
    const auto p = oracle::random_point(rng, m, frac);
    std::copy(p.begin(), p.end(), t.row_mut(i).begin());
  }
  return t;
}

struct Toy {
  hit::Lexicon lex;
  hit::Hierarchy h;
  hit::ClosureIndex t;
  explicit Toy(const std::vector<hit::EdgeRecord>& e) : lex(hit::lexicon_from_edges(e)), h(hit::load_edges(e, lex)), t(h) {}
};

// a < b < c with an unrelated z < w so that a has valid negatives.
const std::vector<hit::EdgeRecord> kChain{{"a", "b"}, {"b", "c"}, {"z", "w"}};

hit::TaskDataset chain_dataset(const Toy& toy) {
  hit::TaskDataset ds;
  ds.k = 1;
  hit::Rng rng(1);
  const std::vector<hit::EntityPair> pos(toy.h.edges().begin(), toy.h.edges().end());
  ds.train = hit::build_triplets(pos, 1, hit::NegativeMode::Random, toy.h, toy.t, rng);
  return ds;
}

hit::TaskDataset tree_dataset(const Toy& toy, hit::NegativeMode mode = hit::NegativeMode::Random) {
  return hit::build_task_dataset(toy.h, toy.t, {hit::Task::MultiHop, mode, 0.05, 0.05, 10, 0},
                                 toy.h.checksum(&toy.lex));
}

}  // namespace

TEST(ClusteringLoss, HingeArithmetic) {
  // e at the origin, e+ at distance 2, e- at distance 4.
  const auto t = line_table({0.0, std::tanh(1.0), -std::tanh(2.0)});
  const std::vector<Triplet> batch{{0, 1, 2}};
  EXPECT_NEAR(hit::clustering_loss(batch, t, LossConfig{}).value, 3.0, 1e-12);
  LossConfig small;
  small.alpha = 1.5;
  const auto inactive = hit::clustering_loss(batch, t, small);
  EXPECT_EQ(inactive.value, 0.0);
  EXPECT_TRUE(inactive.grads.empty());
}

TEST(CentripetalLoss, HingeArithmetic) {
  // |e+| = 3, |e| = 2.
  auto t = line_table({std::tanh(1.0), std::tanh(1.5), 0.2});
  const std::vector<Triplet> batch{{0, 1, 2}};
  EXPECT_NEAR(hit::centripetal_loss(batch, t, LossConfig{}).value, 1.1, 1e-12);
  // Parent strictly inside by more than beta.
  const auto ok = line_table({std::tanh(1.5), std::tanh(1.0), 0.2});
  EXPECT_EQ(hit::centripetal_loss(batch, ok, LossConfig{}).value, 0.0);
  // The negative never matters.
  const double before = hit::centripetal_loss(batch, t, LossConfig{}).value;
  t.row_mut(2)[0] = -0.7;
  EXPECT_EQ(hit::centripetal_loss(batch, t, LossConfig{}).value, before);
  EXPECT_TRUE(hit::centripetal_loss(batch, t, LossConfig{}).grads.find(2).empty());
}

TEST(HitLoss, SumOfComponents) {
  hit::Rng rng(31);
  const auto m = ManifoldConfig::for_dim(8);
  const auto t = random_table(rng, 10, m, 0.6);
  const std::vector<Triplet> batch{{0, 1, 2}, {3, 4, 5}, {6, 7, 8}, {0, 9, 4}};
  const LossConfig cfg;
  const auto c = hit::clustering_loss(batch, t, cfg);
  const auto r = hit::centripetal_loss(batch, t, cfg);
  const auto h = hit::hit_loss(batch, t, cfg);
  EXPECT_NEAR(h.value, c.value + r.value, 1e-12);
  EXPECT_NEAR(h.value, oracle::scalar_hit_loss(batch, t, cfg), 1e-12);
  EXPECT_NEAR(hit::hit_loss_value(batch, t, cfg), h.value, 1e-12);

  // Both components zero.
  const auto ordered = line_table({std::tanh(1.5), std::tanh(1.0), -std::tanh(4.0)});
  LossConfig z;
  z.alpha = 0.5;
  EXPECT_EQ(hit::hit_loss(std::vector<Triplet>{{0, 1, 2}}, ordered, z).value, 0.0);
}

TEST(HitLoss, GradientsMatchFiniteDifferences) {
  hit::Rng rng(32);
  int configs = 0, attempts = 0;
  while (configs < 120 && attempts < 2000) {
    ++attempts;
    const std::size_t d = std::vector<std::size_t>{2, 8, 64}[configs % 3];
    const auto m = ManifoldConfig::for_dim(d);
    const std::size_t rows = 6;
    auto table = random_table(rng, rows, m, 0.7);
    LossConfig cfg;
    cfg.alpha = 0.5 + 4.5 * rng.uniform01();
    cfg.beta = 0.3 * rng.uniform01();
    std::vector<Triplet> batch;
    for (int i = 0; i < 4; ++i) {
      EntityId a = static_cast<EntityId>(rng.uniform_index(rows)), b, c;
      do b = static_cast<EntityId>(rng.uniform_index(rows)); while (b == a);
      do c = static_cast<EntityId>(rng.uniform_index(rows)); while (c == a || c == b);
      batch.push_back({a, b, c});
    }
    // Keep away from hinge kinks so the loss is smooth at step 1e-6.
    bool near_kink = false;
    for (const auto& tr : batch) {
      const double z1 = hit::distance(table.row(tr.child), table.row(tr.positive_parent), m) -
                        hit::distance(table.row(tr.child), table.row(tr.negative_parent), m) + cfg.alpha;
      const double z2 = hit::hnorm(table.row(tr.positive_parent), m) - hit::hnorm(table.row(tr.child), m) + cfg.beta;
      near_kink |= std::abs(z1) < 1e-3 || std::abs(z2) < 1e-3;
    }
    if (near_kink) continue;
    ++configs;
    const auto got = hit::hit_loss(batch, table, cfg);
    for (EntityId e = 0; e < rows; ++e) {
      const hit::Vector x(table.row(e).begin(), table.row(e).end());
      const auto fd = oracle::central_diff(
          [&](const hit::Vector& y) {
            auto tt = table;
            std::copy(y.begin(), y.end(), tt.row_mut(e).begin());
            return oracle::scalar_hit_loss(batch, tt, cfg);
          },
          x);
      const auto g = got.grads.find(e);
      if (g.empty()) {
        EXPECT_LT(oracle::norm(fd), 1e-6);
      } else {
        EXPECT_LE(oracle::rel_error(g, fd), 1e-4) << "d=" << d << " row " << e;
      }
    }
  }
  EXPECT_GE(configs, 100);
}

TEST(HitLoss, CoincidentActivePointsAreDegenerate) {
  const auto t = line_table({0.3, 0.3, -0.5});
  try {
    hit::clustering_loss(std::vector<Triplet>{{0, 1, 2}}, t, LossConfig{});
    FAIL();
  } catch (const hit::Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DegenerateGradient);
  }
}

TEST(RiemannianAdam, ZeroGradientLeavesTableUnchanged) {
  hit::Rng rng(33);
  const auto m = ManifoldConfig::for_dim(4);
  auto t = random_table(rng, 5, m, 0.9);
  const auto before = t;
  hit::RowGradients g(4);
  g.add(1, std::vector<double>(4, 0.0));
  g.add(3, std::vector<double>(4, 0.0));
  hit::RiemannianAdam opt(5, 4);
  for (int i = 0; i < 10; ++i) opt.step(t, g, 0.1);
  EXPECT_EQ(t, before);
}

TEST(RiemannianAdam, StaysInBallAndRejectsNonFinite) {
  hit::Rng rng(34);
  const auto m = ManifoldConfig::for_dim(4);
  auto t = random_table(rng, 3, m, 0.99);
  hit::RiemannianAdam opt(3, 4);
  hit::RowGradients g(4);
  g.add(0, std::vector<double>{-1e6, 0, 0, 0});
  for (int i = 0; i < 50; ++i) {
    opt.step(t, g, 5.0);
    EXPECT_NO_THROW(t.check_in_ball());
  }
  hit::RowGradients bad(4);
  bad.add(2, std::vector<double>{NAN, 0, 0, 0});
  try {
    opt.step(t, bad, 0.1);
    FAIL();
  } catch (const hit::Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NumericInstability);
  }
}

TEST(RiemannianAdam, FixedBatchLossNonIncreasingOnChain) {
  const Toy toy(kChain);
  const auto ds = chain_dataset(toy);
  hit::Rng rng(35);
  const auto m = ManifoldConfig::for_dim(2);
  auto table = hit::init_table(toy.h.size(), m, 1e-3 / std::sqrt(m.curvature), rng);
  hit::RiemannianAdam opt(toy.h.size(), 2);
  double prev = hit::hit_loss_value(ds.train, table, LossConfig{});
  for (int step = 0; step < 100; ++step) {
    const auto l = hit::hit_loss(ds.train, table, LossConfig{});
    opt.step(table, l.grads, 1e-3);
    const double now = hit::hit_loss_value(ds.train, table, LossConfig{});
    EXPECT_LE(now, prev + 1e-12) << "step " << step;
    prev = now;
  }
}

TEST(Warmup, Linear) {
  EXPECT_DOUBLE_EQ(hit::warmup_rate(1.0, 1, 4), 0.25);
  EXPECT_DOUBLE_EQ(hit::warmup_rate(1.0, 2, 4), 0.5);
  EXPECT_DOUBLE_EQ(hit::warmup_rate(1.0, 4, 4), 1.0);
  EXPECT_DOUBLE_EQ(hit::warmup_rate(1.0, 40, 4), 1.0);
  EXPECT_DOUBLE_EQ(hit::warmup_rate(0.5, 1, 0), 0.5);
}

TEST(Train, ChainNormOrdering) {
  const Toy toy(kChain);
  const auto ds = chain_dataset(toy);
  hit::TrainConfig tcfg;
  tcfg.epochs = 300;
  tcfg.warmup_steps = 0;
  const auto m = ManifoldConfig::for_dim(2);
  const auto res = hit::train(ds, toy.h.size(), tcfg, LossConfig{}, m);
  const auto norm = [&](const char* s) { return hit::hnorm(res.table.row(toy.lex.id(s)), m); };
  EXPECT_GT(norm("a"), norm("b"));
  EXPECT_GT(norm("b"), norm("c"));
  EXPECT_EQ(res.history.size(), 300u);
  EXPECT_EQ(res.best_epoch, 300u);
}

TEST(Train, EmptyTrainingSetIsConfigError) {
  hit::TaskDataset ds;
  try {
    hit::train(ds, 3, hit::TrainConfig{}, LossConfig{}, ManifoldConfig::for_dim(2));
    FAIL();
  } catch (const hit::Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Config);
  }
}

TEST(Train, TreeLossDropsAndIsDeterministic) {
  const Toy toy(hit::balanced_tree_edges(3, 6));
  const auto ds = tree_dataset(toy);
  const auto m = ManifoldConfig::for_dim(32);
  hit::TrainConfig tcfg;
  tcfg.epochs = 40;  // 20 epochs end mid-descent, still inside the warm-up
  const auto a = hit::train(ds, toy.h.size(), tcfg, LossConfig{}, m);
  const auto b = hit::train(ds, toy.h.size(), tcfg, LossConfig{}, m);
  ASSERT_EQ(a.history.size(), tcfg.epochs);
  EXPECT_LE(a.history.back().train_loss, 0.1 * a.initial_loss);
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    EXPECT_EQ(a.history[i].train_loss, b.history[i].train_loss);
    EXPECT_EQ(a.history[i].epoch, i + 1);
    ASSERT_TRUE(a.history[i].validation.has_value());
  }
  EXPECT_EQ(a.table, b.table);
  EXPECT_EQ(a.table.source_checksum(), ds.source_checksum);
  // The kept snapshot carries the best validation score in the history.
  double best = 0.0;
  for (const auto& r : a.history) best = std::max(best, r.validation->metrics.f1);
  EXPECT_EQ(a.best_validation->metrics.f1, best);
  EXPECT_EQ(a.history[a.best_epoch - 1].validation->metrics.f1, best);
}

TEST(Embeddings, ExportImportRoundTrip) {
  const Toy toy(hit::balanced_tree_edges(3, 4));
  hit::Rng rng(36);
  const auto m = ManifoldConfig::for_dim(16);
  auto t = random_table(rng, toy.h.size(), m, 0.999);
  t.set_source_checksum(0xabcdef);
  const auto path = std::filesystem::temp_directory_path() / "hit_emb_roundtrip.tsv";
  hit::export_embeddings(t, toy.lex, path);
  const auto rep = hit::import_embeddings(path, toy.lex, m);
  EXPECT_EQ(rep.table, t);
  EXPECT_EQ(rep.projected, 0u);
  EXPECT_TRUE(rep.missing.empty());
  EXPECT_EQ(rep.table.source_checksum(), 0xabcdefu);
}

TEST(Embeddings, ImportProjectsAndReportsCoverage) {
  const auto dir = std::filesystem::temp_directory_path();
  const hit::Lexicon lex(std::vector<std::string>{"x", "y", "z"});
  const ManifoldConfig m(2, 0.25);  // radius 2
  const auto p = dir / "hit_emb_proj.tsv";
  std::ofstream(p) << "#hit-embeddings v1 dim=2 curvature=0.25 n=2\nx\t2\t0\ny\t0.5\t0.5\n";
  const auto rep = hit::import_embeddings(p, lex, m);
  EXPECT_EQ(rep.projected, 1u);
  EXPECT_NEAR(oracle::norm(rep.table.row(0)), (1 - m.eps) * 2.0, 1e-12);
  EXPECT_EQ(rep.table.row(1)[0], 0.5);
  ASSERT_EQ(rep.missing.size(), 1u);
  EXPECT_EQ(rep.missing[0], "z");
  EXPECT_FALSE(rep.table.covered(2));
}

TEST(Embeddings, ImportErrors) {
  const auto dir = std::filesystem::temp_directory_path();
  const hit::Lexicon lex(std::vector<std::string>{"x", "y"});
  const auto kind = [&](const std::string& text, const ManifoldConfig& m) {
    const auto p = dir / "hit_emb_err.tsv";
    std::ofstream(p) << text;
    try {
      hit::import_embeddings(p, lex, m);
    } catch (const hit::Error& e) {
      return e.kind();
    }
    return ErrorKind::Io;
  };
  const auto m768 = ManifoldConfig::for_dim(768);
  EXPECT_EQ(kind("#hit-embeddings v1 dim=384 curvature=0.0026041666666666665 n=0\n", m768),
            ErrorKind::DimensionMismatch);
  const ManifoldConfig m2(2, 0.5);
  EXPECT_EQ(kind("#hit-embeddings v1 dim=2 curvature=0.5 n=2\nx\t0\t0\nq\t0\t0\n", m2), ErrorKind::Lookup);
  EXPECT_EQ(kind("#hit-embeddings v1 dim=2 curvature=0.5 n=1\nx\t0\n", m2), ErrorKind::DimensionMismatch);
  EXPECT_EQ(kind("#hit-embeddings v1 dim=2 curvature=0.5 n=1\nx\t0\tnan\n", m2), ErrorKind::InvalidValue);
  EXPECT_EQ(kind("#hit-embeddings v1 dim=2 curvature=0.25 n=0\n", m2), ErrorKind::DimensionMismatch);
  EXPECT_EQ(kind("#hit-embeddings v1 dim=2 curvature=0.5 n=3\nx\t0\t0\n", m2), ErrorKind::Parse);
  EXPECT_EQ(kind("x\t0\t0\n", m2), ErrorKind::Parse);
}
