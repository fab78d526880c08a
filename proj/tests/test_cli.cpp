#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "hit/commands.hpp"
#include "hit/toys.hpp"

namespace fs = std::filesystem;
using hit::ErrorKind;
using hit::RunConfig;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("hit_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_edges(const fs::path& p, const std::vector<hit::EdgeRecord>& edges) {
  std::ofstream out(p);
  out << "# child\tparent\n";
  for (const auto& e : edges) out << e.child << '\t' << e.parent << '\n';
}

RunConfig tree_config(const fs::path& dir) {
  write_edges(dir / "edges.tsv", hit::balanced_tree_edges(3, 6));
  RunConfig cfg;
  cfg.edges = dir / "edges.tsv";
  cfg.out = dir / "out";
  return cfg;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const hit::Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::Io;
}

int run_cli(const std::string& args) {
  const char* bin = std::getenv("HIT_CLI");
  if (!bin) return -1;
  const int status = std::system((std::string(bin) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, FileAndOverrides) {
  const auto dir = scratch("config");
  {
    std::ofstream f(dir / "run.conf");
    f << "# toy run\nedges = ./data/../data/e.tsv\n  dim=16 \nalpha = 3.5\nlambdas = 0.5, 1\nablation_grid = 5:0.1,1:0.5\n";
  }
  RunConfig cfg;
  hit::load_config_file(cfg, dir / "run.conf");
  EXPECT_EQ(cfg.edges, dir / "data/e.tsv");
  EXPECT_EQ(cfg.out, RunConfig{}.out);  // not set by the file, so not rebased
  EXPECT_EQ(cfg.dim, 16u);
  EXPECT_EQ(cfg.loss.alpha, 3.5);
  EXPECT_EQ(cfg.grid.lambda_values, (std::vector<double>{0.5, 1.0}));
  ASSERT_EQ(cfg.ablation_grid.size(), 2u);
  EXPECT_EQ(cfg.ablation_grid[1], (std::pair<double, double>{1.0, 0.5}));
  EXPECT_EQ(cfg.manifold().curvature, 1.0 / 16.0);
  hit::apply_assignment(cfg, "epochs=3");
  EXPECT_EQ(cfg.train.epochs, 3u);

  EXPECT_EQ(kind_of([&] { hit::apply_assignment(cfg, "nope=1"); }), ErrorKind::Config);
  EXPECT_EQ(kind_of([&] { hit::apply_assignment(cfg, "dim=abc"); }), ErrorKind::Config);
  EXPECT_EQ(kind_of([&] { hit::apply_assignment(cfg, "dim"); }), ErrorKind::Config);
  EXPECT_EQ(kind_of([&] { hit::load_config_file(cfg, dir / "missing.conf"); }), ErrorKind::Io);
  {
    std::ofstream f(dir / "bad.conf");
    f << "seed = 1\nbeta = x\n";
  }
  try {
    hit::load_config_file(cfg, dir / "bad.conf");
    FAIL();
  } catch (const hit::Error& e) {
    EXPECT_NE(std::string(e.what()).find("bad.conf:2"), std::string::npos) << e.what();
  }
  RunConfig v;
  v.task = "sideways";
  EXPECT_THROW(v.validate(), hit::Error);
  for (const auto& k : hit::config_keys()) EXPECT_FALSE(k.help.empty());
}

TEST(BuildDataset, ChainSummary) {
  const auto dir = scratch("chain");
  write_edges(dir / "edges.tsv", {{"a", "b"}, {"b", "c"}, {"z", "w"}});
  RunConfig cfg;
  cfg.edges = dir / "edges.tsv";
  cfg.out = dir / "out";
  cfg.k = 1;
  std::ostringstream log;
  const auto s = hit::command_build_dataset(cfg, log);
  EXPECT_EQ(s.entities, 5u);
  EXPECT_EQ(s.direct, 3u);
  EXPECT_EQ(s.indirect, 1u);
  const auto summary = slurp(cfg.out / "summary.tsv");
  EXPECT_NE(summary.find("entities\tdirect\tindirect\n5\t3\t1\n"), std::string::npos);
  EXPECT_TRUE(fs::exists(cfg.out / "dataset-multi-random.tsv"));
  EXPECT_TRUE(fs::exists(cfg.out / "lexicon.tsv"));
}

TEST(BuildDataset, AllVariantsAndMissingInput) {
  const auto dir = scratch("all");
  auto cfg = tree_config(dir);
  cfg.task = "all";
  cfg.negatives = "all";
  std::ostringstream log;
  const auto s = hit::command_build_dataset(cfg, log);
  ASSERT_EQ(s.datasets.size(), 4u);
  for (const auto& r : s.datasets) {
    EXPECT_TRUE(fs::exists(r.path));
    EXPECT_EQ(r.val % 11, 0u);
  }
  cfg.dataset = dir / "one.tsv";
  EXPECT_EQ(kind_of([&] { hit::command_build_dataset(cfg, log); }), ErrorKind::Config);

  RunConfig missing;
  missing.edges = dir / "nope.tsv";
  missing.out = dir / "o2";
  EXPECT_EQ(kind_of([&] { hit::command_build_dataset(missing, log); }), ErrorKind::Io);
}

TEST(Pipeline, TrainEvaluateAnalyzeOnTree) {
  const auto dir = scratch("pipeline");
  auto cfg = tree_config(dir);
  std::ostringstream log;
  hit::command_build_dataset(cfg, log);

  const auto res = hit::command_train(cfg, log);
  const auto emb = cfg.out / "embeddings-multi-random.tsv";
  const auto first = slurp(emb);
  ASSERT_FALSE(first.empty());
  hit::command_train(cfg, log);
  EXPECT_EQ(slurp(emb), first);  // byte-identical rerun
  const auto trace = slurp(cfg.out / "train-log-multi-random.tsv");
  EXPECT_EQ(std::count(trace.begin(), trace.end(), '\n'), static_cast<long>(cfg.train.epochs + 1));
  EXPECT_EQ(res.history.size(), cfg.train.epochs);

  std::ostringstream eval_log;
  const auto r = hit::command_evaluate(cfg, eval_log);
  EXPECT_NE(eval_log.str().find("NaivePrior\t0.091\t0.091\t0.091"), std::string::npos) << eval_log.str();
  const auto txt = slurp(cfg.out / "metrics-multi-random.txt");
  EXPECT_NE(txt.find("lambda="), std::string::npos);
  EXPECT_NE(txt.find("threshold="), std::string::npos);
  const auto j = nlohmann::json::parse(slurp(cfg.out / "metrics-multi-random.json"));
  EXPECT_EQ(j["task"], "multi");
  EXPECT_EQ(j["negatives"], "random");
  EXPECT_DOUBLE_EQ(j["test"]["f1"].get<double>(), r.test.f1);
  EXPECT_DOUBLE_EQ(j["naive_prior"]["f1"].get<double>(), 1.0 / 11.0);
  EXPECT_EQ(r.validation.params, res.best_validation->params);

  cfg.ablation = true;
  const auto a = hit::command_analyze(cfg, log);
  std::size_t total = 0;
  for (const auto& b : a.histogram) total += b.count;
  EXPECT_EQ(total, 364u);
  ASSERT_TRUE(a.pearson.has_value());
  EXPECT_GT(*a.pearson, 0.0);
  ASSERT_EQ(a.ablation.size(), 4u);
  const auto abl = slurp(cfg.out / "ablation-multi-random.tsv");
  EXPECT_EQ(std::count(abl.begin(), abl.end(), '\n'), 6);
  EXPECT_EQ(a.pairs.entities.size(), 6u);  // deepest leaf up to the root
  EXPECT_TRUE(fs::exists(cfg.out / "pair-report-multi-random.tsv"));
  EXPECT_TRUE(fs::exists(cfg.out / "norm-histogram-multi-random.tsv"));
  EXPECT_TRUE(fs::exists(cfg.out / "correlation-multi-random.txt"));
}

TEST(Pipeline, ProvenanceMismatchRefused) {
  const auto dir = scratch("prov");
  auto cfg = tree_config(dir);
  cfg.train.epochs = 1;
  std::ostringstream log;
  hit::command_build_dataset(cfg, log);
  hit::command_train(cfg, log);

  // Same entity names, one edge moved: a different hierarchy snapshot.
  auto edges = hit::balanced_tree_edges(3, 6);
  edges.back().parent = "r.0";
  write_edges(dir / "edges2.tsv", edges);
  auto other = cfg;
  other.edges = dir / "edges2.tsv";
  EXPECT_EQ(kind_of([&] { hit::command_evaluate(other, log); }), ErrorKind::Provenance);
  EXPECT_EQ(kind_of([&] { hit::command_analyze(other, log); }), ErrorKind::Provenance);

  // A dataset rebuilt from the other snapshot against the old embeddings.
  auto rebuilt = other;
  rebuilt.out = dir / "out2";
  hit::command_build_dataset(rebuilt, log);
  rebuilt.embeddings = cfg.out / "embeddings-multi-random.tsv";
  EXPECT_EQ(kind_of([&] { hit::command_evaluate(rebuilt, log); }), ErrorKind::Provenance);
}

TEST(Pipeline, ExportImport) {
  const auto dir = scratch("io");
  auto cfg = tree_config(dir);
  cfg.train.epochs = 2;
  std::ostringstream log;
  hit::command_build_dataset(cfg, log);
  hit::command_train(cfg, log);
  cfg.output = dir / "exported.tsv";
  EXPECT_EQ(hit::command_export_embeddings(cfg, log), 364u);
  EXPECT_EQ(slurp(cfg.output), slurp(cfg.out / "embeddings-multi-random.tsv"));

  // An external file without provenance and with one row missing.
  {
    std::istringstream in(slurp(cfg.output));
    std::ofstream out(dir / "external.tsv");
    std::string line;
    std::getline(in, line);
    out << "#hit-embeddings v1 dim=32 curvature=0.03125 n=363\n";
    std::getline(in, line);  // drop the first entity
    while (std::getline(in, line)) out << line << '\n';
  }
  auto imp = cfg;
  imp.input = dir / "external.tsv";
  imp.out = dir / "imported";
  const auto rep = hit::command_import_embeddings(imp, log);
  EXPECT_EQ(rep.rows_read, 363u);
  EXPECT_EQ(rep.missing.size(), 1u);
  const auto stored = slurp(imp.out / "embeddings-multi-random.tsv");
  EXPECT_NE(stored.find("src="), std::string::npos);
  EXPECT_NE(slurp(imp.out / "import-report.txt").find("missing=1"), std::string::npos);
  // The gap surfaces as a coverage error only if an evaluated pair needs it.
  imp.dataset = cfg.out / "dataset-multi-random.tsv";
  try {
    hit::command_evaluate(imp, log);
  } catch (const hit::Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Coverage);
  }
}

TEST(Binary, ExitCodes) {
  if (!std::getenv("HIT_CLI")) GTEST_SKIP() << "HIT_CLI not set";
  const auto dir = scratch("binary");
  write_edges(dir / "edges.tsv", hit::balanced_tree_edges(3, 4));
  {
    std::ofstream f(dir / "run.conf");
    f << "edges = edges.tsv\nout = out\nepochs = 2\n";
  }
  const auto conf = (dir / "run.conf").string();
  EXPECT_EQ(run_cli("build-dataset --config " + conf + " --set k=5"), 0);
  EXPECT_EQ(run_cli("build-dataset --config " + conf + " --task mixed --negatives hard --seed 3 --set k=5"), 0);
  EXPECT_TRUE(fs::exists(dir / "out" / "dataset-mixed-hard.tsv"));
  EXPECT_EQ(run_cli("train --config " + conf), 0);
  EXPECT_EQ(run_cli("evaluate --config " + conf), 0);
  EXPECT_EQ(run_cli("analyze --config " + conf + " --out " + (dir / "an").string() +
                    " --set embeddings=" + (dir / "out" / "embeddings-multi-random.tsv").string()),
            0);
  EXPECT_NE(run_cli("build-dataset --config " + conf + " --set edges=/nonexistent.tsv"), 0);
  EXPECT_NE(run_cli("train --config " + conf + " --set bogus=1"), 0);
  EXPECT_NE(run_cli("evaluate --config " + conf + " --task mixed"), 0);  // no mixed embeddings yet
  EXPECT_NE(run_cli("frobnicate"), 0);
  EXPECT_NE(run_cli(""), 0);
}
