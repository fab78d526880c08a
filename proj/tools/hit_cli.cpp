#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "hit/commands.hpp"

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> task;
  std::optional<std::string> negatives;
  std::optional<std::string> out;
  std::vector<std::string> sets;
};

hit::RunConfig resolve(const Options& o) {
  hit::RunConfig cfg;
  if (!o.config.empty()) hit::load_config_file(cfg, o.config);
  for (const auto& s : o.sets) hit::apply_assignment(cfg, s);
  if (o.seed) cfg.seed = *o.seed;
  if (o.task) cfg.task = *o.task;
  if (o.negatives) cfg.negatives = *o.negatives;
  if (o.out) cfg.out = *o.out;
  return cfg;
}

std::string keys_help() {
  std::string s = "Config keys (key = value, one per line; --set key=value overrides):\n";
  for (const auto& k : hit::config_keys()) s += "  " + std::string(k.name) + ": " + std::string(k.help) + "\n";
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"HiT embeddings on the Poincare ball: datasets, training, probe evaluation, analysis"};
  app.footer(keys_help() + "Environment: HIT_THREADS caps worker threads.");
  app.require_subcommand(1);
  Options opt;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config, "key=value config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", opt.seed, "top-level seed");
    sub->add_option("--task", opt.task, "multi | mixed");
    sub->add_option("--negatives", opt.negatives, "random | hard");
    sub->add_option("--out", opt.out, "output directory");
    sub->add_option("--set", opt.sets, "override one config key (key=value)")->take_all()->allow_extra_args(false);
  };

  auto* build = app.add_subcommand("build-dataset", "split the hierarchy and write task datasets + summary");
  auto* train = app.add_subcommand("train", "train an embedding table, keeping the best validation epoch");
  auto* evaluate = app.add_subcommand("evaluate", "tune the probe on validation, report test metrics");
  auto* analyze = app.add_subcommand("analyze", "norm histogram, depth correlation, pair report, ablation");
  auto* exp = app.add_subcommand("export-embeddings", "write the configured embeddings to 'output'");
  auto* imp = app.add_subcommand("import-embeddings", "load external embeddings from 'input'");
  for (auto* sub : {build, train, evaluate, analyze, exp, imp}) add_common(sub);

  CLI11_PARSE(app, argc, argv);

  try {
    const auto cfg = resolve(opt);
    if (build->parsed()) hit::command_build_dataset(cfg, std::cout);
    else if (train->parsed()) hit::command_train(cfg, std::cout);
    else if (evaluate->parsed()) hit::command_evaluate(cfg, std::cout);
    else if (analyze->parsed()) hit::command_analyze(cfg, std::cout);
    else if (exp->parsed()) hit::command_export_embeddings(cfg, std::cout);
    else if (imp->parsed()) hit::command_import_embeddings(cfg, std::cout);
  } catch (const hit::Error& e) {
    std::cerr << "hit: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "hit: unexpected failure: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
