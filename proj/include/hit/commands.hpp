#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "hit/analysis.hpp"
#include "hit/dataset.hpp"
#include "hit/embedding_table.hpp"
#include "hit/error.hpp"
#include "hit/hierarchy.hpp"
#include "hit/probe.hpp"
#include "hit/run_config.hpp"
#include "hit/trainer.hpp"

namespace hit {

/// Hierarchy inputs named by a config, with the checksum stamped on every
/// artifact derived from them.
struct Inputs {
  Lexicon lexicon;
  Hierarchy hierarchy;
  std::uint64_t checksum = 0;
};

inline Inputs load_inputs(const RunConfig& cfg) {
  if (cfg.edges.empty()) throw Error(ErrorKind::Config, "cli", "no edge file configured (key 'edges')");
  const auto records = read_edge_file(cfg.edges);
  Inputs in;
  in.lexicon = cfg.lexicon.empty() ? lexicon_from_edges(records) : read_lexicon(cfg.lexicon);
  in.hierarchy = load_edges(records, in.lexicon);
  in.checksum = in.hierarchy.checksum(&in.lexicon);
  return in;
}

inline std::string artifact_suffix(Task t, NegativeMode m) {
  return std::string(to_string(t)) + "-" + std::string(to_string(m));
}

inline std::filesystem::path dataset_path(const RunConfig& cfg, Task t, NegativeMode m) {
  return cfg.dataset.empty() ? cfg.out / ("dataset-" + artifact_suffix(t, m) + ".tsv") : cfg.dataset;
}

inline std::filesystem::path embeddings_path(const RunConfig& cfg, Task t, NegativeMode m) {
  return cfg.embeddings.empty() ? cfg.out / ("embeddings-" + artifact_suffix(t, m) + ".tsv") : cfg.embeddings;
}

namespace detail {

inline void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir))
    throw Error(ErrorKind::Io, "cli", "cannot create output directory '" + dir.string() + "'");
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cli", "cannot write '" + path.string() + "'");
  return out;
}

inline std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline void require_same_source(std::uint64_t expected, std::uint64_t found, const std::string& what) {
  if (found != 0 && found != expected)
    throw Error(ErrorKind::Provenance, "cli",
                what + " was derived from hierarchy " + checksum_hex(found) + ", expected " +
                    checksum_hex(expected) + "; refusing to mix artifacts");
}

inline nlohmann::json metrics_json(const Metrics& m) {
  return {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1},
          {"tp", m.tp},               {"fp", m.fp},         {"fn", m.fn},
          {"tn", m.tn}};
}

inline nlohmann::json number_or_string(double v) {
  if (std::isfinite(v)) return v;
  return v > 0 ? "inf" : "-inf";
}

}  // namespace detail

// ---------------------------------------------------------------------------
// build-dataset

struct DatasetSummary {
  std::size_t entities = 0;
  std::size_t direct = 0;
  std::size_t indirect = 0;
  struct Row {
    Task task;
    NegativeMode mode;
    std::size_t train, val, test;
    std::filesystem::path path;
  };
  std::vector<Row> datasets;
};

inline DatasetSummary command_build_dataset(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  std::vector<Task> tasks;
  std::vector<NegativeMode> modes;
  if (cfg.task == "all") tasks = {Task::MultiHop, Task::MixedHop};
  else tasks = {cfg.single_task()};
  if (cfg.negatives == "all") modes = {NegativeMode::Random, NegativeMode::Hard};
  else modes = {cfg.single_mode()};
  if (!cfg.dataset.empty() && tasks.size() * modes.size() > 1)
    throw Error(ErrorKind::Config, "cli", "an explicit dataset path needs a single task and negative mode");

  const auto in = load_inputs(cfg);
  const auto closure = transitive_closure(in.hierarchy);
  detail::ensure_dir(cfg.out);
  write_lexicon(in.lexicon, cfg.out / "lexicon.tsv");

  DatasetSummary s;
  s.entities = in.hierarchy.size();
  s.direct = in.hierarchy.edges().size();
  s.indirect = closure.indirect().size();
  for (Task t : tasks) {
    for (NegativeMode m : modes) {
      DatasetSpec spec{t, m, cfg.val_ratio, cfg.test_ratio, cfg.k, cfg.seed};
      const auto ds = build_task_dataset(in.hierarchy, closure, spec, in.checksum);
      const auto path = dataset_path(cfg, t, m);
      serialize(ds, path);
      s.datasets.push_back({t, m, ds.train.size(), ds.val.size(), ds.test.size(), path});
      log << "wrote " << path.string() << '\n';
    }
  }

  auto out = detail::open_output(cfg.out / "summary.tsv");
  out << "#hit-summary src=" << checksum_hex(in.checksum) << '\n'
      << "entities\tdirect\tindirect\n"
      << s.entities << '\t' << s.direct << '\t' << s.indirect << '\n'
      << "task\tnegatives\ttrain\tval\ttest\n";
  for (const auto& r : s.datasets)
    out << to_string(r.task) << '\t' << to_string(r.mode) << '\t' << r.train << '\t' << r.val << '\t'
        << r.test << '\n';
  log << "#entities=" << s.entities << " #direct=" << s.direct << " #indirect=" << s.indirect << '\n';
  for (const auto& r : s.datasets)
    log << to_string(r.task) << '/' << to_string(r.mode) << " train/val/test=" << r.train << '/' << r.val
        << '/' << r.test << '\n';
  return s;
}

// ---------------------------------------------------------------------------
// train

/// Loads the configured dataset and checks it against the hierarchy inputs.
inline TaskDataset load_dataset(const RunConfig& cfg, const Inputs& in) {
  const auto path = dataset_path(cfg, cfg.single_task(), cfg.single_mode());
  auto ds = deserialize(path);
  if (ds.task != cfg.single_task() || ds.mode != cfg.single_mode())
    throw Error(ErrorKind::Config, "cli",
                path.string() + " holds " + std::string(to_string(ds.task)) + "/" +
                    std::string(to_string(ds.mode)) + ", config asks for " + cfg.task + "/" + cfg.negatives);
  detail::require_same_source(in.checksum, ds.source_checksum, "dataset " + path.string());
  return ds;
}

inline TrainResult command_train(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const auto in = load_inputs(cfg);
  const auto ds = load_dataset(cfg, in);
  detail::ensure_dir(cfg.out);
  const auto suffix = artifact_suffix(ds.task, ds.mode);
  TrainConfig tcfg = cfg.train;
  tcfg.seed = cfg.seed;

  auto trace = detail::open_output(cfg.out / ("train-log-" + suffix + ".tsv"));
  trace << "epoch\ttrain_loss\tval_f1\tval_precision\tval_recall\tlambda\tthreshold\n";
  const auto on_epoch = [&](const EpochRecord& r) {
    trace << r.epoch << '\t' << detail::format_double(r.train_loss);
    if (r.validation)
      trace << '\t' << detail::format_double(r.validation->metrics.f1) << '\t'
            << detail::format_double(r.validation->metrics.precision) << '\t'
            << detail::format_double(r.validation->metrics.recall) << '\t'
            << detail::format_double(r.validation->params.lambda) << '\t'
            << detail::format_double(r.validation->params.threshold);
    else
      trace << "\t\t\t\t\t";
    trace << '\n' << std::flush;
    log << "epoch " << r.epoch << " loss=" << detail::fixed(r.train_loss, 4);
    if (r.validation) log << " val_f1=" << detail::fixed(r.validation->metrics.f1, 4);
    log << '\n';
  };

  TrainResult res;
  try {
    res = train(ds, in.lexicon.size(), tcfg, cfg.loss, cfg.manifold(), cfg.grid, on_epoch);
  } catch (const Error& e) {
    auto abort = detail::open_output(cfg.out / ("train-abort-" + suffix + ".txt"));
    abort << "error=" << e.what() << '\n';
    throw;
  }

  const auto emb = embeddings_path(cfg, ds.task, ds.mode);
  export_embeddings(res.table, in.lexicon, emb);
  auto ck = detail::open_output(cfg.out / ("checkpoint-" + suffix + ".txt"));
  ck << "src=" << checksum_hex(ds.source_checksum) << '\n'
     << "initial_loss=" << detail::format_double(res.initial_loss) << '\n'
     << "final_loss=" << detail::format_double(res.history.back().train_loss) << '\n'
     << "best_epoch=" << res.best_epoch << '\n';
  if (res.best_validation)
    ck << "val_f1=" << detail::format_double(res.best_validation->metrics.f1) << '\n'
       << "val_precision=" << detail::format_double(res.best_validation->metrics.precision) << '\n'
       << "val_recall=" << detail::format_double(res.best_validation->metrics.recall) << '\n'
       << "lambda=" << detail::format_double(res.best_validation->params.lambda) << '\n'
       << "threshold=" << detail::format_double(res.best_validation->params.threshold) << '\n';
  log << "best epoch " << res.best_epoch << ", wrote " << emb.string() << '\n';
  return res;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvalReport {
  Task task = Task::MultiHop;
  NegativeMode mode = NegativeMode::Random;
  GridResult validation;
  Metrics test;
  Metrics naive_prior;
};

/// Embeddings for the configured task/mode, checked against `in`.
inline EmbeddingTable load_embeddings(const RunConfig& cfg, const Inputs& in) {
  const auto path = embeddings_path(cfg, cfg.single_task(), cfg.single_mode());
  auto report = import_embeddings(path, in.lexicon, cfg.manifold());
  detail::require_same_source(in.checksum, report.table.source_checksum(), "embedding file " + path.string());
  return std::move(report.table);
}

/// Tunes the probe on validation pairs, then scores the test split.
inline EvalReport evaluate_dataset(const TaskDataset& ds, const EmbeddingTable& table, const GridSpec& grid,
                                   const Lexicon* lexicon = nullptr) {
  require_coverage(ds.val, table, lexicon);
  EvalReport r;
  r.task = ds.task;
  r.mode = ds.mode;
  r.validation = grid_search(ds.val, table, grid);
  r.test = evaluate(ds, table, r.validation.params, lexicon);
  r.naive_prior = naive_prior_metrics(1.0 / static_cast<double>(ds.k + 1));
  return r;
}

inline std::string format_report(const EvalReport& r) {
  std::string s = "model\tprecision\trecall\tf1\n";
  s += "NaivePrior\t" + detail::fixed(r.naive_prior.precision, 3) + '\t' + detail::fixed(r.naive_prior.recall, 3) +
       '\t' + detail::fixed(r.naive_prior.f1, 3) + '\n';
  s += "HiT\t" + detail::fixed(r.test.precision, 3) + '\t' + detail::fixed(r.test.recall, 3) + '\t' +
       detail::fixed(r.test.f1, 3) + '\n';
  return s;
}

inline EvalReport command_evaluate(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const auto in = load_inputs(cfg);
  const auto ds = load_dataset(cfg, in);
  const auto table = load_embeddings(cfg, in);
  detail::require_same_source(ds.source_checksum, table.source_checksum(), "embedding file");
  if (table.source_checksum() == 0) log << "note: embedding file carries no provenance checksum\n";
  const auto r = evaluate_dataset(ds, table, cfg.grid, &in.lexicon);

  detail::ensure_dir(cfg.out);
  const auto suffix = artifact_suffix(r.task, r.mode);
  auto txt = detail::open_output(cfg.out / ("metrics-" + suffix + ".txt"));
  const auto kv = [&](const std::string& k, const std::string& v) { txt << k << '=' << v << '\n'; };
  kv("task", std::string(to_string(r.task)));
  kv("negatives", std::string(to_string(r.mode)));
  kv("src", checksum_hex(ds.source_checksum));
  kv("lambda", detail::format_double(r.validation.params.lambda));
  kv("threshold", detail::format_double(r.validation.params.threshold));
  kv("val_f1", detail::format_double(r.validation.metrics.f1));
  for (const auto& [name, m] : {std::pair{"test", r.test}, std::pair{"naive_prior", r.naive_prior}}) {
    const std::string n = name;
    kv(n + "_precision", detail::format_double(m.precision));
    kv(n + "_recall", detail::format_double(m.recall));
    kv(n + "_f1", detail::format_double(m.f1));
  }
  kv("test_tp", std::to_string(r.test.tp));
  kv("test_fp", std::to_string(r.test.fp));
  kv("test_fn", std::to_string(r.test.fn));
  kv("test_tn", std::to_string(r.test.tn));

  nlohmann::json j{
      {"task", to_string(r.task)},
      {"negatives", to_string(r.mode)},
      {"src", checksum_hex(ds.source_checksum)},
      {"params",
       {{"lambda", r.validation.params.lambda}, {"threshold", detail::number_or_string(r.validation.params.threshold)}}},
      {"validation", detail::metrics_json(r.validation.metrics)},
      {"test", detail::metrics_json(r.test)},
      {"naive_prior", detail::metrics_json(r.naive_prior)},
  };
  detail::open_output(cfg.out / ("metrics-" + suffix + ".json")) << j.dump(2) << '\n';

  log << "frozen lambda=" << detail::format_double(r.validation.params.lambda)
      << " threshold=" << detail::format_double(r.validation.params.threshold) << '\n'
      << format_report(r);
  return r;
}

// ---------------------------------------------------------------------------
// analyze

struct AblationRow {
  double alpha = 0.0;
  double beta = 0.0;
  std::size_t best_epoch = 0;
  Metrics test;
};

struct AnalysisReport {
  std::vector<HistogramBin> histogram;
  std::optional<double> pearson;
  PairReport pairs;
  std::vector<AblationRow> ablation;
};

/// A root-ward chain from one of the deepest entities, following the first
/// parent at every step.
inline std::vector<EntityId> default_report_entities(const Hierarchy& h) {
  if (h.size() == 0) return {};
  EntityId e = 0;
  for (EntityId i = 0; i < h.size(); ++i)
    if (h.depth(i) > h.depth(e)) e = i;
  std::vector<EntityId> chain{e};
  while (!h.is_root(e)) {
    e = h.parents(e).front();
    chain.push_back(e);
  }
  return chain;
}

inline std::vector<AblationRow> run_ablation(const RunConfig& cfg, const Inputs& in, const TaskDataset& ds,
                                             std::ostream& log) {
  std::vector<AblationRow> rows;
  for (const auto& [alpha, beta] : cfg.ablation_grid) {
    LossConfig lcfg = cfg.loss;
    lcfg.alpha = alpha;
    lcfg.beta = beta;
    TrainConfig tcfg = cfg.train;
    tcfg.seed = cfg.seed;
    const auto res = train(ds, in.lexicon.size(), tcfg, lcfg, cfg.manifold(), cfg.grid);
    const auto r = evaluate_dataset(ds, res.table, cfg.grid, &in.lexicon);
    rows.push_back({alpha, beta, res.best_epoch, r.test});
    log << "ablation alpha=" << detail::format_double(alpha) << " beta=" << detail::format_double(beta)
        << " test_f1=" << detail::fixed(r.test.f1, 3) << '\n';
  }
  return rows;
}

inline AnalysisReport command_analyze(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const auto in = load_inputs(cfg);
  const auto table = load_embeddings(cfg, in);
  detail::ensure_dir(cfg.out);
  const auto suffix = artifact_suffix(cfg.single_task(), cfg.single_mode());
  const auto src = checksum_hex(in.checksum);
  AnalysisReport rep;

  rep.histogram = norm_histogram(table, cfg.bin_width);
  {
    auto out = detail::open_output(cfg.out / ("norm-histogram-" + suffix + ".tsv"));
    out << "#src=" << src << '\n' << "bin_lower\tbin_upper\tcount\n";
    for (const auto& b : rep.histogram)
      out << detail::format_double(b.lower) << '\t' << detail::format_double(b.lower + cfg.bin_width) << '\t'
          << b.count << '\n';
  }

  {
    auto out = detail::open_output(cfg.out / ("correlation-" + suffix + ".txt"));
    out << "src=" << src << '\n';
    try {
      rep.pearson = pearson_depth_norm(in.hierarchy, table);
      out << "pearson_depth_norm=" << detail::format_double(*rep.pearson) << '\n';
      log << "pearson(depth, hnorm)=" << detail::fixed(*rep.pearson, 3) << '\n';
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::UndefinedCorrelation) throw;
      out << "pearson_depth_norm=undefined\nreason=" << e.what() << '\n';
      log << "pearson(depth, hnorm) undefined: " << e.what() << '\n';
    }
  }

  std::vector<EntityId> ids;
  for (const auto& name : cfg.report_entities) ids.push_back(in.lexicon.id(name));
  if (ids.empty()) ids = default_report_entities(in.hierarchy);
  for (EntityId e : ids)
    if (!table.covered(e))
      throw Error(ErrorKind::Coverage, "cli", "pair report entity '" + in.lexicon.name(e) + "' has no embedding");
  rep.pairs = pair_report(ids, table, in.hierarchy);
  {
    auto out = detail::open_output(cfg.out / ("pair-report-" + suffix + ".tsv"));
    out << "#src=" << src << '\n' << "entity\tdepth\thnorm";
    for (EntityId e : ids) out << "\td(" << in.lexicon.name(e) << ')';
    out << '\n';
    for (std::size_t i = 0; i < ids.size(); ++i) {
      out << in.lexicon.name(ids[i]) << '\t' << rep.pairs.depths[i] << '\t'
          << detail::format_double(rep.pairs.hnorms[i]);
      for (double d : rep.pairs.distances[i]) out << '\t' << detail::format_double(d);
      out << '\n';
    }
  }

  if (cfg.ablation) {
    const auto ds = load_dataset(cfg, in);
    rep.ablation = run_ablation(cfg, in, ds, log);
    auto out = detail::open_output(cfg.out / ("ablation-" + suffix + ".tsv"));
    out << "#src=" << src << '\n' << "alpha\tbeta\tbest_epoch\tprecision\trecall\tf1\n";
    for (const auto& r : rep.ablation)
      out << detail::format_double(r.alpha) << '\t' << detail::format_double(r.beta) << '\t' << r.best_epoch << '\t'
          << detail::format_double(r.test.precision) << '\t' << detail::format_double(r.test.recall) << '\t'
          << detail::format_double(r.test.f1) << '\n';
  }
  log << "wrote analysis files to " << cfg.out.string() << '\n';
  return rep;
}

// ---------------------------------------------------------------------------
// export / import

/// Re-emits the configured embedding file at `cfg.output` after validating it.
inline std::size_t command_export_embeddings(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  if (cfg.output.empty()) throw Error(ErrorKind::Config, "cli", "export-embeddings needs 'output'");
  const auto in = load_inputs(cfg);
  const auto table = load_embeddings(cfg, in);
  if (table.source_checksum() == 0) {
    auto stamped = table;
    stamped.set_source_checksum(in.checksum);
    export_embeddings(stamped, in.lexicon, cfg.output);
  } else {
    export_embeddings(table, in.lexicon, cfg.output);
  }
  std::size_t n = 0;
  for (EntityId e = 0; e < table.rows(); ++e) n += table.covered(e) ? 1 : 0;
  log << "exported " << n << " rows to " << cfg.output.string() << '\n';
  return n;
}

/// Reads an external embedding file against the lexicon, stamps it with the
/// hierarchy checksum and stores it where evaluate/analyze will look.
inline ImportReport command_import_embeddings(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  if (cfg.input.empty()) throw Error(ErrorKind::Config, "cli", "import-embeddings needs 'input'");
  const auto in = load_inputs(cfg);
  auto report = import_embeddings(cfg.input, in.lexicon, cfg.manifold());
  detail::require_same_source(in.checksum, report.table.source_checksum(), "embedding file " + cfg.input.string());
  report.table.set_source_checksum(in.checksum);
  detail::ensure_dir(cfg.out);
  const auto dest = embeddings_path(cfg, cfg.single_task(), cfg.single_mode());
  export_embeddings(report.table, in.lexicon, dest);
  auto out = detail::open_output(cfg.out / "import-report.txt");
  out << "src=" << checksum_hex(in.checksum) << '\n'
      << "rows_read=" << report.rows_read << '\n'
      << "projected=" << report.projected << '\n'
      << "missing=" << report.missing.size() << '\n';
  for (const auto& m : report.missing) out << "missing_entity=" << m << '\n';
  log << "imported " << report.rows_read << " rows (" << report.projected << " projected, "
      << report.missing.size() << " entities missing) into " << dest.string() << '\n';
  return report;
}

}  // namespace hit
