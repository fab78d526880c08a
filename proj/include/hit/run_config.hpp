#pragma once

#include <cerrno>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hit/dataset.hpp"
#include "hit/error.hpp"
#include "hit/loss.hpp"
#include "hit/manifold.hpp"
#include "hit/probe.hpp"
#include "hit/trainer.hpp"

namespace hit {

/// Everything a command needs. Populated from a flat `key = value` file and
/// `--set key=value` overrides; see `config_keys()` for the recognised keys.
struct RunConfig {
  std::filesystem::path edges;
  std::filesystem::path lexicon;  // optional; derived from the edge list if empty
  std::filesystem::path out = "hit-out";
  std::filesystem::path dataset;     // optional override of the dataset file
  std::filesystem::path embeddings;  // optional override of the embedding file
  std::filesystem::path input;       // import-embeddings source
  std::filesystem::path output;      // export-embeddings target

  std::string task = "multi";       // multi | mixed | all (build-dataset only)
  std::string negatives = "random";  // random | hard | all (build-dataset only)
  std::uint64_t seed = 0;
  double val_ratio = 0.05;
  double test_ratio = 0.05;
  std::size_t k = 10;

  std::size_t dim = 32;
  double curvature = 0.0;  // 0 selects 1/dim
  double eps = 1e-5;

  TrainConfig train{};
  LossConfig loss{};
  GridSpec grid{};

  double bin_width = 0.5;
  std::vector<std::string> report_entities;
  bool ablation = false;
  std::vector<std::pair<double, double>> ablation_grid{{5.0, 0.1}, {3.0, 0.1}, {1.0, 0.1}, {5.0, 0.5}};

  ManifoldConfig manifold() const {
    return curvature > 0.0 ? ManifoldConfig(dim, curvature, eps) : ManifoldConfig(dim, curvature_for_dim(dim), eps);
  }
  Task single_task() const { return parse_task(task); }
  NegativeMode single_mode() const { return parse_negative_mode(negatives); }

  void validate() const {
    (void)manifold();
    train.validate();
    loss.validate();
    detail::check_ratios(val_ratio, test_ratio);
    if (k == 0) throw Error(ErrorKind::Config, "cli", "k must be >= 1");
    if (!(bin_width > 0.0)) throw Error(ErrorKind::Config, "cli", "bin_width must be positive");
    for (const auto& t : {task, negatives})
      if (t.empty()) throw Error(ErrorKind::Config, "cli", "task/negatives must not be empty");
    if (task != "all") (void)single_task();
    if (negatives != "all") (void)single_mode();
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const auto item = trim(s.substr(start, comma == std::string_view::npos ? s.npos : comma - start));
    if (!item.empty()) out.push_back(item);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline double config_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end)
    throw Error(ErrorKind::Config, "cli", "key '" + key + "': expected a number, got '" + v + "'");
  return out;
}

inline std::uint64_t config_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end)
    throw Error(ErrorKind::Config, "cli", "key '" + key + "': expected a nonnegative integer, got '" + v + "'");
  return out;
}

inline bool config_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw Error(ErrorKind::Config, "cli", "key '" + key + "': expected true/false, got '" + v + "'");
}

}  // namespace detail

struct ConfigKey {
  std::string_view name;
  std::string_view help;
};

inline const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys{
      {"edges", "edge list, one 'child<TAB>parent' per line"},
      {"lexicon", "optional 'id<TAB>name' file fixing entity ids"},
      {"out", "output directory"},
      {"dataset", "dataset file (default <out>/dataset-<task>-<negatives>.tsv)"},
      {"embeddings", "embedding file (default <out>/embeddings-<task>-<negatives>.tsv)"},
      {"input", "import-embeddings: external embedding file"},
      {"output", "export-embeddings: destination file"},
      {"task", "multi | mixed (build-dataset also accepts all)"},
      {"negatives", "random | hard (build-dataset also accepts all)"},
      {"seed", "top-level seed"},
      {"val_ratio", "validation share of the held-out pairs"},
      {"test_ratio", "test share of the held-out pairs"},
      {"k", "negatives per positive"},
      {"dim", "embedding dimension"},
      {"curvature", "ball curvature; 0 means 1/dim"},
      {"eps", "boundary margin for projection"},
      {"epochs", "training epochs"},
      {"batch_size", "triplets per step"},
      {"learning_rate", "peak learning rate"},
      {"warmup_steps", "linear warm-up length"},
      {"init_scale", "initialisation radius; 0 means 1e-3/sqrt(c)"},
      {"check_every_step", "verify the in-ball invariant every step"},
      {"alpha", "clustering margin"},
      {"beta", "centripetal margin"},
      {"cluster_weight", "weight of the clustering loss"},
      {"centripetal_weight", "weight of the centripetal loss"},
      {"lambdas", "comma list of probe lambda values"},
      {"thresholds", "comma list of explicit thresholds (empty: quantiles)"},
      {"threshold_quantiles", "number of score quantiles tried as thresholds"},
      {"bin_width", "histogram bin width in hyperbolic norm"},
      {"report_entities", "comma list of entity names for the pair report"},
      {"ablation", "analyze: also sweep the (alpha,beta) grid"},
      {"ablation_grid", "comma list of alpha:beta pairs"},
  };
  return keys;
}

/// Applies one key=value assignment; unknown keys are config errors.
inline void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
  using detail::config_bool;
  using detail::config_double;
  using detail::config_u64;
  if (key == "edges") cfg.edges = value;
  else if (key == "lexicon") cfg.lexicon = value;
  else if (key == "out") cfg.out = value;
  else if (key == "dataset") cfg.dataset = value;
  else if (key == "embeddings") cfg.embeddings = value;
  else if (key == "input") cfg.input = value;
  else if (key == "output") cfg.output = value;
  else if (key == "task") cfg.task = value;
  else if (key == "negatives") cfg.negatives = value;
  else if (key == "seed") cfg.seed = config_u64(key, value);
  else if (key == "val_ratio") cfg.val_ratio = config_double(key, value);
  else if (key == "test_ratio") cfg.test_ratio = config_double(key, value);
  else if (key == "k") cfg.k = config_u64(key, value);
  else if (key == "dim") cfg.dim = config_u64(key, value);
  else if (key == "curvature") cfg.curvature = config_double(key, value);
  else if (key == "eps") cfg.eps = config_double(key, value);
  else if (key == "epochs") cfg.train.epochs = config_u64(key, value);
  else if (key == "batch_size") cfg.train.batch_size = config_u64(key, value);
  else if (key == "learning_rate") cfg.train.learning_rate = config_double(key, value);
  else if (key == "warmup_steps") cfg.train.warmup_steps = config_u64(key, value);
  else if (key == "init_scale") cfg.train.init_scale = config_double(key, value);
  else if (key == "check_every_step") cfg.train.check_every_step = config_bool(key, value);
  else if (key == "alpha") cfg.loss.alpha = config_double(key, value);
  else if (key == "beta") cfg.loss.beta = config_double(key, value);
  else if (key == "cluster_weight") cfg.loss.cluster_weight = config_double(key, value);
  else if (key == "centripetal_weight") cfg.loss.centripetal_weight = config_double(key, value);
  else if (key == "lambdas") {
    cfg.grid.lambda_values.clear();
    for (const auto& s : detail::split_list(value)) cfg.grid.lambda_values.push_back(config_double(key, s));
  } else if (key == "thresholds") {
    cfg.grid.threshold_values.clear();
    for (const auto& s : detail::split_list(value)) cfg.grid.threshold_values.push_back(config_double(key, s));
  } else if (key == "threshold_quantiles") cfg.grid.threshold_quantiles = config_u64(key, value);
  else if (key == "bin_width") cfg.bin_width = config_double(key, value);
  else if (key == "report_entities") cfg.report_entities = detail::split_list(value);
  else if (key == "ablation") cfg.ablation = config_bool(key, value);
  else if (key == "ablation_grid") {
    cfg.ablation_grid.clear();
    for (const auto& s : detail::split_list(value)) {
      const auto colon = s.find(':');
      if (colon == std::string::npos)
        throw Error(ErrorKind::Config, "cli", "ablation_grid entries are alpha:beta, got '" + s + "'");
      cfg.ablation_grid.emplace_back(config_double(key, s.substr(0, colon)),
                                     config_double(key, s.substr(colon + 1)));
    }
  } else {
    throw Error(ErrorKind::Config, "cli", "unknown config key '" + key + "'");
  }
}

/// Parses "key=value"; whitespace around either side is ignored.
inline void apply_assignment(RunConfig& cfg, std::string_view assignment, const std::string& where = "--set") {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos)
    throw Error(ErrorKind::Config, "cli", where + ": expected key=value, got '" + std::string(assignment) + "'");
  const auto key = detail::trim(assignment.substr(0, eq));
  if (key.empty()) throw Error(ErrorKind::Config, "cli", where + ": empty key");
  try {
    apply_setting(cfg, key, detail::trim(assignment.substr(eq + 1)));
  } catch (const Error& e) {
    if (where == "--set") throw;
    throw Error(e.kind(), "cli", where + ": " + e.what());
  }
}

/// Reads a config file: one `key = value` per line, `#` starts a comment
/// line. Relative paths inside it are taken relative to the file.
inline void load_config_file(RunConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cli", "cannot open config '" + path.string() + "'");
  const auto base = path.parent_path();
  const std::unordered_map<std::string, std::filesystem::path*> paths{
      {"edges", &cfg.edges},   {"lexicon", &cfg.lexicon},       {"out", &cfg.out},
      {"dataset", &cfg.dataset}, {"embeddings", &cfg.embeddings}, {"input", &cfg.input},
      {"output", &cfg.output}};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    apply_assignment(cfg, t, path.string() + ":" + std::to_string(lineno));
    const auto it = paths.find(detail::trim(t.substr(0, t.find('='))));
    if (it == paths.end()) continue;
    auto& p = *it->second;
    if (!p.empty() && p.is_relative()) p = (base / p).lexically_normal();
  }
}

/// key=value dump of the effective configuration, in `config_keys()` order.
inline std::string describe(const RunConfig& cfg) {
  const auto list = [](const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + detail::format_double(v[i]);
    return s;
  };
  std::ostringstream os;
  os << "edges=" << cfg.edges.string() << '\n'
     << "lexicon=" << cfg.lexicon.string() << '\n'
     << "out=" << cfg.out.string() << '\n'
     << "task=" << cfg.task << '\n'
     << "negatives=" << cfg.negatives << '\n'
     << "seed=" << cfg.seed << '\n'
     << "val_ratio=" << detail::format_double(cfg.val_ratio) << '\n'
     << "test_ratio=" << detail::format_double(cfg.test_ratio) << '\n'
     << "k=" << cfg.k << '\n'
     << "dim=" << cfg.dim << '\n'
     << "curvature=" << detail::format_double(cfg.manifold().curvature) << '\n'
     << "eps=" << detail::format_double(cfg.eps) << '\n'
     << "epochs=" << cfg.train.epochs << '\n'
     << "batch_size=" << cfg.train.batch_size << '\n'
     << "learning_rate=" << detail::format_double(cfg.train.learning_rate) << '\n'
     << "warmup_steps=" << cfg.train.warmup_steps << '\n'
     << "init_scale=" << detail::format_double(cfg.train.init_scale) << '\n'
     << "alpha=" << detail::format_double(cfg.loss.alpha) << '\n'
     << "beta=" << detail::format_double(cfg.loss.beta) << '\n'
     << "cluster_weight=" << detail::format_double(cfg.loss.cluster_weight) << '\n'
     << "centripetal_weight=" << detail::format_double(cfg.loss.centripetal_weight) << '\n'
     << "lambdas=" << list(cfg.grid.lambda_values) << '\n'
     << "thresholds=" << list(cfg.grid.threshold_values) << '\n'
     << "threshold_quantiles=" << cfg.grid.threshold_quantiles << '\n';
  return os.str();
}

}  // namespace hit
