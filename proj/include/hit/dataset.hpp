#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "hit/error.hpp"
#include "hit/hierarchy.hpp"
#include "hit/rng.hpp"

namespace hit {

enum class Task { MultiHop, MixedHop };
enum class NegativeMode { Random, Hard };

constexpr std::string_view to_string(Task t) { return t == Task::MultiHop ? "multi" : "mixed"; }
constexpr std::string_view to_string(NegativeMode m) {
  return m == NegativeMode::Random ? "random" : "hard";
}

inline Task parse_task(std::string_view s) {
  if (s == "multi" || s == "multi_hop" || s == "multi-hop") return Task::MultiHop;
  if (s == "mixed" || s == "mixed_hop" || s == "mixed-hop") return Task::MixedHop;
  throw Error(ErrorKind::Config, "dataset", "unknown task '" + std::string(s) + "'");
}

inline NegativeMode parse_negative_mode(std::string_view s) {
  if (s == "random") return NegativeMode::Random;
  if (s == "hard") return NegativeMode::Hard;
  throw Error(ErrorKind::Config, "dataset", "unknown negative mode '" + std::string(s) + "'");
}

struct Triplet {
  EntityId child = 0;
  EntityId positive_parent = 0;
  EntityId negative_parent = 0;
  bool operator==(const Triplet&) const = default;
};

struct LabeledPair {
  EntityId child = 0;
  EntityId candidate_parent = 0;
  bool label = false;
  bool operator==(const LabeledPair&) const = default;
};

struct TaskDataset {
  Task task = Task::MultiHop;
  NegativeMode mode = NegativeMode::Random;
  std::size_t k = 10;
  std::uint64_t seed = 0;
  std::uint64_t source_checksum = 0;
  std::vector<Triplet> train;
  std::vector<LabeledPair> val;
  std::vector<LabeledPair> test;
  bool operator==(const TaskDataset&) const = default;
};

/// Positive (child, parent) pairs per split.
struct SplitPositives {
  std::vector<EntityPair> train;
  std::vector<EntityPair> val;
  std::vector<EntityPair> test;
};

inline std::size_t round_half_up(std::size_t n, double ratio) {
  return static_cast<std::size_t>(std::floor(static_cast<double>(n) * ratio + 0.5));
}

namespace detail {

inline void check_ratios(double val_ratio, double test_ratio) {
  if (!(val_ratio > 0.0) || !(test_ratio > 0.0) || !(val_ratio + test_ratio <= 1.0))
    throw Error(ErrorKind::Split, "dataset",
                "holdout ratios must be positive with val + test <= 1");
}

/// Shuffles a canonically sorted copy of `pairs` and carves off the two
/// holdouts. The test portion is clamped to what the validation portion
/// leaves over.
inline void carve(std::span<const EntityPair> pairs, double val_ratio, double test_ratio, Rng& rng,
                  std::vector<EntityPair>& rest, std::vector<EntityPair>& val,
                  std::vector<EntityPair>& test) {
  std::vector<EntityPair> order(pairs.begin(), pairs.end());
  std::sort(order.begin(), order.end());
  rng.shuffle(std::span<EntityPair>(order));
  const std::size_t n_val = std::min(round_half_up(order.size(), val_ratio), order.size());
  const std::size_t n_test = std::min(round_half_up(order.size(), test_ratio), order.size() - n_val);
  val.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val),
              order.begin() + static_cast<std::ptrdiff_t>(n_val + n_test));
  rest.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val + n_test), order.end());
}

}  // namespace detail

/// Multi-hop inference: train on every direct edge, hold out two disjoint
/// portions of the indirect subsumptions.
inline SplitPositives split_multihop(const Hierarchy& h, const ClosureIndex& t,
                                     double val_ratio, double test_ratio, Rng& rng) {
  detail::check_ratios(val_ratio, test_ratio);
  if (t.indirect().empty())
    throw Error(ErrorKind::Split, "dataset", "hierarchy has no indirect subsumptions to hold out");
  SplitPositives out;
  std::vector<EntityPair> unused;
  detail::carve(t.indirect(), val_ratio, test_ratio, rng, unused, out.val, out.test);
  out.train.assign(h.edges().begin(), h.edges().end());
  return out;
}

/// Mixed-hop prediction: hold out portions of the direct edges as well; the
/// indirect holdouts are drawn first with the same stream so that a given seed
/// yields the same indirect holdouts as split_multihop.
inline SplitPositives split_mixedhop(const Hierarchy& h, const ClosureIndex& t,
                                     double val_ratio, double test_ratio, Rng& rng) {
  detail::check_ratios(val_ratio, test_ratio);
  std::vector<EntityPair> unused, t_val, t_test, e_val, e_test;
  detail::carve(t.indirect(), val_ratio, test_ratio, rng, unused, t_val, t_test);
  SplitPositives out;
  detail::carve(h.edges(), val_ratio, test_ratio, rng, out.train, e_val, e_test);
  std::sort(out.train.begin(), out.train.end());
  out.val = std::move(e_val);
  out.val.insert(out.val.end(), t_val.begin(), t_val.end());
  out.test = std::move(e_test);
  out.test.insert(out.test.end(), t_test.begin(), t_test.end());
  return out;
}

inline std::vector<EntityId> sample_negatives(EntityId e, std::size_t k, NegativeMode mode,
                                              const Hierarchy& h, const ClosureIndex& t, Rng& rng) {
  return mode == NegativeMode::Hard ? sample_hard_negatives(e, k, h, t, rng)
                                    : sample_random_negatives(e, k, h, t, rng);
}

/// k triplets per positive, sharing (e, e+) and differing in e-.
inline std::vector<Triplet> build_triplets(std::span<const EntityPair> positives, std::size_t k,
                                           NegativeMode mode, const Hierarchy& h,
                                           const ClosureIndex& t, Rng& rng) {
  if (k == 0) throw Error(ErrorKind::Config, "dataset", "k must be >= 1");
  std::vector<Triplet> out;
  out.reserve(positives.size() * k);
  for (const auto& [child, parent] : positives)
    for (EntityId neg : sample_negatives(child, k, mode, h, t, rng))
      out.push_back({child, parent, neg});
  return out;
}

/// One true pair followed by k false pairs per positive.
inline std::vector<LabeledPair> build_eval_pairs(std::span<const EntityPair> positives,
                                                 std::size_t k, NegativeMode mode,
                                                 const Hierarchy& h, const ClosureIndex& t,
                                                 Rng& rng) {
  if (k == 0) throw Error(ErrorKind::Config, "dataset", "k must be >= 1");
  std::vector<LabeledPair> out;
  out.reserve(positives.size() * (k + 1));
  for (const auto& [child, parent] : positives) {
    out.push_back({child, parent, true});
    for (EntityId neg : sample_negatives(child, k, mode, h, t, rng)) out.push_back({child, neg, false});
  }
  return out;
}

struct DatasetSpec {
  Task task = Task::MultiHop;
  NegativeMode mode = NegativeMode::Random;
  double val_ratio = 0.05;
  double test_ratio = 0.05;
  std::size_t k = 10;
  std::uint64_t seed = 0;
};

/// Full pipeline for one task/mode. Randomness is drawn from named
/// sub-streams of `spec.seed` so changing one stage leaves the others intact.
inline TaskDataset build_task_dataset(const Hierarchy& h, const ClosureIndex& t,
                                      const DatasetSpec& spec, std::uint64_t source_checksum) {
  auto split_rng = Rng::stream(spec.seed, "split");
  const SplitPositives pos = spec.task == Task::MultiHop
                                 ? split_multihop(h, t, spec.val_ratio, spec.test_ratio, split_rng)
                                 : split_mixedhop(h, t, spec.val_ratio, spec.test_ratio, split_rng);
  TaskDataset ds;
  ds.task = spec.task;
  ds.mode = spec.mode;
  ds.k = spec.k;
  ds.seed = spec.seed;
  ds.source_checksum = source_checksum;
  auto train_rng = Rng::stream(spec.seed, "negatives/train");
  auto val_rng = Rng::stream(spec.seed, "negatives/val");
  auto test_rng = Rng::stream(spec.seed, "negatives/test");
  ds.train = build_triplets(pos.train, spec.k, spec.mode, h, t, train_rng);
  ds.val = build_eval_pairs(pos.val, spec.k, spec.mode, h, t, val_rng);
  ds.test = build_eval_pairs(pos.test, spec.k, spec.mode, h, t, test_rng);
  return ds;
}

// ---------------------------------------------------------------------------
// Serialization.

inline std::string checksum_hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

inline void write_dataset(const TaskDataset& ds, std::ostream& out) {
  out << "#hit-dataset v1 task=" << to_string(ds.task) << " mode=" << to_string(ds.mode)
      << " k=" << ds.k << " seed=" << ds.seed << " src=" << checksum_hex(ds.source_checksum) << '\n';
  for (const auto& tr : ds.train)
    out << "T\t" << tr.child << '\t' << tr.positive_parent << '\t' << tr.negative_parent << '\n';
  for (const auto& p : ds.val)
    out << "P\tval\t" << p.child << '\t' << p.candidate_parent << '\t' << (p.label ? 1 : 0) << '\n';
  for (const auto& p : ds.test)
    out << "P\ttest\t" << p.child << '\t' << p.candidate_parent << '\t' << (p.label ? 1 : 0) << '\n';
  out << "#end triplets=" << ds.train.size() << " val=" << ds.val.size()
      << " test=" << ds.test.size() << '\n';
}

inline std::string serialize(const TaskDataset& ds) {
  std::ostringstream os;
  write_dataset(ds, os);
  return os.str();
}

inline void serialize(const TaskDataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "dataset", "cannot write '" + path.string() + "'");
  write_dataset(ds, out);
  if (!out) throw Error(ErrorKind::Io, "dataset", "write failed for '" + path.string() + "'");
}

namespace detail {

/// Parses whitespace-separated key=value tokens after a fixed tag.
inline std::unordered_map<std::string, std::string> parse_header_fields(std::string_view rest) {
  std::unordered_map<std::string, std::string> fields;
  std::istringstream is{std::string(rest)};
  std::string tok;
  while (is >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos || eq == 0) continue;
    fields[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  return fields;
}

inline std::uint64_t parse_u64(std::string_view s, int base, std::string_view module,
                               const std::string& where) {
  try {
    std::size_t used = 0;
    const auto v = std::stoull(std::string(s), &used, base);
    if (used != s.size() || s.empty() || s.front() == '-') throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorKind::Parse, module, where + ": bad integer '" + std::string(s) + "'");
  }
}

}  // namespace detail

inline TaskDataset read_dataset(std::istream& in, const std::string& source = "<dataset>") {
  TaskDataset ds;
  std::string line;
  std::size_t lineno = 0;
  auto where = [&] { return source + ":" + std::to_string(lineno); };
  auto id = [&](std::string_view s) {
    const auto v = detail::parse_u64(s, 10, "dataset", where());
    if (v > UINT32_MAX) throw Error(ErrorKind::Parse, "dataset", where() + ": id out of range");
    return static_cast<EntityId>(v);
  };

  if (!std::getline(in, line)) throw Error(ErrorKind::Parse, "dataset", source + ":1: empty file");
  ++lineno;
  detail::strip_cr(line);
  constexpr std::string_view tag = "#hit-dataset v1";
  if (line.rfind(tag, 0) != 0)
    throw Error(ErrorKind::Parse, "dataset", where() + ": missing '#hit-dataset v1' header");
  auto fields = detail::parse_header_fields(std::string_view(line).substr(tag.size()));
  for (const char* key : {"task", "mode", "k", "seed", "src"})
    if (!fields.contains(key))
      throw Error(ErrorKind::Parse, "dataset", where() + ": header lacks '" + key + "'");
  try {
    ds.task = parse_task(fields["task"]);
    ds.mode = parse_negative_mode(fields["mode"]);
  } catch (const Error& e) {
    throw Error(ErrorKind::Parse, "dataset", where() + ": " + e.what());
  }
  ds.k = detail::parse_u64(fields["k"], 10, "dataset", where());
  ds.seed = detail::parse_u64(fields["seed"], 10, "dataset", where());
  ds.source_checksum = detail::parse_u64(fields["src"], 16, "dataset", where());

  bool ended = false;
  while (std::getline(in, line)) {
    ++lineno;
    detail::strip_cr(line);
    if (ended) {
      if (!line.empty()) throw Error(ErrorKind::Parse, "dataset", where() + ": data after #end");
      continue;
    }
    if (line.rfind("#end", 0) == 0) {
      auto f = detail::parse_header_fields(std::string_view(line).substr(4));
      const auto expect = [&](const char* key, std::size_t actual) {
        if (!f.contains(key) || detail::parse_u64(f[key], 10, "dataset", where()) != actual)
          throw Error(ErrorKind::Parse, "dataset", where() + ": record count mismatch for " + key);
      };
      expect("triplets", ds.train.size());
      expect("val", ds.val.size());
      expect("test", ds.test.size());
      ended = true;
      continue;
    }
    if (line.empty() || line.front() == '#') continue;
    const auto cols = detail::split_tabs(line);
    if (cols[0] == "T" && cols.size() == 4) {
      ds.train.push_back({id(cols[1]), id(cols[2]), id(cols[3])});
    } else if (cols[0] == "P" && cols.size() == 5 && (cols[4] == "0" || cols[4] == "1")) {
      LabeledPair p{id(cols[2]), id(cols[3]), cols[4] == "1"};
      if (cols[1] == "val") ds.val.push_back(p);
      else if (cols[1] == "test") ds.test.push_back(p);
      else throw Error(ErrorKind::Parse, "dataset", where() + ": unknown split '" + std::string(cols[1]) + "'");
    } else {
      throw Error(ErrorKind::Parse, "dataset", where() + ": malformed record");
    }
  }
  if (!ended) throw Error(ErrorKind::Parse, "dataset", where() + ": truncated file (no #end line)");
  return ds;
}

inline TaskDataset deserialize(const std::filesystem::path& path) {
  auto in = detail::open_input(path, "dataset");
  return read_dataset(in, path.string());
}

inline TaskDataset deserialize_string(const std::string& text) {
  std::istringstream in(text);
  return read_dataset(in);
}

/// Positive pairs (label = true) of an evaluation split, in file order.
inline std::vector<EntityPair> positives_of(std::span<const LabeledPair> pairs) {
  std::vector<EntityPair> out;
  for (const auto& p : pairs)
    if (p.label) out.emplace_back(p.child, p.candidate_parent);
  return out;
}

}  // namespace hit
