#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "hit/error.hpp"
#include "hit/rng.hpp"

namespace hit {

using EntityId = std::uint32_t;
using EntityPair = std::pair<EntityId, EntityId>;  // (child, parent/ancestor)

/// Dense id <-> name mapping. Ids are contiguous from 0 in insertion order.
class Lexicon {
 public:
  Lexicon() = default;

  explicit Lexicon(std::vector<std::string> names) {
    names_.reserve(names.size());
    for (auto& n : names) {
      if (find(n)) throw Error(ErrorKind::Parse, "hierarchy", "duplicate lexicon name '" + n + "'");
      add(std::move(n));
    }
  }

  /// Returns the id of `name`, inserting it if new.
  EntityId add(std::string name) {
    if (name.empty()) throw Error(ErrorKind::Parse, "hierarchy", "empty entity name");
    if (auto it = index_.find(name); it != index_.end()) return it->second;
    const auto id = static_cast<EntityId>(names_.size());
    index_.emplace(name, id);
    names_.push_back(std::move(name));
    return id;
  }

  std::optional<EntityId> find(std::string_view name) const {
    if (auto it = index_.find(std::string(name)); it != index_.end()) return it->second;
    return std::nullopt;
  }

  EntityId id(std::string_view name) const {
    if (auto found = find(name)) return *found;
    throw Error(ErrorKind::Lookup, "hierarchy", "unknown entity '" + std::string(name) + "'");
  }

  const std::string& name(EntityId id) const { return names_.at(id); }
  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

  bool operator==(const Lexicon& other) const { return names_ == other.names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, EntityId> index_;
};

struct EdgeRecord {
  std::string child;
  std::string parent;
};

/// Subsumption DAG over entities 0..n-1 with child->parent edges.
class Hierarchy {
 public:
  Hierarchy() = default;

  /// Builds from id pairs. Duplicates are dropped; self-loops and cycles are
  /// rejected with a cyclic-hierarchy error naming one cycle.
  Hierarchy(std::size_t num_entities, std::vector<EntityPair> edges,
            const Lexicon* names_for_errors = nullptr)
      : parents_(num_entities), children_(num_entities) {
    for (const auto& [c, p] : edges) {
      if (c >= num_entities || p >= num_entities)
        throw Error(ErrorKind::Lookup, "hierarchy", "edge endpoint out of range");
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    edges_ = std::move(edges);
    for (const auto& [c, p] : edges_) {
      if (c == p) throw Error(ErrorKind::CyclicHierarchy, "hierarchy",
                              "self-loop on " + label(c, names_for_errors));
      parents_[c].push_back(p);
      children_[p].push_back(c);
    }
    for (auto& ch : children_) std::sort(ch.begin(), ch.end());
    compute_topological_order(names_for_errors);
    compute_depths();
  }

  std::size_t size() const { return parents_.size(); }
  std::span<const EntityPair> edges() const { return edges_; }
  std::span<const EntityId> parents(EntityId e) const { return parents_.at(e); }
  std::span<const EntityId> children(EntityId e) const { return children_.at(e); }
  bool is_root(EntityId e) const { return parents_.at(e).empty(); }
  bool has_edge(EntityId child, EntityId parent) const {
    const auto& ps = parents_.at(child);
    return std::binary_search(ps.begin(), ps.end(), parent);
  }
  /// Parents precede their children.
  std::span<const EntityId> topological_order() const { return topo_; }
  /// Hops from the imaginary root joining every actual root (roots have depth 1).
  std::size_t depth(EntityId e) const { return depth_.at(e); }

  /// Order-independent fingerprint of the edge set and entity count.
  std::uint64_t checksum(const Lexicon* lexicon = nullptr) const {
    std::uint64_t h = fnv1a64("hit-hierarchy");
    h = splitmix64(h ^ size());
    for (const auto& [c, p] : edges_) h = splitmix64(h ^ ((std::uint64_t{c} << 32) | p));
    if (lexicon)
      for (const auto& n : lexicon->names()) h = fnv1a64(n, splitmix64(h));
    return h;
  }

 private:
  static std::string label(EntityId e, const Lexicon* lex) {
    if (lex && e < lex->size()) return "'" + lex->name(e) + "'";
    return "#" + std::to_string(e);
  }

  void compute_topological_order(const Lexicon* lex) {
    const std::size_t n = size();
    std::vector<std::size_t> pending(n);
    std::queue<EntityId> ready;
    for (EntityId e = 0; e < n; ++e) {
      pending[e] = parents_[e].size();
      if (pending[e] == 0) ready.push(e);
    }
    topo_.reserve(n);
    while (!ready.empty()) {
      const EntityId e = ready.front();
      ready.pop();
      topo_.push_back(e);
      for (EntityId c : children_[e])
        if (--pending[c] == 0) ready.push(c);
    }
    if (topo_.size() == n) return;

    // Every unprocessed node has an unprocessed parent; walking parents from
    // any of them must revisit a node.
    EntityId start = 0;
    while (pending[start] == 0) ++start;
    std::vector<std::size_t> seen_at(n, SIZE_MAX);
    std::vector<EntityId> walk;
    EntityId cur = start;
    while (seen_at[cur] == SIZE_MAX) {
      seen_at[cur] = walk.size();
      walk.push_back(cur);
      for (EntityId p : parents_[cur]) {
        if (pending[p] != 0) {
          cur = p;
          break;
        }
      }
    }
    std::string cycle;
    for (std::size_t i = seen_at[cur]; i < walk.size(); ++i) cycle += label(walk[i], lex) + " -> ";
    cycle += label(cur, lex);
    throw Error(ErrorKind::CyclicHierarchy, "hierarchy", "cycle " + cycle);
  }

  void compute_depths() {
    depth_.assign(size(), 0);
    for (EntityId e : topo_) {
      if (parents_[e].empty()) {
        depth_[e] = 1;
        continue;
      }
      std::size_t best = SIZE_MAX;
      for (EntityId p : parents_[e]) best = std::min(best, depth_[p] + 1);
      depth_[e] = best;
    }
  }

  std::vector<EntityPair> edges_;
  std::vector<std::vector<EntityId>> parents_;
  std::vector<std::vector<EntityId>> children_;
  std::vector<EntityId> topo_;
  std::vector<std::size_t> depth_;
};

/// Transitive closure of a Hierarchy.
///
/// `ancestors(e)` lists every entity reachable from e through one or more
/// child->parent hops (the union of direct and indirect subsumers). Membership
/// in that union is answered from a hashed pair set.
class ClosureIndex {
 public:
  ClosureIndex() = default;

  explicit ClosureIndex(const Hierarchy& h) : ancestors_(h.size()) {
    for (EntityId e : h.topological_order()) {
      auto& anc = ancestors_[e];
      for (EntityId p : h.parents(e)) {
        anc.push_back(p);
        anc.insert(anc.end(), ancestors_[p].begin(), ancestors_[p].end());
      }
      std::sort(anc.begin(), anc.end());
      anc.erase(std::unique(anc.begin(), anc.end()), anc.end());
    }
    std::size_t total = 0;
    for (const auto& a : ancestors_) total += a.size();
    members_.reserve(total);
    for (EntityId e = 0; e < ancestors_.size(); ++e) {
      for (EntityId a : ancestors_[e]) {
        members_.insert(key(e, a));
        if (!h.has_edge(e, a)) indirect_.emplace_back(e, a);
      }
    }
  }

  /// (child, ancestor) in E u T.
  bool contains(EntityId child, EntityId ancestor) const {
    return members_.contains(key(child, ancestor));
  }
  std::span<const EntityId> ancestors(EntityId e) const { return ancestors_.at(e); }
  /// T: reachable pairs that are not direct edges, sorted lexicographically.
  std::span<const EntityPair> indirect() const { return indirect_; }
  std::size_t size() const { return members_.size(); }

 private:
  static std::uint64_t key(EntityId a, EntityId b) { return (std::uint64_t{a} << 32) | b; }

  std::vector<std::vector<EntityId>> ancestors_;
  std::unordered_set<std::uint64_t> members_;
  std::vector<EntityPair> indirect_;
};

inline ClosureIndex transitive_closure(const Hierarchy& h) { return ClosureIndex(h); }

inline Hierarchy load_edges(std::span<const EdgeRecord> records, const Lexicon& lexicon) {
  std::vector<EntityPair> edges;
  edges.reserve(records.size());
  for (const auto& r : records) edges.emplace_back(lexicon.id(r.child), lexicon.id(r.parent));
  return Hierarchy(lexicon.size(), std::move(edges), &lexicon);
}

/// Closed-world negative test: (e1, e2) is neither a direct nor an indirect
/// subsumption, and e1 != e2.
inline bool is_valid_negative(EntityId e1, EntityId e2, const ClosureIndex& t) {
  return e1 != e2 && !t.contains(e1, e2);
}

inline std::size_t depth(EntityId e, const Hierarchy& h) { return h.depth(e); }

/// Entities sharing at least one parent with e, excluding e.
inline std::vector<EntityId> siblings(EntityId e, const Hierarchy& h) {
  std::vector<EntityId> out;
  for (EntityId p : h.parents(e))
    for (EntityId c : h.children(p))
      if (c != e) out.push_back(c);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

namespace detail {

inline bool contains_id(std::span<const EntityId> ids, EntityId x) {
  return std::find(ids.begin(), ids.end(), x) != ids.end();
}

/// Appends `k` distinct valid negatives of e not already in `out`.
inline void fill_random_negatives(EntityId e, std::size_t k, const Hierarchy& h,
                                  const ClosureIndex& t, Rng& rng, std::vector<EntityId>& out) {
  const std::size_t n = h.size();
  std::size_t already_valid = 0;
  for (EntityId x : out) already_valid += is_valid_negative(e, x, t) ? 1 : 0;
  const std::size_t available = n - 1 - t.ancestors(e).size() - already_valid;
  if (available < k)
    throw Error(ErrorKind::InsufficientNegatives, "hierarchy",
                "entity #" + std::to_string(e) + " has " + std::to_string(available) +
                    " unused valid negatives, " + std::to_string(k) + " requested");
  const std::size_t base = out.size();
  if (available >= 4 * k) {
    // Dense case: rejection sampling terminates quickly.
    while (out.size() - base < k) {
      const auto x = static_cast<EntityId>(rng.uniform_index(n));
      if (is_valid_negative(e, x, t) && !contains_id(out, x)) out.push_back(x);
    }
    return;
  }
  std::vector<EntityId> pool;
  pool.reserve(available);
  for (EntityId x = 0; x < n; ++x)
    if (is_valid_negative(e, x, t) && !contains_id(out, x)) pool.push_back(x);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng.uniform_index(pool.size() - i);
    std::swap(pool[i], pool[j]);
    out.push_back(pool[i]);
  }
}

}  // namespace detail

/// k distinct entities x with is_valid_negative(e, x).
inline std::vector<EntityId> sample_random_negatives(EntityId e, std::size_t k, const Hierarchy& h,
                                                     const ClosureIndex& t, Rng& rng) {
  std::vector<EntityId> out;
  out.reserve(k);
  detail::fill_random_negatives(e, k, h, t, rng, out);
  return out;
}

/// Valid siblings first (sampled without replacement when more than k),
/// topped up with random valid negatives to exactly k.
inline std::vector<EntityId> sample_hard_negatives(EntityId e, std::size_t k, const Hierarchy& h,
                                                   const ClosureIndex& t, Rng& rng) {
  std::vector<EntityId> pool;
  for (EntityId s : siblings(e, h))
    if (is_valid_negative(e, s, t)) pool.push_back(s);
  std::vector<EntityId> out;
  out.reserve(k);
  const std::size_t take = std::min(k, pool.size());
  if (take == pool.size()) {
    out = std::move(pool);
  } else {
    for (std::size_t i = 0; i < take; ++i) {
      const std::size_t j = i + rng.uniform_index(pool.size() - i);
      std::swap(pool[i], pool[j]);
      out.push_back(pool[i]);
    }
  }
  if (out.size() < k) detail::fill_random_negatives(e, k - out.size(), h, t, rng, out);
  return out;
}

// ---------------------------------------------------------------------------
// Files: lexicon `id<TAB>name`, edges `child<TAB>parent`; '#' lines ignored.

namespace detail {

inline std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find('\t', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? line.npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::ifstream open_input(const std::filesystem::path& path, std::string_view module) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, module, "cannot open '" + path.string() + "'");
  return in;
}

inline void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

}  // namespace detail

inline Lexicon read_lexicon(const std::filesystem::path& path) {
  auto in = detail::open_input(path, "hierarchy");
  std::vector<std::string> names;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    detail::strip_cr(line);
    if (line.empty() || line.front() == '#') continue;
    const auto cols = detail::split_tabs(line);
    const auto where = path.string() + ":" + std::to_string(lineno);
    if (cols.size() != 2 || cols[1].empty())
      throw Error(ErrorKind::Parse, "hierarchy", where + ": expected 'id<TAB>name'");
    std::size_t id = 0;
    try {
      std::size_t used = 0;
      id = std::stoull(std::string(cols[0]), &used);
      if (used != cols[0].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw Error(ErrorKind::Parse, "hierarchy", where + ": bad id '" + std::string(cols[0]) + "'");
    }
    if (id != names.size())
      throw Error(ErrorKind::Parse, "hierarchy", where + ": ids must be contiguous from 0");
    names.emplace_back(cols[1]);
  }
  return Lexicon(std::move(names));
}

inline void write_lexicon(const Lexicon& lex, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "hierarchy", "cannot write '" + path.string() + "'");
  for (EntityId i = 0; i < lex.size(); ++i) out << i << '\t' << lex.name(i) << '\n';
}

inline std::vector<EdgeRecord> read_edge_file(const std::filesystem::path& path) {
  auto in = detail::open_input(path, "hierarchy");
  std::vector<EdgeRecord> edges;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    detail::strip_cr(line);
    if (line.empty() || line.front() == '#') continue;
    const auto cols = detail::split_tabs(line);
    if (cols.size() != 2 || cols[0].empty() || cols[1].empty())
      throw Error(ErrorKind::Parse, "hierarchy",
                  path.string() + ":" + std::to_string(lineno) + ": expected 'child<TAB>parent'");
    edges.push_back({std::string(cols[0]), std::string(cols[1])});
  }
  return edges;
}

/// Lexicon implied by an edge list when no lexicon file is supplied: names
/// in order of first appearance.
inline Lexicon lexicon_from_edges(std::span<const EdgeRecord> edges) {
  Lexicon lex;
  for (const auto& e : edges) {
    lex.add(e.child);
    lex.add(e.parent);
  }
  return lex;
}

}  // namespace hit
