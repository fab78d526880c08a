#pragma once

#include <string>
#include <vector>

#include "hit/hierarchy.hpp"

namespace hit {

/// Complete tree with `branching` children per node and `levels` levels
/// (root included). Node names are dotted paths from the root, "r", "r.0",
/// "r.0.2", ... Ids follow breadth-first order.
inline std::vector<EdgeRecord> balanced_tree_edges(std::size_t branching, std::size_t levels) {
  std::vector<EdgeRecord> edges;
  std::vector<std::string> frontier{"r"};
  for (std::size_t l = 1; l < levels; ++l) {
    std::vector<std::string> next;
    for (const auto& p : frontier)
      for (std::size_t i = 0; i < branching; ++i) {
        next.push_back(p + "." + std::to_string(i));
        edges.push_back({next.back(), p});
      }
    frontier = std::move(next);
  }
  return edges;
}

inline Lexicon balanced_tree_lexicon(std::size_t branching, std::size_t levels) {
  Lexicon lex;
  lex.add("r");
  for (const auto& e : balanced_tree_edges(branching, levels)) lex.add(e.child);
  return lex;
}

}  // namespace hit
