#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "hit/dataset.hpp"
#include "hit/error.hpp"
#include "hit/hierarchy.hpp"
#include "hit/manifold.hpp"
#include "hit/rng.hpp"

namespace hit {

/// n x d row-major matrix of ball points, one row per entity. Rows that an
/// import did not supply are marked uncovered.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(std::size_t rows, const ManifoldConfig& manifold)
      : manifold_(manifold), rows_(rows), data_(rows * manifold.dim, 0.0), covered_(rows, 1) {}

  std::size_t rows() const { return rows_; }
  std::size_t dim() const { return manifold_.dim; }
  const ManifoldConfig& manifold() const { return manifold_; }

  std::span<const double> row(EntityId e) const {
    check(e);
    return {data_.data() + static_cast<std::size_t>(e) * dim(), dim()};
  }
  std::span<double> row_mut(EntityId e) {
    check(e);
    return {data_.data() + static_cast<std::size_t>(e) * dim(), dim()};
  }

  bool covered(EntityId e) const { return e < rows_ && covered_[e] != 0; }
  void set_covered(EntityId e, bool v) {
    check(e);
    covered_[e] = v ? 1 : 0;
  }

  /// Checksum of the hierarchy this table was trained against; 0 = unknown.
  std::uint64_t source_checksum() const { return source_checksum_; }
  void set_source_checksum(std::uint64_t v) { source_checksum_ = v; }

  /// Throws unless every row lies strictly inside the ball.
  void check_in_ball() const {
    for (EntityId e = 0; e < rows_; ++e) {
      const auto r = row(e);
      double sq = 0.0;
      for (double x : r) sq += x * x;
      if (!std::isfinite(sq) || !(manifold_.curvature * sq < 1.0))
        throw Error(ErrorKind::InvalidValue, "training",
                    "row " + std::to_string(e) + " left the open ball");
    }
  }

  bool operator==(const EmbeddingTable&) const = default;

 private:
  void check(EntityId e) const {
    if (e >= rows_)
      throw Error(ErrorKind::Coverage, "training",
                  "entity #" + std::to_string(e) + " beyond table of " + std::to_string(rows_) + " rows");
  }

  ManifoldConfig manifold_{};
  std::size_t rows_ = 0;
  std::vector<double> data_;
  std::vector<std::uint8_t> covered_;
  std::uint64_t source_checksum_ = 0;
};

/// Rows drawn uniformly from the origin-centred ball of Euclidean radius
/// `radius`.
inline EmbeddingTable init_table(std::size_t rows, const ManifoldConfig& m, double radius,
                                 Rng& rng) {
  EmbeddingTable table(rows, m);
  for (EntityId e = 0; e < rows; ++e) {
    auto r = table.row_mut(e);
    double sq = 0.0;
    for (double& x : r) {
      x = rng.normal();
      sq += x * x;
    }
    const double len = std::sqrt(sq);
    const double target = radius * std::pow(rng.uniform01(), 1.0 / static_cast<double>(m.dim));
    for (double& x : r) x = len > 0.0 ? x / len * target : 0.0;
    project_inplace(r, m);
  }
  return table;
}

// ---------------------------------------------------------------------------
// Embedding file: `#hit-embeddings v1 dim=<d> curvature=<c> n=<rows> [src=<hex>]`
// followed by `name<TAB>v1<TAB>...<TAB>vd`.

namespace detail {

/// Shortest text that reads back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline double parse_double(std::string_view s, const std::string& where) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw Error(ErrorKind::Parse, "training", where + ": bad number '" + std::string(s) + "'");
  return v;
}

}  // namespace detail

inline void export_embeddings(const EmbeddingTable& table, const Lexicon& lexicon,
                              const std::filesystem::path& path) {
  if (lexicon.size() != table.rows())
    throw Error(ErrorKind::LengthMismatch, "training", "lexicon and table sizes differ");
  std::size_t n = 0;
  for (EntityId e = 0; e < table.rows(); ++e) n += table.covered(e) ? 1 : 0;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "training", "cannot write '" + path.string() + "'");
  out << "#hit-embeddings v1 dim=" << table.dim()
      << " curvature=" << detail::format_double(table.manifold().curvature) << " n=" << n;
  if (table.source_checksum() != 0) out << " src=" << checksum_hex(table.source_checksum());
  out << '\n';
  for (EntityId e = 0; e < table.rows(); ++e) {
    if (!table.covered(e)) continue;
    out << lexicon.name(e);
    for (double x : table.row(e)) out << '\t' << detail::format_double(x);
    out << '\n';
  }
  if (!out) throw Error(ErrorKind::Io, "training", "write failed for '" + path.string() + "'");
}

struct ImportReport {
  EmbeddingTable table;
  std::size_t rows_read = 0;
  std::size_t projected = 0;
  std::vector<std::string> missing;  // lexicon entities absent from the file
};

/// Reads an embedding file against `lexicon` on the ball `manifold`. Rows
/// not strictly inside the ball are projected; entities the file does not mention are
/// left uncovered and listed. Names unknown to the lexicon are an error.
inline ImportReport import_embeddings(const std::filesystem::path& path, const Lexicon& lexicon,
                                      const ManifoldConfig& manifold) {
  auto in = detail::open_input(path, "training");
  std::string line;
  std::size_t lineno = 1;
  const auto where = [&] { return path.string() + ":" + std::to_string(lineno); };
  if (!std::getline(in, line)) throw Error(ErrorKind::Parse, "training", where() + ": empty file");
  detail::strip_cr(line);
  constexpr std::string_view tag = "#hit-embeddings v1";
  if (line.rfind(tag, 0) != 0)
    throw Error(ErrorKind::Parse, "training", where() + ": missing '#hit-embeddings v1' header");
  auto fields = detail::parse_header_fields(std::string_view(line).substr(tag.size()));
  for (const char* key : {"dim", "curvature", "n"})
    if (!fields.contains(key))
      throw Error(ErrorKind::Parse, "training", where() + ": header lacks '" + key + "'");
  const auto dim = detail::parse_u64(fields["dim"], 10, "training", where());
  const auto declared_rows = detail::parse_u64(fields["n"], 10, "training", where());
  const double curvature = detail::parse_double(fields["curvature"], where());
  if (dim != manifold.dim)
    throw Error(ErrorKind::DimensionMismatch, "training",
                where() + ": file has dim=" + std::to_string(dim) + ", manifold expects " +
                    std::to_string(manifold.dim));
  if (std::abs(curvature - manifold.curvature) > 1e-12 * manifold.curvature)
    throw Error(ErrorKind::DimensionMismatch, "training",
                where() + ": file curvature " + fields["curvature"] + " differs from manifold");

  ImportReport report;
  report.table = EmbeddingTable(lexicon.size(), manifold);
  if (fields.contains("src"))
    report.table.set_source_checksum(detail::parse_u64(fields["src"], 16, "training", where()));
  std::vector<std::uint8_t> seen(lexicon.size(), 0);
  std::vector<std::string> unknown;
  while (std::getline(in, line)) {
    ++lineno;
    detail::strip_cr(line);
    if (line.empty() || line.front() == '#') continue;
    const auto cols = detail::split_tabs(line);
    if (cols.size() != dim + 1)
      throw Error(ErrorKind::DimensionMismatch, "training",
                  where() + ": expected " + std::to_string(dim) + " values, got " +
                      std::to_string(cols.size() - 1));
    const auto id = lexicon.find(cols[0]);
    if (!id) {
      unknown.emplace_back(cols[0]);
      continue;
    }
    if (seen[*id]) throw Error(ErrorKind::Parse, "training", where() + ": duplicate row for '" + std::string(cols[0]) + "'");
    seen[*id] = 1;
    auto row = report.table.row_mut(*id);
    double sq = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      row[i] = detail::parse_double(cols[i + 1], where());
      if (!std::isfinite(row[i]))
        throw Error(ErrorKind::InvalidValue, "training", where() + ": non-finite coordinate");
      sq += row[i] * row[i];
    }
    // In-ball rows are kept bit-exact; rows on or past the boundary are pulled
    // back to (1 - eps) times the radius.
    if (!(manifold.curvature * sq < 1.0)) {
      ++report.projected;
      project_inplace(row, manifold);
    }
    ++report.rows_read;
  }
  if (!unknown.empty()) {
    std::string list;
    for (std::size_t i = 0; i < unknown.size() && i < 20; ++i) list += (i ? ", " : "") + unknown[i];
    if (unknown.size() > 20) list += ", ...";
    throw Error(ErrorKind::Lookup, "training",
                std::to_string(unknown.size()) + " embedding rows name unknown entities: " + list);
  }
  if (report.rows_read != declared_rows)
    throw Error(ErrorKind::Parse, "training",
                path.string() + ": header declares n=" + std::to_string(declared_rows) + " but " +
                    std::to_string(report.rows_read) + " rows were read");
  for (EntityId e = 0; e < lexicon.size(); ++e) {
    if (!seen[e]) {
      report.table.set_covered(e, false);
      report.missing.push_back(lexicon.name(e));
    }
  }
  return report;
}

}  // namespace hit
