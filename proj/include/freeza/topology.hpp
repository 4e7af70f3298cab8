#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <vector>

#include "freeza/error.hpp"

namespace freeza {

enum class GridKind { Ring1D, Triangular, Square };

// Ring cells use r = 0. Triangular cells are (row, col), col in [0, 2n),
// upward iff col is even. An upward cell meets the downward cell (r-1, c+1)
// across its base; symmetric under wrap for every n.
struct CellId {
  int r = 0;
  int c = 0;
  auto operator<=>(const CellId&) const = default;
};

struct GridSpec {
  GridKind kind = GridKind::Square;
  int n = 2;

  int rows() const { return kind == GridKind::Ring1D ? 1 : n; }
  int cols() const { return kind == GridKind::Triangular ? 2 * n : n; }
  int size() const { return rows() * cols(); }
  int degree() const {
    switch (kind) {
      case GridKind::Ring1D: return 2;
      case GridKind::Triangular: return 3;
      default: return 4;
    }
  }

  void check() const {
    if (n < 2) throw Error("invalid-spec", "grid side must be at least 2");
  }

  bool valid(CellId u) const { return u.r >= 0 && u.r < rows() && u.c >= 0 && u.c < cols(); }

  CellId reduce(CellId u) const {
    auto m = [](int a, int b) { return ((a % b) + b) % b; };
    return {m(u.r, rows()), m(u.c, cols())};
  }

  int index(CellId u) const {
    if (!valid(u)) throw Error("out-of-range", "cell (" + std::to_string(u.r) + "," +
                                                   std::to_string(u.c) + ") outside " + to_string());
    return u.r * cols() + u.c;
  }
  CellId cell(int i) const { return {i / cols(), i % cols()}; }

  bool upward(CellId u) const { return (u.c & 1) == 0; }

  std::string to_string() const {
    const char* k = kind == GridKind::Ring1D ? "ring" : kind == GridKind::Triangular ? "tri" : "sq";
    return std::string(k) + ":" + std::to_string(n);
  }

  bool operator==(const GridSpec&) const = default;
};

inline GridSpec parse_spec(const std::string& s) {
  auto colon = s.find(':');
  if (colon == std::string::npos) throw Error("invalid-spec", "expected kind:n, got '" + s + "'");
  std::string k = s.substr(0, colon);
  GridSpec g;
  if (k == "ring") g.kind = GridKind::Ring1D;
  else if (k == "tri") g.kind = GridKind::Triangular;
  else if (k == "sq") g.kind = GridKind::Square;
  else throw Error("invalid-spec", "unknown grid kind '" + k + "'");
  try {
    size_t used = 0;
    g.n = std::stoi(s.substr(colon + 1), &used);
    if (used != s.size() - colon - 1) throw std::invalid_argument("tail");
  } catch (const std::exception&) {
    throw Error("invalid-spec", "bad grid size in '" + s + "'");
  }
  g.check();
  return g;
}

// Canonical enumeration: row-major (ring: index order).
inline std::vector<CellId> cells(const GridSpec& g) {
  g.check();
  std::vector<CellId> out;
  out.reserve(g.size());
  for (int r = 0; r < g.rows(); ++r)
    for (int c = 0; c < g.cols(); ++c) out.push_back({r, c});
  return out;
}

inline std::vector<CellId> neighbors(const GridSpec& g, CellId u) {
  g.check();
  if (!g.valid(u)) (void)g.index(u);
  switch (g.kind) {
    case GridKind::Ring1D:
      return {g.reduce({0, u.c - 1}), g.reduce({0, u.c + 1})};
    case GridKind::Triangular:
      return {g.reduce({u.r, u.c - 1}), g.reduce({u.r, u.c + 1}),
              g.upward(u) ? g.reduce({u.r - 1, u.c + 1}) : g.reduce({u.r + 1, u.c - 1})};
    default:
      return {g.reduce({u.r - 1, u.c}), g.reduce({u.r + 1, u.c}), g.reduce({u.r, u.c - 1}),
              g.reduce({u.r, u.c + 1})};
  }
}

// Flat neighbor index table, degree entries per cell in neighbors() order.
class Topology {
 public:
  Topology() = default;
  explicit Topology(const GridSpec& g) : spec_(g), deg_(g.degree()) {
    g.check();
    nb_.reserve(static_cast<size_t>(g.size()) * deg_);
    for (auto u : cells(g))
      for (auto v : neighbors(g, u)) nb_.push_back(g.index(v));
  }
  const GridSpec& spec() const { return spec_; }
  int size() const { return spec_.size(); }
  int degree() const { return deg_; }
  const int* nbrs(int i) const { return nb_.data() + static_cast<size_t>(i) * deg_; }
  bool adjacent(int a, int b) const {
    for (int k = 0; k < deg_; ++k)
      if (nbrs(a)[k] == b) return true;
    return false;
  }

 private:
  GridSpec spec_{};
  int deg_ = 0;
  std::vector<int> nb_;
};

}  // namespace freeza
