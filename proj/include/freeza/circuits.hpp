#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "freeza/error.hpp"
#include "freeza/parallel.hpp"
#include "freeza/sat.hpp"

namespace freeza {

// ---------------------------------------------------------------------------
// Blocks and grid-embedded circuits

enum class BlockKind : uint8_t { Fixed0, Fixed1, And, Or, Cross, MulNorth, MulWest, Selector };

inline char block_symbol(BlockKind k) {
  constexpr const char* s = "01&|CNWS";
  return s[static_cast<int>(k)];
}

inline BlockKind block_from_symbol(char c) {
  switch (c) {
    case '0': return BlockKind::Fixed0;
    case '1': return BlockKind::Fixed1;
    case '&': return BlockKind::And;
    case '|': return BlockKind::Or;
    case 'C': return BlockKind::Cross;
    case 'N': return BlockKind::MulNorth;
    case 'W': return BlockKind::MulWest;
    case 'S': return BlockKind::Selector;
  }
  throw Error("parse", std::string("unknown block symbol '") + c + "'");
}

inline std::string to_string(BlockKind k) {
  constexpr const char* names[] = {"fixed0", "fixed1", "and", "or", "cross", "mul-north", "mul-west", "selector"};
  return names[static_cast<int>(k)];
}

inline bool is_fixed(BlockKind k) { return k == BlockKind::Fixed0 || k == BlockKind::Fixed1; }

struct BlockOut {
  uint8_t east = 0, south = 0;
  bool operator==(const BlockOut&) const = default;
};

// `sel` is the selector bit (1 = east-selector); ignored by other kinds.
inline BlockOut apply_block(BlockKind k, int north, int west, int sel = 0) {
  auto b = [](int v) { return static_cast<uint8_t>(v != 0); };
  switch (k) {
    case BlockKind::Fixed0: return {0, 0};
    case BlockKind::Fixed1: return {1, 1};
    case BlockKind::And: return {b(north && west), b(north && west)};
    case BlockKind::Or: return {b(north || west), b(north || west)};
    case BlockKind::Cross: return {b(west), b(north)};
    case BlockKind::MulNorth: return {b(north), b(north)};
    case BlockKind::MulWest: return {b(west), b(west)};
    case BlockKind::Selector: return {b(sel), b(!sel)};
  }
  return {};
}

class GridCircuit {
 public:
  GridCircuit() = default;
  explicit GridCircuit(int n, BlockKind fill = BlockKind::Fixed0) : n_(n), b_(static_cast<size_t>(n) * n, fill) {
    if (n < 1) throw Error("invalid-circuit", "circuit side must be positive");
  }

  int side() const { return n_; }
  BlockKind& at(int i, int j) { return b_.at(static_cast<size_t>(i) * n_ + j); }
  BlockKind at(int i, int j) const { return b_.at(static_cast<size_t>(i) * n_ + j); }
  const std::vector<BlockKind>& blocks() const { return b_; }

  // Row-major; position k holds the block driven by assignment bit k.
  std::vector<std::pair<int, int>> selectors() const {
    std::vector<std::pair<int, int>> out;
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j)
        if (at(i, j) == BlockKind::Selector) out.emplace_back(i, j);
    return out;
  }
  int selector_count() const { return static_cast<int>(std::count(b_.begin(), b_.end(), BlockKind::Selector)); }

  // Blocks on row 0 and column 0 must be fixed-value blocks.
  void validate() const {
    for (int k = 0; k < n_; ++k)
      if (!is_fixed(at(0, k)) || !is_fixed(at(k, 0)))
        throw Error("invalid-circuit", "border block at " + std::to_string(k) + " is not fixed");
  }

  bool operator==(const GridCircuit&) const = default;

 private:
  int n_ = 0;
  std::vector<BlockKind> b_;
};

inline void write_circuit(std::ostream& os, const GridCircuit& c) {
  os << "gridcircuit n=" << c.side() << '\n';
  for (int i = 0; i < c.side(); ++i) {
    for (int j = 0; j < c.side(); ++j) os << block_symbol(c.at(i, j));
    os << '\n';
  }
}

inline GridCircuit read_circuit(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("gridcircuit n=", 0) != 0)
    throw Error("parse", "expected header 'gridcircuit n=<n>'");
  int n;
  try {
    n = std::stoi(line.substr(14));
  } catch (const std::exception&) {
    throw Error("parse", "bad circuit header: " + line);
  }
  GridCircuit c(n);
  for (int i = 0; i < n; ++i) {
    if (!std::getline(is, line)) throw Error("parse", "circuit has fewer than n rows");
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (static_cast<int>(line.size()) != n) throw Error("parse", "circuit row " + std::to_string(i) + " has wrong width");
    for (int j = 0; j < n; ++j) c.at(i, j) = block_from_symbol(line[j]);
  }
  return c;
}

// Evaluation in anti-diagonal order. Blocks on one anti-diagonal only read the
// previous one, so each diagonal is split across workers.
inline std::vector<BlockOut> evaluate(const GridCircuit& c, const std::vector<uint8_t>& u, int workers = 1) {
  int n = c.side();
  auto sel = c.selectors();
  if (u.size() != sel.size())
    throw Error("precondition", "assignment has " + std::to_string(u.size()) + " bits, circuit has " +
                                    std::to_string(sel.size()) + " selectors");
  std::vector<int> sel_index(static_cast<size_t>(n) * n, -1);
  for (size_t k = 0; k < sel.size(); ++k) sel_index[static_cast<size_t>(sel[k].first) * n + sel[k].second] = static_cast<int>(k);
  std::vector<BlockOut> out(static_cast<size_t>(n) * n);
  auto cell = [&](int i, int j) {
    size_t id = static_cast<size_t>(i) * n + j;
    int north = i > 0 ? out[id - n].south : 0;
    int west = j > 0 ? out[id - 1].east : 0;
    int s = sel_index[id] >= 0 ? u[sel_index[id]] : 0;
    out[id] = apply_block(c.at(i, j), north, west, s);
  };
  for (int k = 0; k <= 2 * (n - 1); ++k) {
    int lo = std::max(0, k - (n - 1)), hi = std::min(k, n - 1);
    int len = hi - lo + 1;
    if (workers > 1 && len >= 256) {
      parallel_for(len, workers, [&](int64_t a, int64_t b) {
        for (int64_t t = a; t < b; ++t) cell(lo + static_cast<int>(t), k - lo - static_cast<int>(t));
      });
    } else {
      for (int i = lo; i <= hi; ++i) cell(i, k - i);
    }
  }
  return out;
}

// Value of a block: its east output (equal to the south output for gates).
inline uint8_t block_value(const GridCircuit& c, const std::vector<BlockOut>& v, int i, int j) {
  return v.at(static_cast<size_t>(i) * c.side() + j).east;
}

// ---------------------------------------------------------------------------
// Tiled circuits: a large grid made of 8x8 gadgets, filler tiles are Fixed(0).

using Gadget = std::array<BlockKind, 64>;

inline GridCircuit gadget_as_circuit(const Gadget& g) {
  GridCircuit c(8);
  for (int i = 0; i < 64; ++i) c.at(i / 8, i % 8) = g[i];
  return c;
}

class TiledCircuit {
 public:
  TiledCircuit() = default;
  explicit TiledCircuit(int tiles_per_side) : t_(tiles_per_side), tile_(static_cast<size_t>(t_) * t_, -1) {}

  int side() const { return 8 * t_; }
  int tiles_per_side() const { return t_; }
  const std::vector<Gadget>& gadgets() const { return gadgets_; }

  void place(int ti, int tj, const Gadget& g) {
    int id = -1;
    for (size_t k = 0; k < gadgets_.size(); ++k)
      if (gadgets_[k] == g) id = static_cast<int>(k);
    if (id < 0) {
      id = static_cast<int>(gadgets_.size());
      gadgets_.push_back(g);
    }
    int& slot = tile_.at(static_cast<size_t>(ti) * t_ + tj);
    if (slot >= 0) throw Error("internal", "tile (" + std::to_string(ti) + "," + std::to_string(tj) + ") placed twice");
    slot = id;
  }
  // Gadget index at a tile, -1 for filler.
  int tile(int ti, int tj) const { return tile_[static_cast<size_t>(ti) * t_ + tj]; }

  BlockKind at(int r, int c) const {
    int g = tile(r / 8, c / 8);
    return g < 0 ? BlockKind::Fixed0 : gadgets_[g][(r % 8) * 8 + c % 8];
  }

  std::vector<std::pair<int, int>> selectors() const {
    std::vector<std::pair<int, int>> out;
    for (int ti = 0; ti < t_; ++ti)
      for (int tj = 0; tj < t_; ++tj) {
        int g = tile(ti, tj);
        if (g < 0) continue;
        for (int k = 0; k < 64; ++k)
          if (gadgets_[g][k] == BlockKind::Selector) out.emplace_back(8 * ti + k / 8, 8 * tj + k % 8);
      }
    std::sort(out.begin(), out.end());
    return out;
  }

  size_t occupied() const { return tile_.size() - std::count(tile_.begin(), tile_.end(), -1); }

  void validate() const {
    for (int k = 0; k < side(); ++k)
      if (!is_fixed(at(0, k)) || !is_fixed(at(k, 0)))
        throw Error("invalid-circuit", "border block at " + std::to_string(k) + " is not fixed");
  }

  GridCircuit to_grid() const {
    GridCircuit c(side());
    for (int r = 0; r < side(); ++r)
      for (int col = 0; col < side(); ++col) c.at(r, col) = at(r, col);
    return c;
  }

 private:
  int t_ = 0;
  std::vector<int> tile_;
  std::vector<Gadget> gadgets_;
};

// ---------------------------------------------------------------------------
// And/Or netlists compiled from a circuit. Literal = 2 * node + negated;
// node 0 is the constant false, so literal 0 is false and 1 is true.

struct Netlist {
  enum class Op : uint8_t { Const, Var, And, Or };
  struct Node {
    Op op;
    int a, b;  // Var: a = variable index
  };
  std::vector<Node> nodes{{Op::Const, 0, 0}};
  int nvars = 0;

  int var(int v) {
    nodes.push_back({Op::Var, v, 0});
    nvars = std::max(nvars, v + 1);
    return 2 * (static_cast<int>(nodes.size()) - 1);
  }
  int mk_or(int x, int y) {
    if (x == 0 || x == y) return y;
    if (y == 0) return x;
    if (x == 1 || y == 1 || x == (y ^ 1)) return 1;
    return make(Op::Or, x, y);
  }
  int mk_and(int x, int y) {
    if (x == 1 || x == y) return y;
    if (y == 1) return x;
    if (x == 0 || y == 0 || x == (y ^ 1)) return 0;
    return make(Op::And, x, y);
  }

  // Bit-parallel evaluation: `vars[k]` packs 64 values of variable k.
  std::vector<uint64_t> eval64(const std::vector<uint64_t>& vars) const {
    std::vector<uint64_t> w(nodes.size(), 0);
    for (size_t i = 1; i < nodes.size(); ++i) {
      auto& n = nodes[i];
      switch (n.op) {
        case Op::Const: break;
        case Op::Var: w[i] = vars.at(n.a); break;
        case Op::And: w[i] = lit64(w, n.a) & lit64(w, n.b); break;
        case Op::Or: w[i] = lit64(w, n.a) | lit64(w, n.b); break;
      }
    }
    return w;
  }
  static uint64_t lit64(const std::vector<uint64_t>& w, int lit) { return w[lit >> 1] ^ (lit & 1 ? ~uint64_t{0} : 0); }

  // Nodes the literal depends on, in increasing order.
  std::vector<int> cone(int lit) const {
    std::vector<char> mark(nodes.size(), 0);
    std::vector<int> stack{lit >> 1}, out;
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      if (mark[v]) continue;
      mark[v] = 1;
      out.push_back(v);
      if (nodes[v].op == Op::And || nodes[v].op == Op::Or) {
        stack.push_back(nodes[v].a >> 1);
        stack.push_back(nodes[v].b >> 1);
      }
    }
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  int make(Op op, int x, int y) {
    if (x > y) std::swap(x, y);
    uint64_t key = (static_cast<uint64_t>(op == Op::Or) << 62) | (static_cast<uint64_t>(x) << 31) | static_cast<uint64_t>(y);
    auto [it, fresh] = hash_.try_emplace(key, static_cast<int>(nodes.size()));
    if (fresh) nodes.push_back({op, x, y});
    return 2 * it->second;
  }
  std::unordered_map<uint64_t, int> hash_;
};

// Per-block output literals of a compiled circuit.
struct CompiledCircuit {
  Netlist net;
  int tile = 0, tiles_per_side = 0;
  std::vector<int> slot;                  // per tile, -1 = filler
  std::vector<std::array<int, 2>> out;    // (east, south) per slot block
  std::vector<std::pair<int, int>> selectors;  // variable k drives selectors[k]

  int east(int r, int c) const { return get(r, c, 0); }
  int south(int r, int c) const { return get(r, c, 1); }

 private:
  int get(int r, int c, int k) const {
    int s = slot.at(static_cast<size_t>(r / tile) * tiles_per_side + c / tile);
    if (s < 0) return 0;
    return out[static_cast<size_t>(s) * tile * tile + (r % tile) * tile + c % tile][k];
  }
};

namespace detail {

// Tiles are visited row-major and blocks row-major inside a tile, which is a
// topological order for north/west inputs.
template <class KindAt, class TileUsed>
CompiledCircuit compile_tiles(int tile, int tps, KindAt kind_at, TileUsed used,
                              std::vector<std::pair<int, int>> selectors) {
  CompiledCircuit cc;
  cc.tile = tile;
  cc.tiles_per_side = tps;
  cc.selectors = std::move(selectors);
  cc.slot.assign(static_cast<size_t>(tps) * tps, -1);
  int nslots = 0;
  for (int ti = 0; ti < tps; ++ti)
    for (int tj = 0; tj < tps; ++tj)
      if (used(ti, tj)) cc.slot[static_cast<size_t>(ti) * tps + tj] = nslots++;
  cc.out.assign(static_cast<size_t>(nslots) * tile * tile, {0, 0});
  std::vector<int> var_lit(cc.selectors.size());
  for (size_t k = 0; k < cc.selectors.size(); ++k) var_lit[k] = cc.net.var(static_cast<int>(k));
  auto var_of = [&](int r, int c) {
    auto it = std::lower_bound(cc.selectors.begin(), cc.selectors.end(), std::make_pair(r, c));
    return static_cast<int>(it - cc.selectors.begin());
  };
  for (int ti = 0; ti < tps; ++ti)
    for (int tj = 0; tj < tps; ++tj) {
      int s = cc.slot[static_cast<size_t>(ti) * tps + tj];
      if (s < 0) continue;
      for (int a = 0; a < tile; ++a)
        for (int b = 0; b < tile; ++b) {
          int r = ti * tile + a, c = tj * tile + b;
          int north = r > 0 ? cc.south(r - 1, c) : 0;
          int west = c > 0 ? cc.east(r, c - 1) : 0;
          std::array<int, 2> o{0, 0};
          switch (kind_at(r, c)) {
            case BlockKind::Fixed0: break;
            case BlockKind::Fixed1: o = {1, 1}; break;
            case BlockKind::And: o[0] = o[1] = cc.net.mk_and(north, west); break;
            case BlockKind::Or: o[0] = o[1] = cc.net.mk_or(north, west); break;
            case BlockKind::Cross: o = {west, north}; break;
            case BlockKind::MulNorth: o = {north, north}; break;
            case BlockKind::MulWest: o = {west, west}; break;
            case BlockKind::Selector: {
              int x = var_lit[var_of(r, c)];
              o = {x, x ^ 1};
              break;
            }
          }
          cc.out[static_cast<size_t>(s) * tile * tile + a * tile + b] = o;
        }
    }
  return cc;
}

}  // namespace detail

inline CompiledCircuit compile(const GridCircuit& c) {
  return detail::compile_tiles(
      c.side(), 1, [&](int r, int col) { return c.at(r, col); }, [](int, int) { return true; }, c.selectors());
}

inline CompiledCircuit compile(const TiledCircuit& c) {
  return detail::compile_tiles(
      8, c.tiles_per_side(), [&](int r, int col) { return c.at(r, col); },
      [&](int ti, int tj) { return c.tile(ti, tj) >= 0; }, c.selectors());
}

// Exact satisfiability of a netlist literal through CDCL over the Tseitin
// encoding of its cone. Returns an assignment to every variable (zeros where
// unconstrained) or nothing.
inline std::optional<std::vector<uint8_t>> netlist_sat(const Netlist& net, int lit) {
  std::vector<uint8_t> zeros(net.nvars, 0);
  if (lit == 1) return zeros;
  if (lit == 0) return std::nullopt;
  SatSolver s;
  auto cone = net.cone(lit);
  std::unordered_map<int, int> sv;
  for (int v : cone)
    if (v != 0) sv[v] = s.new_var();
  auto L = [&](int l) {
    if ((l >> 1) == 0) throw Error("internal", "constant inside a simplified netlist");
    int x = sv.at(l >> 1);
    return l & 1 ? -x : x;
  };
  for (int v : cone) {
    auto& n = net.nodes[v];
    if (n.op != Netlist::Op::And && n.op != Netlist::Op::Or) continue;
    int g = sv.at(v), a = L(n.a), b = L(n.b);
    if (n.op == Netlist::Op::And) {
      s.add_clause({-g, a});
      s.add_clause({-g, b});
      s.add_clause({g, -a, -b});
    } else {
      s.add_clause({g, -a});
      s.add_clause({g, -b});
      s.add_clause({-g, a, b});
    }
  }
  s.add_clause({L(lit)});
  if (!s.solve()) return std::nullopt;
  for (int v : cone)
    if (net.nodes[v].op == Netlist::Op::Var) zeros[net.nodes[v].a] = s.value(sv.at(v));
  return zeros;
}

struct SatAnswer {
  bool satisfiable = false;
  std::optional<std::vector<uint8_t>> assignment;
};

// Exhaustive search over all 2^s selector assignments, 64 at a time; assignment
// index m sets bit k of the assignment to bit k of m. Returns the smallest
// satisfying index, so the answer does not depend on the worker count.
inline SatAnswer is_satisfiable(const GridCircuit& c, int i, int j, int cap = 22, int workers = 1) {
  if (i < 0 || j < 0 || i >= c.side() || j >= c.side()) throw Error("precondition", "target block out of range");
  int s = c.selector_count();
  if (s > cap)
    throw Error("refused", "assignment space too large: " + std::to_string(s) + " selectors (cap " +
                               std::to_string(cap) + ")");
  auto cc = compile(c);
  int lit = cc.east(i, j);
  auto cone = cc.net.cone(lit);
  int64_t total = int64_t{1} << s;
  int64_t words = (total + 63) / 64;
  // each range stops at its first hit; the global minimum is partition-free
  std::atomic<int64_t> best{INT64_MAX};
  parallel_for(words, std::max(1, workers), [&](int64_t lo, int64_t hi) {
    std::vector<uint64_t> w(cc.net.nodes.size(), 0);
    for (int64_t word = lo; word < hi && word * 64 < best.load(); ++word) {
      for (int v : cone) {
        auto& n = cc.net.nodes[v];
        switch (n.op) {
          case Netlist::Op::Const: w[v] = 0; break;
          case Netlist::Op::Var: {
            int k = n.a;
            uint64_t x = 0;
            if (k < 6) {
              constexpr uint64_t pat[6] = {0xAAAAAAAAAAAAAAAAull, 0xCCCCCCCCCCCCCCCCull, 0xF0F0F0F0F0F0F0F0ull,
                                           0xFF00FF00FF00FF00ull, 0xFFFF0000FFFF0000ull, 0xFFFFFFFF00000000ull};
              x = pat[k];
            } else if ((word >> (k - 6)) & 1) {
              x = ~uint64_t{0};
            }
            w[v] = x;
            break;
          }
          case Netlist::Op::And: w[v] = Netlist::lit64(w, n.a) & Netlist::lit64(w, n.b); break;
          case Netlist::Op::Or: w[v] = Netlist::lit64(w, n.a) | Netlist::lit64(w, n.b); break;
        }
      }
      uint64_t hit = Netlist::lit64(w, lit);
      if (total < 64) hit &= (uint64_t{1} << total) - 1;
      if (hit) {
        int64_t found = word * 64 + __builtin_ctzll(hit);
        int64_t cur = best.load();
        while (found < cur && !best.compare_exchange_weak(cur, found)) {
        }
        break;
      }
    }
  });
  int64_t m = best.load();
  SatAnswer ans;
  if (m == INT64_MAX) return ans;
  ans.satisfiable = true;
  std::vector<uint8_t> u(s);
  for (int k = 0; k < s; ++k) u[k] = static_cast<uint8_t>((m >> k) & 1);
  ans.assignment = u;
  return ans;
}

// ---------------------------------------------------------------------------
// CNF formulas

struct CnfFormula {
  int nvars = 0;
  std::vector<std::vector<int>> clauses;

  void validate() const {
    if (nvars < 0) throw Error("invalid-cnf", "negative variable count");
    for (auto& c : clauses) {
      if (c.empty()) throw Error("invalid-cnf", "empty clause");
      for (int l : c)
        if (l == 0 || std::abs(l) > nvars) throw Error("invalid-cnf", "literal " + std::to_string(l) + " out of range");
    }
  }
  bool operator==(const CnfFormula&) const = default;
};

inline CnfFormula parse_dimacs(std::istream& is) {
  CnfFormula f;
  bool header = false;
  int declared = 0;
  std::vector<int> cur;
  std::string tok;
  while (is >> tok) {
    if (tok == "c") {
      std::string rest;
      std::getline(is, rest);
      continue;
    }
    if (tok == "p") {
      std::string fmt;
      if (!(is >> fmt >> f.nvars >> declared) || fmt != "cnf") throw Error("parse", "bad DIMACS header");
      header = true;
      continue;
    }
    if (tok == "%") break;  // SATLIB trailer
    if (!header) throw Error("parse", "DIMACS clause before header");
    int lit;
    try {
      size_t used = 0;
      lit = std::stoi(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw Error("parse", "bad DIMACS token '" + tok + "'");
    }
    if (lit == 0) {
      if (cur.empty()) throw Error("invalid-cnf", "empty clause");
      f.clauses.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(lit);
    }
  }
  if (!header) throw Error("parse", "missing DIMACS header");
  if (!cur.empty()) f.clauses.push_back(cur);
  if (static_cast<int>(f.clauses.size()) != declared)
    throw Error("parse", "header declares " + std::to_string(declared) + " clauses, found " +
                             std::to_string(f.clauses.size()));
  f.validate();
  return f;
}

inline void write_dimacs(std::ostream& os, const CnfFormula& f) {
  os << "p cnf " << f.nvars << ' ' << f.clauses.size() << '\n';
  for (auto& c : f.clauses) {
    for (int l : c) os << l << ' ';
    os << "0\n";
  }
}

inline bool eval_cnf(const CnfFormula& f, const std::vector<uint8_t>& a) {
  for (auto& c : f.clauses) {
    bool sat = false;
    for (int l : c) sat = sat || (a.at(std::abs(l) - 1) != 0) == (l > 0);
    if (!sat) return false;
  }
  return true;
}

// Truth-table scan in increasing assignment index (bit k = variable k+1).
inline SatAnswer cnf_brute_force(const CnfFormula& f) {
  f.validate();
  if (f.nvars > 24) throw Error("refused", "truth table too large: " + std::to_string(f.nvars) + " variables");
  std::vector<std::pair<uint32_t, uint32_t>> masks;
  for (auto& c : f.clauses) {
    uint32_t pos = 0, neg = 0;
    for (int l : c) (l > 0 ? pos : neg) |= 1u << (std::abs(l) - 1);
    masks.emplace_back(pos, neg);
  }
  SatAnswer ans;
  for (uint32_t m = 0; m < (1u << f.nvars); ++m) {
    bool ok = true;
    for (auto [p, q] : masks)
      if (!(m & p) && !(~m & q)) {
        ok = false;
        break;
      }
    if (!ok) continue;
    ans.satisfiable = true;
    std::vector<uint8_t> a(f.nvars);
    for (int k = 0; k < f.nvars; ++k) a[k] = static_cast<uint8_t>((m >> k) & 1);
    ans.assignment = a;
    return ans;
  }
  return ans;
}

// ---------------------------------------------------------------------------
// Normalized Boolean circuits (gate ids are 1-based and topological)

enum class GateKind : uint8_t { Input, Not, And, Or };

inline std::string to_string(GateKind k) {
  constexpr const char* n[] = {"input", "not", "and", "or"};
  return n[static_cast<int>(k)];
}

struct Gate {
  GateKind kind;
  std::vector<int> in;
  int var = 0;  // CNF variable of an input gate
};

struct Dag {
  std::vector<Gate> gates;
  int output = 0;
  std::vector<int> clause_gate;  // per formula clause, the gate computing it

  int size() const { return static_cast<int>(gates.size()); }
  const Gate& gate(int id) const { return gates.at(id - 1); }
  int add(GateKind k, std::vector<int> in, int var = 0) {
    gates.push_back({k, std::move(in), var});
    return size();
  }
  std::vector<int> inputs() const {
    std::vector<int> out;
    for (int g = 1; g <= size(); ++g)
      if (gate(g).kind == GateKind::Input) out.push_back(g);
    return out;
  }
};

// Checks the shape the grid embedding relies on: topological ids, fan-in at
// most 2 with distinct inputs, negations only on inputs, and gates reading an
// input having fan-in 1.
inline void validate_dag(const Dag& d) {
  auto bad = [](int g, const std::string& why) { throw Error("invalid-dag", "gate " + std::to_string(g) + ": " + why); };
  if (d.output < 1 || d.output > d.size()) throw Error("invalid-dag", "output gate out of range");
  for (int g = 1; g <= d.size(); ++g) {
    auto& x = d.gate(g);
    for (int h : x.in)
      if (h < 1 || h >= g) bad(g, "inputs must have smaller ids");
    if (x.in.size() == 2 && x.in[0] == x.in[1]) bad(g, "repeated input");
    bool reads_input = false;
    for (int h : x.in) reads_input = reads_input || d.gate(h).kind == GateKind::Input;
    switch (x.kind) {
      case GateKind::Input:
        if (!x.in.empty()) bad(g, "input gate with inputs");
        break;
      case GateKind::Not:
        if (x.in.size() != 1 || !reads_input) bad(g, "negation must read one input gate");
        break;
      default:
        if (x.in.empty() || x.in.size() > 2) bad(g, "fan-in must be 1 or 2");
        if (reads_input && x.in.size() != 1) bad(g, "first-layer gate with fan-in 2");
    }
  }
}

// Values of all gates (index id-1); `in` holds values of the input gates in id order.
inline std::vector<uint8_t> evaluate_dag(const Dag& d, const std::vector<uint8_t>& in) {
  std::vector<uint8_t> v(d.size());
  size_t next = 0;
  for (int g = 1; g <= d.size(); ++g) {
    auto& x = d.gate(g);
    auto at = [&](int k) { return v[x.in[k] - 1]; };
    switch (x.kind) {
      case GateKind::Input: v[g - 1] = in.at(next++); break;
      case GateKind::Not: v[g - 1] = !at(0); break;
      case GateKind::And: v[g - 1] = x.in.size() == 1 ? at(0) : (at(0) && at(1)); break;
      case GateKind::Or: v[g - 1] = x.in.size() == 1 ? at(0) : (at(0) || at(1)); break;
    }
  }
  if (next != in.size()) throw Error("precondition", "wrong number of input values");
  return v;
}

// CNF -> normalized circuit. One input gate per used variable (ascending), a
// negation and a one-input Or per used polarity, balanced multiplier trees
// where a literal feeds more than two clauses, clause Or trees and a final
// And tree. Duplicate literals and duplicate clauses are merged.
inline Dag normalize_circuit(const CnfFormula& f) {
  f.validate();
  if (f.clauses.empty()) throw Error("precondition", "formula has no clauses");
  std::vector<std::vector<int>> uniq;
  std::vector<int> clause_uniq;
  for (auto c : f.clauses) {
    std::sort(c.begin(), c.end(), [](int a, int b) { return std::abs(a) != std::abs(b) ? std::abs(a) < std::abs(b) : a > b; });
    c.erase(std::unique(c.begin(), c.end()), c.end());
    auto it = std::find(uniq.begin(), uniq.end(), c);
    clause_uniq.push_back(static_cast<int>(it - uniq.begin()));
    if (it == uniq.end()) uniq.push_back(c);
  }
  auto li = [&](int l) { return 2 * (std::abs(l) - 1) + (l < 0); };
  std::vector<int> uses(2 * f.nvars, 0);
  for (auto& c : uniq)
    for (int l : c) ++uses[li(l)];

  Dag d;
  std::vector<int> input(f.nvars + 1, 0);
  for (int v = 1; v <= f.nvars; ++v)
    if (uses[li(v)] + uses[li(-v)] > 0) input[v] = d.add(GateKind::Input, {}, v);
  std::vector<int> lit_gate(2 * f.nvars, 0);
  for (int v = 1; v <= f.nvars; ++v) {
    if (uses[li(-v)]) lit_gate[li(-v)] = d.add(GateKind::Not, {input[v]});
    if (uses[li(v)]) lit_gate[li(v)] = d.add(GateKind::Or, {input[v]});
  }
  // ports: one gate per use, no gate feeding more than two uses
  std::vector<std::vector<int>> ports(2 * f.nvars);
  auto fan = [&](auto&& self, int g, int k, std::vector<int>& out) -> void {
    if (k <= 2) {
      for (int t = 0; t < k; ++t) out.push_back(g);
      return;
    }
    int a = (k + 1) / 2, b = k - a;
    for (int part : {a, b}) {
      if (part == 1)
        out.push_back(g);
      else
        self(self, d.add(GateKind::Or, {g}), part, out);
    }
  };
  for (int x = 0; x < 2 * f.nvars; ++x)
    if (uses[x]) fan(fan, lit_gate[x], uses[x], ports[x]);
  std::vector<size_t> taken(2 * f.nvars, 0);

  auto tree = [&](std::vector<int> sig, GateKind k) {
    while (sig.size() > 1) {
      std::vector<int> nxt;
      for (size_t i = 0; i + 1 < sig.size(); i += 2) nxt.push_back(d.add(k, {sig[i], sig[i + 1]}));
      if (sig.size() % 2) nxt.push_back(sig.back());
      sig = nxt;
    }
    return sig[0];
  };
  std::vector<int> clause_sig;
  for (auto& c : uniq) {
    std::vector<int> sig;
    for (int l : c) sig.push_back(ports[li(l)][taken[li(l)]++]);
    clause_sig.push_back(tree(sig, GateKind::Or));
  }
  d.output = tree(clause_sig, GateKind::And);
  for (int u : clause_uniq) d.clause_gate.push_back(clause_sig[u]);
  validate_dag(d);
  return d;
}

// ---------------------------------------------------------------------------
// Grid embedding of a normalized circuit on a (gates+1)-sided grid

struct Embedding {
  GridCircuit circuit;
  std::vector<std::pair<int, int>> gate_block;  // index id-1 -> (g, g)
  std::pair<int, int> block_of(int gate) const { return gate_block.at(gate - 1); }
};

inline Embedding embed(const Dag& d) {
  validate_dag(d);
  int m = d.size();
  GridCircuit c(m + 1, BlockKind::Cross);
  for (int k = 0; k <= m; ++k) c.at(0, k) = c.at(k, 0) = BlockKind::Fixed0;
  auto put = [&](int i, int j, BlockKind k) {
    if (c.at(i, j) != BlockKind::Cross)
      throw Error("internal", "embedding collision at (" + std::to_string(i) + "," + std::to_string(j) + ")");
    c.at(i, j) = k;
  };
  Embedding e;
  for (int g = 1; g <= m; ++g) {
    auto& x = d.gate(g);
    e.gate_block.emplace_back(g, g);
    switch (x.kind) {
      case GateKind::Input: put(g, g, BlockKind::Selector); break;
      case GateKind::Not:
        // selector south output carries the negation; route it east along row g
        put(g, g, BlockKind::Or);
        put(g, x.in[0], BlockKind::MulNorth);
        break;
      case GateKind::And:
      case GateKind::Or:
        put(g, g, x.kind == GateKind::And ? BlockKind::And : BlockKind::Or);
        if (x.in.size() == 1) {
          put(x.in[0], g, BlockKind::MulWest);
          if (x.kind == GateKind::And) c.at(g, 0) = BlockKind::Fixed1;
        } else {
          int g1 = std::min(x.in[0], x.in[1]), g2 = std::max(x.in[0], x.in[1]);
          put(g1, g, BlockKind::MulWest);
          put(g, g2, BlockKind::MulNorth);
        }
        break;
    }
  }
  e.circuit = c;
  return e;
}

// ---------------------------------------------------------------------------
// Gadgets over {And, Or, Fixed, Selector}: inputs at (3,0) west and (0,3)
// north, outputs at (4,7) east and (7,4) south.

namespace detail {
inline Gadget gadget_from_rows(const std::array<const char*, 8>& rows) {
  Gadget g{};
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) g[i * 8 + j] = block_from_symbol(rows[i][j]);
  return g;
}
}  // namespace detail

inline Gadget crossing_gadget() {
  return detail::gadget_from_rows({
      "000|0000",
      "000|S||0",
      "000|&0|0",
      "|||&|0|0",
      "0S&|||&|",
      "0|00|000",
      "0|||&000",
      "0000|000",
  });
}

inline Gadget block_gadget(BlockKind k) {
  Gadget g{};
  g.fill(BlockKind::Fixed0);
  auto set = [&](int i, int j, BlockKind b) { g[i * 8 + j] = b; };
  auto outputs = [&] {
    for (int t = 5; t < 8; ++t) set(4, t, BlockKind::Or), set(t, 4, BlockKind::Or);
  };
  switch (k) {
    case BlockKind::Fixed0: break;
    case BlockKind::Cross: return crossing_gadget();
    case BlockKind::And:
    case BlockKind::Or:
    case BlockKind::MulNorth:
    case BlockKind::MulWest:
      if (k != BlockKind::MulNorth)
        for (int t = 0; t < 3; ++t) set(3, t, BlockKind::Or);
      if (k != BlockKind::MulWest)
        for (int t = 0; t < 3; ++t) set(t, 3, BlockKind::Or);
      set(3, 3, k == BlockKind::And ? BlockKind::And : BlockKind::Or);
      set(4, 3, BlockKind::Or);
      set(4, 4, BlockKind::Or);
      outputs();
      break;
    case BlockKind::Selector:
      set(4, 4, BlockKind::Selector);
      outputs();
      break;
    case BlockKind::Fixed1:
      // x through the east branch and not-x through the south one meet in an Or
      set(3, 3, BlockKind::Selector);
      set(3, 4, BlockKind::Or);
      set(4, 3, BlockKind::Or);
      set(4, 4, BlockKind::Or);
      outputs();
      break;
  }
  return g;
}

// Shortest monotone Or path. An input on column 0 is read from the west, one
// on row 0 (other than (0,0)) from the north; the output block emits east and
// south, so it sits on the east or south edge.
inline Gadget wire_gadget(std::pair<int, int> in, std::pair<int, int> out) {
  auto [r1, c1] = in;
  auto [r2, c2] = out;
  auto inside = [](int v) { return v >= 0 && v < 8; };
  if (!inside(r1) || !inside(c1) || !inside(r2) || !inside(c2) || (r1 != 0 && c1 != 0) || (r2 != 7 && c2 != 7) ||
      r2 < r1 || c2 < c1)
    throw Error("invalid-wire", "no monotone wire from (" + std::to_string(r1) + "," + std::to_string(c1) + ") to (" +
                                    std::to_string(r2) + "," + std::to_string(c2) + ")");
  Gadget g{};
  g.fill(BlockKind::Fixed0);
  auto set = [&](int i, int j) { g[i * 8 + j] = BlockKind::Or; };
  bool from_west = c1 == 0;
  if (from_west) {
    for (int j = c1; j <= c2; ++j) set(r1, j);
    for (int i = r1; i <= r2; ++i) set(i, c2);
  } else {
    for (int i = r1; i <= r2; ++i) set(i, c1);
    for (int j = c1; j <= c2; ++j) set(r2, j);
  }
  return g;
}

// Outputs of a gadget driven by west input a and north input b: the gadget
// sits at (1,1) of a 9x9 circuit whose border blocks (4,0), (0,4) are Fixed(a),
// Fixed(b). `u` assigns the gadget's selectors in row-major order.
inline BlockOut gadget_outputs(const Gadget& g, int a, int b, const std::vector<uint8_t>& u, int workers = 1) {
  GridCircuit c(9);
  for (int k = 0; k < 64; ++k) c.at(1 + k / 8, 1 + k % 8) = g[k];
  c.at(4, 0) = a ? BlockKind::Fixed1 : BlockKind::Fixed0;
  c.at(0, 4) = b ? BlockKind::Fixed1 : BlockKind::Fixed0;
  auto v = evaluate(c, u, workers);
  return {v[5 * 9 + 8].east, v[8 * 9 + 5].south};
}

// ---------------------------------------------------------------------------
// Restriction: every block of an n-sided circuit becomes a Delta x Delta
// meta-block, Delta = 8(n+2), laid out as (n+2)^2 tiles. Block (I,J) sits at
// meta offset (I*Delta, J*Delta); inside, its gadget is tile (J,I), inputs
// arrive on tile row J (west) and tile column I (north), and outputs leave
// through wires along tile row J / column I and two corner tiles each, landing
// on the neighbors' input rows and columns.

struct RestrictedCircuit {
  TiledCircuit grid;
  int source_side = 0;
  int delta = 0;
  // per source block (row-major): global (row, col) of the east and south output blocks
  std::vector<std::array<std::pair<int, int>, 2>> outputs;
  // per source block: tile of its gadget
  std::vector<std::pair<int, int>> gadget_tile;

  std::pair<int, int> east_output(int i, int j) const { return outputs.at(static_cast<size_t>(i) * source_side + j)[0]; }
  std::pair<int, int> south_output(int i, int j) const { return outputs.at(static_cast<size_t>(i) * source_side + j)[1]; }
};

inline RestrictedCircuit restrict_circuit(const GridCircuit& src) {
  src.validate();
  int n = src.side();
  int cells = n + 2;
  RestrictedCircuit rc;
  rc.source_side = n;
  rc.delta = 8 * cells;
  rc.grid = TiledCircuit(n * cells);
  rc.outputs.resize(static_cast<size_t>(n) * n);
  rc.gadget_tile.resize(static_cast<size_t>(n) * n);
  const Gadget west_w = wire_gadget({3, 0}, {3, 7}), north_w = wire_gadget({0, 3}, {7, 3});
  const Gadget east_w = wire_gadget({4, 0}, {4, 7}), south_w = wire_gadget({0, 4}, {7, 4});
  const Gadget east_c1 = wire_gadget({4, 0}, {7, 3}), east_c2 = wire_gadget({0, 3}, {3, 7});
  const Gadget south_c1 = wire_gadget({0, 4}, {3, 7}), south_c2 = wire_gadget({3, 0}, {7, 3});
  for (int I = 0; I < n; ++I)
    for (int J = 0; J < n; ++J) {
      BlockKind k = src.at(I, J);
      int ti = I * cells, tj = J * cells;  // meta-block origin in tiles
      size_t id = static_cast<size_t>(I) * n + J;
      rc.gadget_tile[id] = {ti + J, tj + I};
      rc.outputs[id] = {std::make_pair(8 * (ti + J) + 4, 8 * (tj + I) + 7), std::make_pair(8 * (ti + J) + 7, 8 * (tj + I) + 4)};
      if (k == BlockKind::Fixed0) continue;
      bool reads = !(is_fixed(k) || k == BlockKind::Selector);
      if (reads) {
        for (int c = 0; c < I; ++c) rc.grid.place(ti + J, tj + c, west_w);
        for (int r = 0; r < J; ++r) rc.grid.place(ti + r, tj + I, north_w);
      }
      rc.grid.place(ti + J, tj + I, block_gadget(k));
      for (int c = I + 1; c <= n; ++c) rc.grid.place(ti + J, tj + c, east_w);
      rc.grid.place(ti + J, tj + n + 1, east_c1);
      rc.grid.place(ti + J + 1, tj + n + 1, east_c2);
      for (int r = J + 1; r <= n; ++r) rc.grid.place(ti + r, tj + I, south_w);
      rc.grid.place(ti + n + 1, tj + I, south_c1);
      rc.grid.place(ti + n + 1, tj + I + 1, south_c2);
    }
  rc.grid.validate();
  return rc;
}

// Canonical restricted assignment for a source assignment u: selector gadgets
// copy u, each crossing gadget gets (s1, s2) = (not b, a) from its evaluated
// inputs, the constant-one gadget's selector is 0.
inline std::vector<uint8_t> lift_assignment(const GridCircuit& src, const RestrictedCircuit& rc,
                                            const std::vector<uint8_t>& u) {
  int n = src.side();
  auto val = evaluate(src, u);
  auto sel = rc.grid.selectors();
  std::vector<uint8_t> out(sel.size(), 0);
  auto set = [&](int r, int c, int bit) {
    auto it = std::lower_bound(sel.begin(), sel.end(), std::make_pair(r, c));
    if (it == sel.end() || *it != std::make_pair(r, c)) throw Error("internal", "selector not found while lifting");
    out[it - sel.begin()] = static_cast<uint8_t>(bit);
  };
  auto src_sel = src.selectors();
  for (int I = 0; I < n; ++I)
    for (int J = 0; J < n; ++J) {
      auto [ti, tj] = rc.gadget_tile[static_cast<size_t>(I) * n + J];
      int r0 = 8 * ti, c0 = 8 * tj;
      switch (src.at(I, J)) {
        case BlockKind::Selector: {
          auto k = std::lower_bound(src_sel.begin(), src_sel.end(), std::make_pair(I, J)) - src_sel.begin();
          set(r0 + 4, c0 + 4, u.at(k));
          break;
        }
        case BlockKind::Cross: {
          int a = J > 0 ? val[static_cast<size_t>(I) * n + J - 1].east : 0;
          int b = I > 0 ? val[static_cast<size_t>(I - 1) * n + J].south : 0;
          set(r0 + 4, c0 + 1, !b);
          set(r0 + 1, c0 + 4, a);
          break;
        }
        case BlockKind::Fixed1: set(r0 + 3, c0 + 3, 0); break;
        default: break;
      }
    }
  return out;
}

// Source assignment read back from the selector gadgets of a restricted one.
inline std::vector<uint8_t> project_assignment(const GridCircuit& src, const RestrictedCircuit& rc,
                                               const std::vector<uint8_t>& ru) {
  auto sel = rc.grid.selectors();
  std::vector<uint8_t> u;
  for (auto [I, J] : src.selectors()) {
    auto [ti, tj] = rc.gadget_tile[static_cast<size_t>(I) * src.side() + J];
    auto it = std::lower_bound(sel.begin(), sel.end(), std::make_pair(8 * ti + 4, 8 * tj + 4));
    u.push_back(ru.at(it - sel.begin()));
  }
  return u;
}

}  // namespace freeza
