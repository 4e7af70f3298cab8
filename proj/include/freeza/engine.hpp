#pragma once

#include <algorithm>
#include <cstdint>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "freeza/fca.hpp"
#include "freeza/parallel.hpp"
#include "freeza/topology.hpp"

namespace freeza {

struct Configuration {
  GridSpec spec;
  std::vector<uint8_t> s;

  Configuration() = default;
  explicit Configuration(const GridSpec& g, uint8_t fill = 0) : spec(g), s(g.size(), fill) {}

  int size() const { return static_cast<int>(s.size()); }
  uint8_t& operator[](int i) { return s[i]; }
  uint8_t operator[](int i) const { return s[i]; }
  uint8_t& at(CellId u) { return s[spec.index(u)]; }
  uint8_t at(CellId u) const { return s[spec.index(u)]; }
  bool operator==(const Configuration&) const = default;
};

// A rule bound to a grid. next() evaluates the local function at cell i
// reading the snapshot x.
class LfcaAutomaton {
 public:
  LfcaAutomaton(const GridSpec& g, const LfcaRule& r) : topo_(g), rule_(r) {
    if (g.kind != r.kind) throw Error("invalid-spec", "rule " + r.name() + " does not run on " + g.to_string());
  }
  const Topology& topo() const { return topo_; }
  const GridSpec& spec() const { return topo_.spec(); }
  const LfcaRule& rule() const { return rule_; }
  int num_states() const { return 2; }
  int height() const { return 1; }
  bool leq(int a, int b) const { return a <= b; }
  bool is_top(int a) const { return a == 1; }
  int active_count(const uint8_t* x, int i) const {
    const int* nb = topo_.nbrs(i);
    int c = 0;
    for (int k = 0; k < topo_.degree(); ++k) c += x[nb[k]];
    return c;
  }
  int next(const uint8_t* x, int i) const { return lfca_apply(rule_, x[i], active_count(x, i)); }

 private:
  Topology topo_;
  LfcaRule rule_;
};

class RingAutomaton {
 public:
  RingAutomaton(const GridSpec& g, const Rule1D& r) : topo_(g), rule_(r) {
    if (g.kind != GridKind::Ring1D) throw Error("invalid-spec", "1D rules run on ring grids only");
    int q = r.num_states();
    // longest strict chain, bounds the number of changes per cell
    std::vector<int> depth(q, 0);
    for (int pass = 0; pass < q; ++pass)
      for (int a = 0; a < q; ++a)
        for (int b = 0; b < q; ++b)
          if (a != b && r.order().leq(a, b)) depth[b] = std::max(depth[b], depth[a] + 1);
    height_ = *std::max_element(depth.begin(), depth.end());
  }
  const Topology& topo() const { return topo_; }
  const GridSpec& spec() const { return topo_.spec(); }
  const Rule1D& rule() const { return rule_; }
  int num_states() const { return rule_.num_states(); }
  int height() const { return height_; }
  bool leq(int a, int b) const { return rule_.order().leq(a, b); }
  bool is_top(int a) const { return rule_.order().is_top(a); }
  int next(const uint8_t* x, int i) const {
    const int* nb = topo_.nbrs(i);
    return rule_.apply(x[nb[0]], x[i], x[nb[1]]);
  }

 private:
  Topology topo_;
  Rule1D rule_;
  int height_ = 1;
};

struct Schedule {
  std::vector<std::vector<int>> steps;

  bool sequential() const {
    return std::all_of(steps.begin(), steps.end(), [](auto& s) { return s.size() == 1; });
  }
  bool sweep_complete(int ncells) const {
    if (!sequential()) return false;
    for (size_t k = 0; k + ncells <= steps.size(); k += ncells) {
      std::vector<char> seen(ncells, 0);
      for (size_t t = k; t < k + ncells; ++t) {
        if (seen[steps[t][0]]) return false;
        seen[steps[t][0]] = 1;
      }
    }
    return true;
  }
  static Schedule of_sequence(const std::vector<int>& seq) {
    Schedule s;
    for (int c : seq) s.steps.push_back({c});
    return s;
  }
  bool operator==(const Schedule&) const = default;
};

struct StepRecord {
  size_t step = 0;
  std::vector<int> updated;
  std::vector<int> changed;
};

struct Trajectory {
  Configuration initial;
  std::vector<StepRecord> records;
  Configuration final_config;
  bool fixed_point = false;
  size_t changes() const {
    size_t n = 0;
    for (auto& r : records) n += r.changed.size();
    return n;
  }
};

// All reads come from the pre-step snapshot.
template <class A>
std::pair<Configuration, std::vector<int>> step(const A& a, const Configuration& x, const std::vector<int>& cells) {
  Configuration y = x;
  std::vector<int> changed;
  for (int c : cells) {
    int v = a.next(x.s.data(), c);
    if (v != x.s[c]) {
      y.s[c] = static_cast<uint8_t>(v);
      changed.push_back(c);
    }
  }
  return {std::move(y), std::move(changed)};
}

template <class A>
Trajectory run(const A& a, const Configuration& x, const Schedule& sched) {
  const int n = x.size();
  for (auto& st : sched.steps)
    for (int c : st)
      if (c < 0 || c >= n) throw Error("out-of-range", "schedule cell index " + std::to_string(c));
  Trajectory tr;
  tr.initial = x;
  Configuration cur = x;
  // quiet[c] == epoch marks c as updated without effect since the last change
  std::vector<size_t> quiet(n, 0);
  size_t epoch = 1;
  int quiet_count = 0;
  const size_t cap = static_cast<size_t>(n) * static_cast<size_t>(a.height());
  size_t total = 0;
  std::vector<std::pair<int, uint8_t>> writes;
  for (size_t t = 0; t < sched.steps.size(); ++t) {
    const auto& st = sched.steps[t];
    writes.clear();
    std::vector<int> changed;
    for (int c : st) {
      int v = a.next(cur.s.data(), c);
      if (v == cur.s[c]) continue;
      if (!a.leq(cur.s[c], v))
        throw Error("internal", "state decreased at cell " + std::to_string(c) + "; rule is not freezing");
      writes.emplace_back(c, static_cast<uint8_t>(v));
      changed.push_back(c);
    }
    // the step reads one snapshot, so writes wait until every cell is evaluated
    for (auto [c, v] : writes) cur.s[c] = v;
    total += changed.size();
    if (total > cap) throw Error("internal", "change budget exceeded; rule is not freezing");
    bool any = !changed.empty();
    tr.records.push_back({t, st, std::move(changed)});
    if (any) {
      ++epoch;
      quiet_count = 0;
    } else {
      for (int c : st)
        if (quiet[c] != epoch) quiet[c] = epoch, ++quiet_count;
      if (quiet_count == n) {
        tr.fixed_point = true;
        break;
      }
    }
  }
  tr.final_config = std::move(cur);
  return tr;
}

template <class A>
bool is_fixed_point(const A& a, const Configuration& x) {
  for (int i = 0; i < x.size(); ++i)
    if (a.next(x.s.data(), i) != x.s[i]) return false;
  return true;
}

template <class A>
Configuration synchronous_fixed_point(const A& a, const Configuration& x, int workers = 1) {
  Configuration cur = x, nxt = x;
  const int n = x.size();
  for (;;) {
    std::vector<uint8_t> flag(n, 0);
    parallel_for(n, workers, [&](int64_t lo, int64_t hi) {
      for (int64_t i = lo; i < hi; ++i) {
        int v = a.next(cur.s.data(), static_cast<int>(i));
        nxt.s[i] = static_cast<uint8_t>(v);
        flag[i] = v != cur.s[i];
      }
    });
    if (std::none_of(flag.begin(), flag.end(), [](uint8_t f) { return f; })) return cur;
    std::swap(cur, nxt);
  }
}

// Splits every block step into singletons. Cells that would not change are
// emitted first so they still read the pre-step state; the changing cells
// are pairwise non-adjacent, so their order is irrelevant.
template <class A>
Schedule desynchronize(const A& a, const Schedule& sched, const Configuration& x) {
  Schedule out;
  Configuration cur = x;
  const Topology& topo = a.topo();
  for (size_t t = 0; t < sched.steps.size(); ++t) {
    const auto& st = sched.steps[t];
    std::vector<int> still, moving;
    for (int c : st) (a.next(cur.s.data(), c) != cur.s[c] ? moving : still).push_back(c);
    for (size_t i = 0; i < moving.size(); ++i)
      for (size_t j = i + 1; j < moving.size(); ++j)
        if (topo.adjacent(moving[i], moving[j])) {
          auto u = topo.spec().cell(moving[i]), v = topo.spec().cell(moving[j]);
          throw Error("precondition", "step " + std::to_string(t) + " iterates adjacent cells (" +
                                          std::to_string(u.r) + "," + std::to_string(u.c) + ") and (" +
                                          std::to_string(v.r) + "," + std::to_string(v.c) + ")");
        }
    for (int c : still) out.steps.push_back({c});
    for (int c : moving) out.steps.push_back({c});
    cur = step(a, cur, st).first;
  }
  return out;
}

// ---- text formats ----

inline std::string format_cell(const GridSpec& g, int i) {
  auto u = g.cell(i);
  if (g.kind == GridKind::Ring1D) return std::to_string(u.c);
  return std::to_string(u.r) + "," + std::to_string(u.c);
}

inline CellId parse_cell(const GridSpec& g, const std::string& tok) {
  try {
    auto comma = tok.find(',');
    size_t used = 0;
    if (comma == std::string::npos) {
      if (g.kind != GridKind::Ring1D) throw Error("parse", "cell '" + tok + "' must be r,c");
      int c = std::stoi(tok, &used);
      if (used != tok.size()) throw Error("parse", "bad cell '" + tok + "'");
      return {0, c};
    }
    int r = std::stoi(tok.substr(0, comma), &used);
    if (used != comma) throw Error("parse", "bad cell '" + tok + "'");
    std::string rest = tok.substr(comma + 1);
    int c = std::stoi(rest, &used);
    if (used != rest.size()) throw Error("parse", "bad cell '" + tok + "'");
    return {r, c};
  } catch (const std::logic_error&) {
    throw Error("parse", "bad cell '" + tok + "'");
  }
}

inline Configuration read_configuration(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error("parse", "empty configuration file");
  while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
  Configuration x(parse_spec(line));
  int r = 0;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty()) continue;
    if (r >= x.spec.rows()) throw Error("parse", "too many configuration rows");
    if (static_cast<int>(line.size()) != x.spec.cols())
      throw Error("parse", "row " + std::to_string(r) + " has " + std::to_string(line.size()) + " cells, expected " +
                               std::to_string(x.spec.cols()));
    for (int c = 0; c < x.spec.cols(); ++c) {
      if (line[c] < '0' || line[c] > '9') throw Error("parse", "state digits expected");
      x.s[r * x.spec.cols() + c] = static_cast<uint8_t>(line[c] - '0');
    }
    ++r;
  }
  if (r != x.spec.rows()) throw Error("parse", "expected " + std::to_string(x.spec.rows()) + " rows");
  return x;
}

inline void write_configuration(std::ostream& out, const Configuration& x) {
  out << x.spec.to_string() << '\n';
  for (int r = 0; r < x.spec.rows(); ++r) {
    for (int c = 0; c < x.spec.cols(); ++c) out << char('0' + x.s[r * x.spec.cols() + c]);
    out << '\n';
  }
}

inline Schedule read_schedule(std::istream& in, const GridSpec& g) {
  Schedule s;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::vector<int> st;
    std::string tok;
    while (ls >> tok) st.push_back(g.index(parse_cell(g, tok)));
    if (!st.empty()) s.steps.push_back(std::move(st));
  }
  return s;
}

inline void write_schedule(std::ostream& out, const GridSpec& g, const Schedule& s) {
  for (auto& st : s.steps) {
    for (size_t k = 0; k < st.size(); ++k) out << (k ? " " : "") << format_cell(g, st[k]);
    out << '\n';
  }
}

// ---- random generators (portable streams, see parallel.hpp) ----

inline Configuration random_configuration(const GridSpec& g, int q, double density, Rng& rng) {
  Configuration x(g);
  for (auto& v : x.s) v = q == 2 ? static_cast<uint8_t>(coin(rng, density)) : static_cast<uint8_t>(uniform_below(rng, q));
  return x;
}

inline Schedule random_sweeps(int ncells, int sweeps, Rng& rng) {
  Schedule s;
  std::vector<int> perm(ncells);
  for (int k = 0; k < sweeps; ++k) {
    for (int i = 0; i < ncells; ++i) perm[i] = i;
    shuffle_portable(perm, rng);
    for (int c : perm) s.steps.push_back({c});
  }
  return s;
}

// Steps are random independent sets (no two members adjacent).
inline Schedule random_independent_blocks(const Topology& topo, int nsteps, Rng& rng) {
  Schedule s;
  const int n = topo.size();
  std::vector<int> order(n);
  for (int k = 0; k < nsteps; ++k) {
    for (int i = 0; i < n; ++i) order[i] = i;
    shuffle_portable(order, rng);
    std::vector<char> blocked(n, 0);
    std::vector<int> st;
    for (int c : order) {
      if (blocked[c] || !coin(rng, 0.5)) continue;
      st.push_back(c);
      blocked[c] = 1;
      for (int d = 0; d < topo.degree(); ++d) blocked[topo.nbrs(c)[d]] = 1;
    }
    if (st.empty()) st.push_back(order[0]);
    std::sort(st.begin(), st.end());
    s.steps.push_back(std::move(st));
  }
  return s;
}

}  // namespace freeza
