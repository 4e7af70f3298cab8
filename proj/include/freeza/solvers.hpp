#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "freeza/oracle.hpp"

namespace freeza {

// ---- parallel primitives ----

// Labels each member cell with the smallest cell index of its component
// (adjacency restricted to members); non-members get -1. Jacobi-style
// min-label propagation, so the result is the same for every worker count.
inline std::vector<int> connected_components_par(const Topology& topo, const std::vector<char>& member,
                                                 int workers = 1) {
  const int n = topo.size();
  if (static_cast<int>(member.size()) != n) throw Error("precondition", "membership mask has the wrong length");
  std::vector<int> label(n, -1), next(n, -1);
  for (int v = 0; v < n; ++v)
    if (member[v]) label[v] = v;
  for (;;) {
    std::vector<uint8_t> moved(n, 0);
    parallel_for(n, workers, [&](int64_t lo, int64_t hi) {
      for (int64_t v = lo; v < hi; ++v) {
        int best = label[v];
        if (best >= 0)
          for (int k = 0; k < topo.degree(); ++k) {
            int w = topo.nbrs(static_cast<int>(v))[k];
            if (label[w] >= 0) best = std::min(best, label[w]);
          }
        next[v] = best;
        moved[v] = best != label[v];
      }
    });
    std::swap(label, next);
    if (std::none_of(moved.begin(), moved.end(), [](uint8_t m) { return m; })) return label;
  }
}

// Exact sum with a 128-bit accumulator; fails if the total leaves int64.
inline int64_t prefix_sum_par(const std::vector<int64_t>& v, int workers = 1) {
  const int64_t n = static_cast<int64_t>(v.size());
  int w = std::max(1, workers);
  std::vector<__int128> part(w, 0);
  parallel_for(w, w, [&](int64_t lo, int64_t hi) {
    for (int64_t t = lo; t < hi; ++t) {
      __int128 s = 0;
      for (int64_t i = n * t / w; i < n * (t + 1) / w; ++i) s += v[i];
      part[t] = s;
    }
  });
  // pairwise tree reduction
  while (part.size() > 1) {
    std::vector<__int128> up((part.size() + 1) / 2);
    for (size_t i = 0; i < up.size(); ++i) up[i] = part[2 * i] + (2 * i + 1 < part.size() ? part[2 * i + 1] : 0);
    part = std::move(up);
  }
  __int128 total = part[0];
  if (total > std::numeric_limits<int64_t>::max() || total < std::numeric_limits<int64_t>::min())
    throw Error("overflow", "sum does not fit in 64 bits");
  return static_cast<int64_t>(total);
}

// ---- LFCA deciders ----

struct SolverResult {
  bool unstable = false;
  std::string method;
  std::optional<Schedule> witness;
};

namespace detail {

inline void require_inactive(const Configuration& x, int u) {
  if (u < 0 || u >= x.size()) throw Error("out-of-range", "cell index " + std::to_string(u));
  if (x.s[u] != 0) throw Error("precondition", "cell " + format_cell(x.spec, u) + " is already active");
}

inline void require_class(const LfcaRule& r, RuleClass c) {
  if (classify(r) != c)
    throw Error("dispatch", "rule " + r.name() + " is " + to_string(classify(r)) + ", not " + to_string(c));
}

}  // namespace detail

inline bool decide_trivial(const LfcaAutomaton& a, const Configuration& x, int u) {
  const auto& r = a.rule();
  detail::require_class(r, RuleClass::Trivial);
  detail::require_inactive(x, u);
  int cnt = a.active_count(x.s.data(), u);
  const int d = r.degree();
  if (r.lo() == 0 && r.hi() == 0) return cnt == 0;
  if (r.lo() == d && r.hi() == d) return cnt == d;
  if (r.lo() == 0 && r.hi() == d) return true;
  // [1, d]: activity spreads over the connected torus from any active cell
  return std::any_of(x.s.begin(), x.s.end(), [](uint8_t v) { return v != 0; });
}

// Witness for an unstable cell under a trivial rule: u alone, or for [1, d]
// the inactive cells of a shortest path from the active set to u, in order.
inline Schedule trivial_witness(const LfcaAutomaton& a, const Configuration& x, int u) {
  const auto& r = a.rule();
  if (!(r.lo() == 1 && r.hi() == r.degree())) return Schedule::of_sequence({u});
  const auto& t = a.topo();
  std::vector<int> parent(x.size(), -2);
  std::vector<int> queue{u};
  parent[u] = -1;
  for (size_t h = 0; h < queue.size(); ++h) {
    int v = queue[h];
    for (int k = 0; k < t.degree(); ++k) {
      int w = t.nbrs(v)[k];
      if (x.s[w]) {
        std::vector<int> seq;
        for (int c = v; c != -1; c = parent[c]) seq.push_back(c);
        return Schedule::of_sequence(seq);
      }
      if (parent[w] == -2) {
        parent[w] = v;
        queue.push_back(w);
      }
    }
  }
  throw Error("precondition", "no active cell");
}

inline bool infiltrates(const LfcaAutomaton& a, const Configuration& x, int v) {
  detail::require_inactive(x, v);
  return a.rule().contains(a.active_count(x.s.data(), v));
}

inline std::vector<int> compute_vplus(const LfcaAutomaton& a, const Configuration& x) {
  std::vector<int> out;
  for (int v = 0; v < x.size(); ++v) {
    if (x.s[v]) continue;
    int c = a.active_count(x.s.data(), v);
    if (!a.rule().contains(c) && a.rule().contains(c + 1)) out.push_back(v);
  }
  return out;
}

struct VPlusAnalysis {
  std::vector<int> vplus;
  std::vector<int> component_of_u;
  std::vector<int> boundary;
};

inline VPlusAnalysis analyze_vplus(const LfcaAutomaton& a, const Configuration& x, int u, int workers = 1) {
  VPlusAnalysis an;
  an.vplus = compute_vplus(a, x);
  std::vector<char> member(x.size(), 0);
  for (int v : an.vplus) member[v] = 1;
  if (!member[u]) return an;
  auto label = connected_components_par(a.topo(), member, workers);
  std::vector<char> in_comp(x.size(), 0), in_bd(x.size(), 0);
  for (int v = 0; v < x.size(); ++v)
    if (label[v] == label[u]) an.component_of_u.push_back(v), in_comp[v] = 1;
  for (int v : an.component_of_u)
    for (int k = 0; k < a.topo().degree(); ++k) {
      int w = a.topo().nbrs(v)[k];
      if (!in_comp[w] && !in_bd[w]) in_bd[w] = 1;
    }
  for (int v = 0; v < x.size(); ++v)
    if (in_bd[v]) an.boundary.push_back(v);
  return an;
}

// Also builds the witness: the infiltrating boundary cell, then a shortest
// path through u's component, updated in order.
inline SolverResult decide_infiltration(const LfcaAutomaton& a, const Configuration& x, int u, int workers = 1) {
  detail::require_class(a.rule(), RuleClass::Infiltration);
  detail::require_inactive(x, u);
  SolverResult res{false, "infiltration", std::nullopt};
  const int n = x.size();
  // F(x) once up front
  std::vector<char> fires(n, 0);
  parallel_for(n, workers, [&](int64_t lo, int64_t hi) {
    for (int64_t v = lo; v < hi; ++v)
      fires[v] = !x.s[v] && a.rule().contains(a.active_count(x.s.data(), static_cast<int>(v)));
  });
  if (fires[u]) {
    res.unstable = true;
    res.witness = Schedule::of_sequence({u});
    return res;
  }
  auto an = analyze_vplus(a, x, u, workers);
  if (an.component_of_u.empty()) return res;
  int src = -1;
  for (int b : an.boundary)
    if (fires[b]) {
      src = b;
      break;
    }
  if (src < 0) return res;
  res.unstable = true;
  std::vector<char> in_comp(n, 0);
  for (int v : an.component_of_u) in_comp[v] = 1;
  std::vector<int> prev(n, -2);
  std::deque<int> q{src};
  prev[src] = -1;
  while (!q.empty() && prev[u] == -2) {
    int v = q.front();
    q.pop_front();
    for (int k = 0; k < a.topo().degree(); ++k) {
      int w = a.topo().nbrs(v)[k];
      if (in_comp[w] && prev[w] == -2) prev[w] = v, q.push_back(w);
    }
  }
  std::vector<int> path;
  for (int v = u; v != -1; v = prev[v]) path.push_back(v);
  std::reverse(path.begin(), path.end());
  res.witness = Schedule::of_sequence(path);
  return res;
}

inline SolverResult decide_monotone_like(const LfcaAutomaton& a, const Configuration& x, int u, int workers = 1) {
  const auto& r = a.rule();
  detail::require_class(r, RuleClass::MonotoneLike);
  detail::require_inactive(x, u);
  SolverResult res{false, "monotone-like", std::nullopt};
  LfcaAutomaton mono(a.spec(), LfcaRule::interval(r.kind, r.lo(), r.degree()));
  auto fp = synchronous_fixed_point(mono, x, workers);
  if (!fp.s[u]) return res;
  if (!is_monotone(r) && a.active_count(x.s.data(), u) > r.hi()) return res;
  res.unstable = true;
  return res;
}

// ---- one-dimensional rules ----

struct ColumnCertificate {
  int initial_state = 0;
  std::vector<std::pair<int, int>> changes;  // (time, new state), times ascending
};

namespace detail {

struct Column {
  ColumnCertificate cert;
  std::vector<uint8_t> at;  // state at times 0..T
};

inline Column expand_column(const ColumnCertificate& c, int horizon) {
  Column col{c, std::vector<uint8_t>(horizon + 1, static_cast<uint8_t>(c.initial_state))};
  for (auto [t, v] : c.changes)
    for (int s = t; s <= horizon; ++s) col.at[s] = static_cast<uint8_t>(v);
  return col;
}

inline bool triple_ok(const Rule1D& f, const Column& l, const Column& m, const Column& r) {
  for (auto [t, v] : m.cert.changes) {
    if (f.apply(l.at[t - 1], m.at[t - 1], r.at[t - 1]) != v) return false;
    if (l.at[t] != l.at[t - 1] || r.at[t] != r.at[t - 1]) return false;
  }
  return true;
}

inline void require_total(const Rule1D& f) {
  if (!f.order().total()) throw Error("unsupported-order", "the 1D decider needs a total state order");
  if (!is_freezing(f)) throw Error("precondition", "rule is not freezing");
}

inline void enumerate_columns(const StateOrder& o, int horizon, int start, ColumnCertificate& cur, int t0,
                              std::vector<ColumnCertificate>& out) {
  out.push_back(cur);
  int s = cur.changes.empty() ? start : cur.changes.back().second;
  for (int t = t0; t <= horizon; ++t)
    for (int v = 0; v < o.size(); ++v) {
      if (v == s || !o.leq(s, v)) continue;
      cur.changes.push_back({t, v});
      enumerate_columns(o, horizon, start, cur, t + 1, out);
      cur.changes.pop_back();
    }
}

}  // namespace detail

inline bool valid_certificate(const Rule1D& f, const ColumnCertificate& c, int horizon) {
  int s = c.initial_state, t = 0;
  if (s < 0 || s >= f.num_states()) return false;
  if (static_cast<int>(c.changes.size()) > f.num_states() - 1) return false;
  for (auto [time, v] : c.changes) {
    if (time <= t || time > horizon || v < 0 || v >= f.num_states() || v == s || !f.order().leq(s, v)) return false;
    t = time, s = v;
  }
  return true;
}

// Change at time t means the state differs between t-1 and t; it must be
// what the rule gives on the neighborhood at t-1, and neither neighbor may
// change in the same step.
inline bool verify_1d_triple(const Rule1D& f, const ColumnCertificate& left, const ColumnCertificate& mid,
                             const ColumnCertificate& right, int horizon) {
  for (auto* c : {&left, &mid, &right})
    if (!valid_certificate(f, *c, horizon)) return false;
  return detail::triple_ok(f, detail::expand_column(left, horizon), detail::expand_column(mid, horizon),
                           detail::expand_column(right, horizon));
}

inline int horizon_1d(int n, int q) { return n * (q - 1) + 1; }

struct Decision1D {
  bool unstable = false;
  std::vector<ColumnCertificate> columns;
  std::optional<Schedule> witness;
};

// Exact search over column assignments: pick the ring position with the
// fewest candidate pairs as the start, then walk pair states around the ring
// and close the cycle on the starting pair.
inline Decision1D decide_1d(const RingAutomaton& a, const Configuration& x, int u) {
  const Rule1D& f = a.rule();
  detail::require_total(f);
  const int n = x.size();
  if (n < 3) throw Error("precondition", "the 1D decider needs a ring of at least 3 cells");
  if (u < 0 || u >= n) throw Error("out-of-range", "cell index " + std::to_string(u));
  if (a.is_top(x.s[u])) throw Error("precondition", "cell " + std::to_string(u) + " is already in a top state");
  const int T = horizon_1d(n, f.num_states());

  std::vector<std::vector<detail::Column>> cand(n);
  for (int i = 0; i < n; ++i) {
    std::vector<ColumnCertificate> certs;
    ColumnCertificate c{x.s[i], {}};
    detail::enumerate_columns(f.order(), T, x.s[i], c, 1, certs);
    for (auto& ct : certs) {
      if (i == u && ct.changes.empty()) continue;
      cand[i].push_back(detail::expand_column(ct, T));
    }
  }
  auto at = [&](int i) -> const std::vector<detail::Column>& { return cand[((i % n) + n) % n]; };

  int r0 = 0;
  size_t best = SIZE_MAX;
  for (int i = 0; i < n; ++i) {
    size_t p = cand[i].size() * at(i + 1).size();
    if (p < best) best = p, r0 = i;
  }

  Decision1D out;
  // pair states (a, b) of positions (r0+k, r0+k+1)
  using PairId = std::pair<int, int>;
  for (int s0 = 0; s0 < static_cast<int>(at(r0).size()); ++s0)
    for (int s1 = 0; s1 < static_cast<int>(at(r0 + 1).size()); ++s1) {
      // layers[k] holds reachable pairs for positions (r0+k, r0+k+1) with parents
      std::vector<std::vector<PairId>> layer(n);
      std::vector<std::vector<int>> parent(n);
      layer[0] = {{s0, s1}};
      parent[0] = {-1};
      for (int k = 1; k < n - 1; ++k) {
        std::vector<std::vector<char>> seen(at(r0 + k).size(), std::vector<char>(at(r0 + k + 1).size(), 0));
        for (int p = 0; p < static_cast<int>(layer[k - 1].size()); ++p) {
          auto [ia, ib] = layer[k - 1][p];
          const auto& A = at(r0 + k - 1)[ia];
          const auto& B = at(r0 + k)[ib];
          const auto& nextc = at(r0 + k + 1);
          for (int ic = 0; ic < static_cast<int>(nextc.size()); ++ic) {
            if (seen[ib][ic]) continue;
            if (!detail::triple_ok(f, A, B, nextc[ic])) continue;
            seen[ib][ic] = 1;
            layer[k].push_back({ib, ic});
            parent[k].push_back(p);
          }
        }
        if (layer[k].empty()) break;
      }
      // close: pairs (r0+n-2, r0+n-1) need triples at r0+n-1 and r0
      const auto& C0 = at(r0)[s0];
      const auto& C1 = at(r0 + 1)[s1];
      for (int p = 0; p < static_cast<int>(layer[n - 2].size()); ++p) {
        auto [iy, iz] = layer[n - 2][p];
        const auto& Y = at(r0 + n - 2)[iy];
        const auto& Z = at(r0 + n - 1)[iz];
        if (!detail::triple_ok(f, Y, Z, C0) || !detail::triple_ok(f, Z, C0, C1)) continue;
        // recover the columns
        std::vector<int> pick(n);
        int idx = p;
        for (int k = n - 2; k >= 0; --k) {
          pick[k + 1] = layer[k][idx].second;
          if (k == 0) pick[0] = layer[k][idx].first;
          idx = parent[k][idx];
        }
        out.unstable = true;
        out.columns.assign(n, {});
        std::vector<std::pair<int, int>> events;
        for (int k = 0; k < n; ++k) {
          int cell = (r0 + k) % n;
          out.columns[cell] = at(r0 + k)[pick[k]].cert;
          for (auto [t, v] : out.columns[cell].changes) events.push_back({t, cell});
        }
        std::sort(events.begin(), events.end());
        std::vector<int> seq;
        for (auto [t, c] : events) seq.push_back(c);
        out.witness = Schedule::of_sequence(seq);
        return out;
      }
    }
  return out;
}

// ---- front door ----

struct DecideResult {
  Verdict verdict = Verdict::Stable;
  std::string method;
  std::optional<Schedule> witness;
};

inline DecideResult decide(const LfcaAutomaton& a, const Configuration& x, int u, const ExploreOptions& opt = {},
                           int workers = 1) {
  detail::require_inactive(x, u);
  auto from = [](const SolverResult& s) {
    return DecideResult{s.unstable ? Verdict::Unstable : Verdict::Stable, s.method, s.witness};
  };
  switch (classify(a.rule())) {
    case RuleClass::Trivial:
      if (!decide_trivial(a, x, u)) return {Verdict::Stable, "trivial", std::nullopt};
      return {Verdict::Unstable, "trivial", trivial_witness(a, x, u)};
    case RuleClass::Infiltration: return from(decide_infiltration(a, x, u, workers));
    case RuleClass::MonotoneLike: return from(decide_monotone_like(a, x, u, workers));
    default: break;
  }
  auto d = decide_unstable(a, x, u, opt);
  return {d.verdict, "oracle", d.witness};
}

inline DecideResult decide(const RingAutomaton& a, const Configuration& x, int u, const ExploreOptions& opt = {},
                           int = 1) {
  if (a.rule().order().total()) {
    auto d = decide_1d(a, x, u);
    return {d.unstable ? Verdict::Unstable : Verdict::Stable, "1d", d.witness};
  }
  auto d = decide_unstable(a, x, u, opt);
  return {d.verdict, "oracle", d.witness};
}

}  // namespace freeza
