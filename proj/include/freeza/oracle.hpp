#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <type_traits>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "freeza/engine.hpp"

namespace freeza {

inline size_t default_budget() {
  if (const char* s = std::getenv("FREEZA_BUDGET")) {
    char* end = nullptr;
    unsigned long long v = std::strtoull(s, &end, 10);
    if (end && *end == '\0' && v > 0) return static_cast<size_t>(v);
  }
  return 5'000'000;
}

enum class Verdict { Stable, Unstable, Indeterminate };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Stable: return "stable";
    case Verdict::Unstable: return "unstable";
    default: return "indeterminate";
  }
}

struct ReachabilityReport {
  std::vector<int> unstable;  // sorted cell indices
  std::map<int, Schedule> witness;
  size_t explored = 0;
  bool truncated = false;
  bool is_unstable(int c) const { return std::binary_search(unstable.begin(), unstable.end(), c); }
};

struct ExploreOptions {
  size_t budget = default_budget();
  // exact pruning for interval LFCA rules; off means plain search
  bool reduce = true;
  bool witnesses = true;
  // expand enabled cells in reverse canonical order
  bool reverse = false;
};

namespace detail {

struct Key128 {
  unsigned __int128 v = 0;
  bool operator==(const Key128&) const = default;
};

struct Key128Hash {
  size_t operator()(const Key128& k) const {
    uint64_t a = static_cast<uint64_t>(k.v), b = static_cast<uint64_t>(k.v >> 64);
    uint64_t h = a * 0x9E3779B97F4A7C15ull ^ (b + 0x632BE59BD9B4E019ull + (a << 6) + (a >> 2));
    h ^= h >> 31;
    h *= 0xBF58476D1CE4E5B9ull;
    return static_cast<size_t>(h ^ (h >> 29));
  }
};

inline int state_bits(int q) {
  int b = 1;
  while ((1 << b) < q) ++b;
  return b;
}

// Encodes the states of a fixed cell list.
struct Codec128 {
  using Key = Key128;
  using Hash = Key128Hash;
  int bits;
  Key encode(const uint8_t* x, const std::vector<int>& cells) const {
    Key k;
    for (size_t i = 0; i < cells.size(); ++i) k.v |= static_cast<unsigned __int128>(x[cells[i]]) << (i * bits);
    return k;
  }
  void decode(const Key& k, uint8_t* x, const std::vector<int>& cells) const {
    const unsigned mask = (1u << bits) - 1;
    for (size_t i = 0; i < cells.size(); ++i) x[cells[i]] = static_cast<uint8_t>((k.v >> (i * bits)) & mask);
  }
};

struct CodecString {
  using Key = std::string;
  using Hash = std::hash<std::string>;
  int bits;
  Key encode(const uint8_t* x, const std::vector<int>& cells) const {
    Key k(cells.size(), '\0');
    for (size_t i = 0; i < cells.size(); ++i) k[i] = static_cast<char>(x[cells[i]]);
    return k;
  }
  void decode(const Key& k, uint8_t* x, const std::vector<int>& cells) const {
    for (size_t i = 0; i < cells.size(); ++i) x[cells[i]] = static_cast<uint8_t>(k[i]);
  }
};

template <class A>
constexpr bool is_lfca = std::is_same_v<A, LfcaAutomaton>;

// Cells that can ever change: least fixed point of "enabled now, or could
// collect enough active neighbors from cells already known to be firable".
// Only for interval LFCA rules; general automata get every non-top cell.
template <class A>
std::vector<char> firable_cells(const A& a, const Configuration& x, bool reduce) {
  const int n = x.size();
  std::vector<char> f(n, 0);
  if constexpr (is_lfca<A>) {
    if (reduce && a.rule().is_interval()) {
      if (a.rule().empty()) return f;
      const int k1 = a.rule().lo(), k2 = a.rule().hi();
      const Topology& t = a.topo();
      bool grew = true;
      while (grew) {
        grew = false;
        for (int v = 0; v < n; ++v) {
          if (f[v] || x.s[v]) continue;
          int cnt = a.active_count(x.s.data(), v);
          if (cnt > k2) continue;
          int extra = 0;
          for (int k = 0; k < t.degree(); ++k) extra += f[t.nbrs(v)[k]];
          if (cnt + extra >= k1) f[v] = 1, grew = true;
        }
      }
      return f;
    }
  }
  for (int v = 0; v < n; ++v) f[v] = !a.is_top(x.s[v]);
  return f;
}

template <class A>
std::vector<std::vector<int>> firable_components(const A& a, const std::vector<char>& f, bool split) {
  const int n = static_cast<int>(f.size());
  std::vector<std::vector<int>> comps;
  if (!split) {
    std::vector<int> all;
    for (int v = 0; v < n; ++v)
      if (f[v]) all.push_back(v);
    if (!all.empty()) comps.push_back(std::move(all));
    return comps;
  }
  const Topology& t = a.topo();
  std::vector<char> seen(n, 0);
  for (int s = 0; s < n; ++s) {
    if (!f[s] || seen[s]) continue;
    std::vector<int> comp{s}, stack{s};
    seen[s] = 1;
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      for (int k = 0; k < t.degree(); ++k) {
        int w = t.nbrs(v)[k];
        if (f[w] && !seen[w]) seen[w] = 1, comp.push_back(w), stack.push_back(w);
      }
    }
    std::sort(comp.begin(), comp.end());
    comps.push_back(std::move(comp));
  }
  return comps;
}

// Search state shared by all subsystems of one exploration.
template <class Codec>
struct Forest {
  std::vector<typename Codec::Key> keys;
  std::vector<int64_t> parent;
  std::vector<int> move;
  std::vector<int> path_to(int64_t node) const {
    std::vector<int> p;
    for (; node >= 0 && parent[node] >= 0; node = parent[node]) p.push_back(move[node]);
    std::reverse(p.begin(), p.end());
    return p;
  }
};

// Explores one subsystem (a set of cells that only interact with each
// other). found[c] records the node at which c was first seen enabled.
// Returns false if the budget ran out.
template <class A, class Codec>
bool explore_subsystem(const A& a, const Configuration& x, const std::vector<int>& cells, const std::vector<char>& firable,
                       const ExploreOptions& opt, Codec codec, Forest<Codec>& forest, size_t& explored,
                       std::vector<int64_t>& found, int target) {
  std::unordered_map<typename Codec::Key, int64_t, typename Codec::Hash> index;
  std::vector<uint8_t> cur = x.s;
  std::vector<char> local(x.s.size(), 0);
  const Topology& topo = a.topo();
  size_t remaining = 0;
  for (int c : cells) remaining += found[c] < 0;

  auto add = [&](const typename Codec::Key& k, int64_t parent, int mv) -> int64_t {
    auto it = index.find(k);
    if (it != index.end()) return -1;
    int64_t id = static_cast<int64_t>(forest.keys.size());
    forest.keys.push_back(k);
    forest.parent.push_back(parent);
    forest.move.push_back(mv);
    index.emplace(k, id);
    ++explored;
    return id;
  };

  std::vector<int64_t> stack;
  {
    int64_t root = add(codec.encode(x.s.data(), cells), -1, -1);
    stack.push_back(root);
  }
  std::vector<int> enabled;
  while (!stack.empty()) {
    int64_t node = stack.back();
    stack.pop_back();
    codec.decode(forest.keys[node], cur.data(), cells);
    enabled.clear();
    for (int c : cells)
      if (a.next(cur.data(), c) != cur[c]) enabled.push_back(c);
    for (int c : enabled)
      if (found[c] < 0) {
        found[c] = node;
        --remaining;
        if (c == target) return true;
      }
    // every firable cell is already known unstable: nothing left to learn
    if (remaining == 0 && target < 0) return true;
    if (enabled.empty()) continue;
    if (opt.reverse) std::reverse(enabled.begin(), enabled.end());

    const std::vector<char>* fire = &firable;
    if constexpr (is_lfca<A>) {
      if (opt.reduce && a.rule().is_interval()) {
        // firable set from here on; if it holds nothing new, the subtree
        // cannot add an unstable cell
        const int k1 = a.rule().lo(), k2 = a.rule().hi();
        for (int c : cells) local[c] = 0;
        bool grew = true, useful = false;
        while (grew) {
          grew = false;
          for (int v : cells) {
            if (local[v] || cur[v]) continue;
            int cnt = a.active_count(cur.data(), v);
            if (cnt > k2) continue;
            int extra = 0;
            for (int k = 0; k < topo.degree(); ++k) extra += local[topo.nbrs(v)[k]];
            if (cnt + extra >= k1) {
              local[v] = 1, grew = true;
              useful |= target >= 0 ? v == target : found[v] < 0;
            }
          }
        }
        if (!useful) continue;
        fire = &local;
      }
    }

    // A move is safe when no neighbor it touches can be pushed past the top
    // of the interval, even if every other firable neighbor fires too. The
    // rest of the search loses nothing by committing to it.
    int safe = -1;
    if constexpr (is_lfca<A>) {
      if (opt.reduce && a.rule().is_interval()) {
        const int k2 = a.rule().hi();
        for (int v : enabled) {
          bool ok = true;
          for (int k = 0; k < topo.degree() && ok; ++k) {
            int w = topo.nbrs(v)[k];
            if (cur[w] || !(*fire)[w]) continue;
            int cap = a.active_count(cur.data(), w);
            for (int j = 0; j < topo.degree(); ++j) {
              int z = topo.nbrs(w)[j];
              cap += (!cur[z] && (*fire)[z]);
            }
            ok = cap <= k2;
          }
          if (ok) {
            safe = v;
            break;
          }
        }
      }
    }
    auto push = [&](int c) -> bool {
      uint8_t old = cur[c];
      cur[c] = static_cast<uint8_t>(a.next(cur.data(), c));
      int64_t id = add(codec.encode(cur.data(), cells), node, c);
      cur[c] = old;
      if (id >= 0) stack.push_back(id);
      return explored < opt.budget;
    };
    if (safe >= 0) {
      if (!push(safe)) return false;
      continue;
    }
    for (auto it = enabled.rbegin(); it != enabled.rend(); ++it)
      if (!push(*it)) return false;
  }
  return true;
}

template <class A, class Codec>
ReachabilityReport explore_with(const A& a, const Configuration& x, const ExploreOptions& opt, Codec codec, int target,
                                const std::vector<char>& firable, const std::vector<std::vector<int>>& comps) {
  ReachabilityReport rep;
  Forest<Codec> forest;
  std::vector<int64_t> found(x.size(), -1);
  for (auto& comp : comps) {
    if (target >= 0 && !std::binary_search(comp.begin(), comp.end(), target)) continue;
    bool done = explore_subsystem(a, x, comp, firable, opt, codec, forest, rep.explored, found, target);
    if (!done) {
      rep.truncated = true;
      break;
    }
  }
  for (int c = 0; c < x.size(); ++c) {
    if (found[c] < 0) continue;
    rep.unstable.push_back(c);
    if (opt.witnesses) {
      auto p = forest.path_to(found[c]);
      p.push_back(c);
      rep.witness[c] = Schedule::of_sequence(p);
    }
  }
  return rep;
}

template <class A>
ReachabilityReport explore_impl(const A& a, const Configuration& x, const ExploreOptions& opt, int target) {
  if (opt.budget < 1) throw Error("precondition", "budget must be at least 1");
  if (x.spec != a.spec()) throw Error("invalid-spec", "configuration grid does not match the rule's grid");
  for (auto v : x.s)
    if (v >= a.num_states()) throw Error("parse", "state out of range");
  auto firable = firable_cells(a, x, opt.reduce);
  auto comps = firable_components(a, firable, opt.reduce && is_lfca<A>);
  size_t widest = 0;
  for (auto& c : comps) widest = std::max(widest, c.size());
  int bits = state_bits(a.num_states());
  if (widest * bits <= 128) return explore_with(a, x, opt, Codec128{bits}, target, firable, comps);
  return explore_with(a, x, opt, CodecString{bits}, target, firable, comps);
}

}  // namespace detail

template <class A>
ReachabilityReport explore(const A& a, const Configuration& x, const ExploreOptions& opt = {}) {
  return detail::explore_impl(a, x, opt, -1);
}

struct Decision {
  Verdict verdict = Verdict::Stable;
  std::optional<Schedule> witness;
  size_t explored = 0;
};

template <class A>
Decision decide_unstable(const A& a, const Configuration& x, int cell, const ExploreOptions& opt = {}) {
  if (cell < 0 || cell >= x.size()) throw Error("out-of-range", "cell index " + std::to_string(cell));
  if (a.is_top(x.s[cell]))
    throw Error("precondition", "cell " + format_cell(x.spec, cell) + " is already in a top state");
  auto rep = detail::explore_impl(a, x, opt, cell);
  Decision d;
  d.explored = rep.explored;
  if (rep.is_unstable(cell)) {
    d.verdict = Verdict::Unstable;
    auto it = rep.witness.find(cell);
    if (it != rep.witness.end()) d.witness = it->second;
  } else {
    d.verdict = rep.truncated ? Verdict::Indeterminate : Verdict::Stable;
  }
  return d;
}

// Enumerates every configuration reachable by single-cell moves, each once,
// starting with the initial one. After next() returns nullopt, truncated()
// tells whether the budget cut the enumeration short.
template <class A>
class ReachableEnumerator {
 public:
  ReachableEnumerator(const A& a, const Configuration& x, size_t budget = default_budget())
      : a_(a), base_(x), budget_(budget) {
    if (budget < 1) throw Error("precondition", "budget must be at least 1");
    seen_.insert(x.s);
    stack_.push_back(x.s);
  }

  std::optional<Configuration> next() {
    if (stack_.empty()) return std::nullopt;
    Configuration y(base_.spec);
    y.s = std::move(stack_.back());
    stack_.pop_back();
    std::vector<uint8_t> z = y.s;
    for (int c = y.size() - 1; c >= 0; --c) {
      int v = a_.next(y.s.data(), c);
      if (v == y.s[c]) continue;
      z[c] = static_cast<uint8_t>(v);
      if (!seen_.count(z)) {
        if (seen_.size() >= budget_) {
          truncated_ = true;
        } else {
          seen_.insert(z);
          stack_.push_back(z);
        }
      }
      z[c] = y.s[c];
    }
    return y;
  }
  bool truncated() const { return truncated_; }
  size_t discovered() const { return seen_.size(); }

 private:
  struct VecHash {
    size_t operator()(const std::vector<uint8_t>& v) const {
      return std::hash<std::string_view>()(std::string_view(reinterpret_cast<const char*>(v.data()), v.size()));
    }
  };
  const A& a_;
  Configuration base_;
  size_t budget_;
  std::unordered_set<std::vector<uint8_t>, VecHash> seen_;
  std::vector<std::vector<uint8_t>> stack_;
  bool truncated_ = false;
};

}  // namespace freeza
