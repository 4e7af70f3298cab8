#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "freeza/circuits.hpp"
#include "freeza/engine.hpp"
#include "freeza/oracle.hpp"
#include "freeza/parallel.hpp"

namespace freeza {

// ---------------------------------------------------------------------------
// 10x10 patterns

enum class PatternKind { And, Or, Selector, Fixed };

inline const char* to_string(PatternKind k) {
  switch (k) {
    case PatternKind::And: return "and";
    case PatternKind::Or: return "or";
    case PatternKind::Selector: return "selector";
    default: return "fixed";
  }
}

inline PatternKind pattern_kind_from_string(const std::string& s) {
  if (s == "and") return PatternKind::And;
  if (s == "or") return PatternKind::Or;
  if (s == "selector") return PatternKind::Selector;
  if (s == "fixed") return PatternKind::Fixed;
  throw Error("parse", "unknown pattern kind '" + s + "'");
}

inline constexpr int kPatternSide = 10;

namespace pcell {
inline constexpr int id(int r, int c) { return r * kPatternSide + c; }
inline constexpr int n1 = id(0, 3), n2 = id(0, 4), w1 = id(3, 0), w2 = id(4, 0);
inline constexpr int s1 = id(9, 3), s2 = id(9, 4), e1 = id(3, 9), e2 = id(4, 9);
inline constexpr int v1 = id(4, 5), v2 = id(4, 6);
inline constexpr std::array<int, 4> inputs{n1, n2, w1, w2};
inline constexpr std::array<int, 4> outputs{s1, s2, e1, e2};
inline bool is_io(int i) {
  return std::find(inputs.begin(), inputs.end(), i) != inputs.end() ||
         std::find(outputs.begin(), outputs.end(), i) != outputs.end();
}
inline bool on_border(int i) {
  int r = i / kPatternSide, c = i % kPatternSide;
  return r == 0 || c == 0 || r == kPatternSide - 1 || c == kPatternSide - 1;
}
}  // namespace pcell

struct Pattern10 {
  PatternKind kind = PatternKind::Fixed;
  std::array<uint8_t, 100> bits{};

  uint8_t at(int r, int c) const { return bits[pcell::id(r, c)]; }
  uint8_t& at(int r, int c) { return bits[pcell::id(r, c)]; }
  bool operator==(const Pattern10&) const = default;

  Configuration configuration() const {
    Configuration x(GridSpec{GridKind::Square, kPatternSide});
    for (int i = 0; i < 100; ++i) x.s[i] = bits[i];
    return x;
  }
  // Active neighbors on the 10x10 torus.
  int count(int i) const {
    int r = i / 10, c = i % 10;
    return bits[pcell::id((r + 9) % 10, c)] + bits[pcell::id((r + 1) % 10, c)] + bits[pcell::id(r, (c + 9) % 10)] +
           bits[pcell::id(r, (c + 1) % 10)];
  }
  void validate() const {
    for (int i : pcell::inputs)
      if (bits[i]) throw Error("invalid-pattern", "input cell is active in the base pattern");
    for (int i : pcell::outputs)
      if (bits[i]) throw Error("invalid-pattern", "output cell is active in the base pattern");
  }
};

inline Pattern10 parse_pattern(PatternKind kind, const std::string& text) {
  Pattern10 p;
  p.kind = kind;
  std::istringstream in(text);
  std::string line;
  int r = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == ';') continue;  // header comments
    if (r >= 10 || line.size() != 10) throw Error("parse", "pattern must be 10 lines of 10 characters");
    for (int c = 0; c < 10; ++c) {
      if (line[c] != '.' && line[c] != '#') throw Error("parse", "pattern characters must be '.' or '#'");
      p.at(r, c) = line[c] == '#';
    }
    ++r;
  }
  if (r != 10) throw Error("parse", "pattern must be 10 lines of 10 characters");
  p.validate();
  return p;
}

inline std::string format_pattern(const Pattern10& p) {
  std::string out;
  for (int r = 0; r < 10; ++r) {
    for (int c = 0; c < 10; ++c) out += p.at(r, c) ? '#' : '.';
    out += '\n';
  }
  return out;
}

// Every inactive cell has an active-neighbor count other than 2, except the
// two selector cells, which must have exactly 2.
inline bool base_is_fixed_point(const Pattern10& p) {
  for (int i = 0; i < 100; ++i) {
    bool sel = p.kind == PatternKind::Selector && (i == pcell::v1 || i == pcell::v2);
    if (sel && (p.bits[i] || p.count(i) != 2)) return false;
    if (!sel && !p.bits[i] && p.count(i) == 2) return false;
  }
  return true;
}

inline LfcaAutomaton s22_automaton(int n) { return LfcaAutomaton(GridSpec{GridKind::Square, n}, parse_rule_name("S22")); }

// ---------------------------------------------------------------------------
// Exhaustive search over at most 128 cells. Cells outside the system keep
// their states; ext[i] counts the active ones next to system cell i.

namespace detail {

using u128 = unsigned __int128;

inline int popcount128(u128 v) {
  return __builtin_popcountll(static_cast<uint64_t>(v)) + __builtin_popcountll(static_cast<uint64_t>(v >> 64));
}
inline u128 bit128(int i) { return u128{1} << i; }

struct LocalSystem {
  int size = 0;
  std::vector<u128> nb;
  std::vector<uint8_t> ext;
  u128 frozen = 0;  // cells never updated (treated as killed)

  bool enabled(u128 key, int i) const {
    return !((key >> i) & 1) && !((frozen >> i) & 1) && popcount128(key & nb[i]) + ext[i] == 2;
  }
};

inline LocalSystem torus10() {
  LocalSystem s;
  s.size = 100;
  s.nb.assign(100, 0);
  s.ext.assign(100, 0);
  for (int r = 0; r < 10; ++r)
    for (int c = 0; c < 10; ++c) {
      u128 m = 0;
      m |= bit128(pcell::id((r + 9) % 10, c));
      m |= bit128(pcell::id((r + 1) % 10, c));
      m |= bit128(pcell::id(r, (c + 9) % 10));
      m |= bit128(pcell::id(r, (c + 1) % 10));
      s.nb[pcell::id(r, c)] = m;
    }
  return s;
}

struct U128Hash {
  size_t operator()(u128 k) const {
    uint64_t a = static_cast<uint64_t>(k), b = static_cast<uint64_t>(k >> 64);
    uint64_t h = a * 0x9E3779B97F4A7C15ull ^ (b + 0x632BE59BD9B4E019ull + (a << 6) + (a >> 2));
    h ^= h >> 31;
    h *= 0xBF58476D1CE4E5B9ull;
    return static_cast<size_t>(h ^ (h >> 29));
  }
};

struct SearchTree {
  std::vector<u128> keys;
  std::vector<int32_t> parent;
  std::vector<int16_t> move;
  size_t explored() const { return keys.size(); }
  bool truncated = false;

  std::vector<int> path_to(int64_t node) const {
    std::vector<int> p;
    for (int64_t v = node; v >= 0 && parent[v] >= 0; v = parent[v]) p.push_back(move[v]);
    std::reverse(p.begin(), p.end());
    return p;
  }
};

// Depth-first enumeration of every configuration reachable from `start`.
// visit(key) returning true stops the search at that node; its id is
// returned, otherwise -1.
template <class Visit>
int64_t enumerate(const LocalSystem& sys, u128 start, size_t budget, SearchTree& t, Visit&& visit) {
  std::unordered_map<u128, int32_t, U128Hash> index;
  t = SearchTree{};
  auto add = [&](u128 k, int32_t parent, int mv) -> int64_t {
    if (index.count(k)) return -1;
    int32_t id = static_cast<int32_t>(t.keys.size());
    t.keys.push_back(k);
    t.parent.push_back(parent);
    t.move.push_back(static_cast<int16_t>(mv));
    index.emplace(k, id);
    return id;
  };
  std::vector<int32_t> stack{static_cast<int32_t>(add(start, -1, -1))};
  std::vector<int> en;
  while (!stack.empty()) {
    int32_t node = stack.back();
    stack.pop_back();
    u128 k = t.keys[node];
    if (visit(k)) return node;
    en.clear();
    for (int i = 0; i < sys.size; ++i)
      if (sys.enabled(k, i)) en.push_back(i);
    for (auto it = en.rbegin(); it != en.rend(); ++it) {
      if (index.size() >= budget) {
        if (!index.count(k | bit128(*it))) t.truncated = true;
        continue;
      }
      int64_t id = add(k | bit128(*it), node, *it);
      if (id >= 0) stack.push_back(static_cast<int32_t>(id));
    }
  }
  return -1;
}

inline u128 pattern_key(const Pattern10& p) {
  u128 k = 0;
  for (int i = 0; i < 100; ++i)
    if (p.bits[i]) k |= bit128(i);
  return k;
}

inline Configuration key_configuration(u128 k) {
  Configuration x(GridSpec{GridKind::Square, kPatternSide});
  for (int i = 0; i < 100; ++i) x.s[i] = static_cast<uint8_t>((k >> i) & 1);
  return x;
}

inline u128 input_mask(int combo) {
  u128 m = 0;
  for (int b = 0; b < 4; ++b)
    if ((combo >> b) & 1) m |= bit128(pcell::inputs[b]);
  return m;
}

inline uint64_t fnv1a(const std::string& s) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hex64(uint64_t v) {
  static const char* d = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[i] = d[v & 15];
  return s;
}

}  // namespace detail

inline constexpr size_t kPatternBudget = 1'000'000;

using GateFn = std::function<bool(bool, bool)>;

inline GateFn gate_of(PatternKind k) {
  switch (k) {
    case PatternKind::And: return [](bool p, bool q) { return p && q; };
    case PatternKind::Or: return [](bool p, bool q) { return p || q; };
    case PatternKind::Fixed: return [](bool, bool) { return false; };
    default: throw Error("precondition", "selector patterns have no gate function");
  }
}

// Input combination bits: 1 n1, 2 n2, 4 w1, 8 w2.
struct ComboReport {
  int inputs = 0;
  bool expected = false;  // g(n1 or n2, w1 or w2)
  size_t explored = 0;
  bool truncated = false;
  bool clause_a = true;  // no output above g anywhere in the reachable set
  bool clause_b = true;  // all four outputs reach g
  bool exhaustive = false;
  std::optional<Configuration> counterexample;
  std::optional<Schedule> witness;
};

struct RobustReport {
  bool fixed_point = false;
  bool clause_c = false;  // no non-I/O cell moves without inputs
  std::vector<ComboReport> combos;

  bool inconclusive() const {
    for (auto& c : combos)
      if (c.truncated && !(c.expected && c.witness)) return true;
    return false;
  }
  bool clause_a() const {
    return std::all_of(combos.begin(), combos.end(), [](auto& c) { return c.clause_a; });
  }
  bool clause_b() const {
    return std::all_of(combos.begin(), combos.end(), [](auto& c) { return c.clause_b; });
  }
  bool passed() const { return fixed_point && clause_c && clause_a() && clause_b() && !inconclusive(); }
  size_t explored() const {
    size_t n = 0;
    for (auto& c : combos) n += c.explored;
    return n;
  }
};

// When g = 1 clause (a) holds trivially and clause (b) only needs one
// witness, so the search stops at the first configuration with all four
// outputs active. When g = 0 the whole reachable set is enumerated.
inline RobustReport verify_robust(const Pattern10& p, const GateFn& gate, size_t budget = kPatternBudget,
                                  int workers = 1) {
  using namespace detail;
  p.validate();
  RobustReport rep;
  rep.fixed_point = base_is_fixed_point(p);
  rep.combos.resize(16);
  const LocalSystem sys = torus10();
  const u128 base = pattern_key(p);
  u128 outs = 0;
  for (int o : pcell::outputs) outs |= bit128(o);
  u128 io = outs;
  for (int i : pcell::inputs) io |= bit128(i);
  std::vector<char> moved(16, 0);
  parallel_for(16, workers, [&](int64_t lo, int64_t hi) {
    for (int64_t combo = lo; combo < hi; ++combo) {
      ComboReport& cr = rep.combos[combo];
      cr.inputs = static_cast<int>(combo);
      bool pn = combo & 3, qw = combo & 12;
      cr.expected = gate(pn, qw);
      u128 start = base | input_mask(cr.inputs);
      SearchTree t;
      if (cr.expected) {
        int64_t hit = enumerate(sys, start, budget, t, [&](u128 k) { return (k & outs) == outs; });
        if (hit >= 0) cr.witness = Schedule::of_sequence(t.path_to(hit));
        cr.clause_b = hit >= 0;
        cr.exhaustive = hit < 0 && !t.truncated;
      } else {
        int64_t bad = enumerate(sys, start, budget, t, [&](u128 k) { return (k & outs) != 0; });
        if (bad >= 0) {
          cr.clause_a = false;
          cr.counterexample = key_configuration(t.keys[bad]);
          cr.witness = Schedule::of_sequence(t.path_to(bad));
        }
        cr.exhaustive = bad < 0 && !t.truncated;
        if (combo == 0) {
          u128 uni = 0;
          for (u128 k : t.keys) uni |= k ^ start;
          moved[0] = (uni & ~io) != 0;
        }
      }
      cr.explored = t.explored();
      cr.truncated = t.truncated;
    }
  });
  rep.clause_c = !moved[0] && rep.combos[0].exhaustive;
  return rep;
}

inline RobustReport verify_robust(const Pattern10& p, size_t budget = kPatternBudget, int workers = 1) {
  return verify_robust(p, gate_of(p.kind), budget, workers);
}

struct SelectorComboReport {
  int inputs = 0;
  size_t explored = 0;
  bool truncated = false;
  bool exclusive = true;
  bool reaches_south = false;
  bool reaches_east = false;
  std::optional<Configuration> counterexample;
  std::optional<Schedule> south_witness, east_witness, bad_witness;
};

struct SelectorReport {
  bool base_ok = false;  // v1, v2 have exactly 2 active neighbors, every other cell not 2
  std::vector<SelectorComboReport> combos;

  bool inconclusive() const {
    return std::any_of(combos.begin(), combos.end(), [](auto& c) { return c.truncated; });
  }
  bool exclusive() const {
    return std::all_of(combos.begin(), combos.end(), [](auto& c) { return c.exclusive; });
  }
  bool both_branches() const {
    return std::all_of(combos.begin(), combos.end(), [](auto& c) { return c.reaches_south && c.reaches_east; });
  }
  bool passed() const { return base_ok && exclusive() && both_branches() && !inconclusive(); }
  size_t explored() const {
    size_t n = 0;
    for (auto& c : combos) n += c.explored;
    return n;
  }
};

inline SelectorReport verify_selector(const Pattern10& p, size_t budget = kPatternBudget, int workers = 1) {
  using namespace detail;
  if (p.kind != PatternKind::Selector) throw Error("precondition", "verify_selector needs a selector pattern");
  p.validate();
  SelectorReport rep;
  rep.base_ok = base_is_fixed_point(p);
  rep.combos.resize(16);
  const LocalSystem sys = torus10();
  const u128 base = pattern_key(p);
  const u128 S = bit128(pcell::s1) | bit128(pcell::s2), E = bit128(pcell::e1) | bit128(pcell::e2);
  parallel_for(16, workers, [&](int64_t lo, int64_t hi) {
    for (int64_t combo = lo; combo < hi; ++combo) {
      auto& cr = rep.combos[combo];
      cr.inputs = static_cast<int>(combo);
      SearchTree t;
      int64_t south = -1, east = -1;
      int64_t bad = enumerate(sys, base | input_mask(cr.inputs), budget, t, [&](u128 k) { return (k & S) && (k & E); });
      for (size_t id = 0; id < t.keys.size(); ++id) {
        if (south < 0 && (t.keys[id] & S)) south = static_cast<int64_t>(id);
        if (east < 0 && (t.keys[id] & E)) east = static_cast<int64_t>(id);
      }
      cr.explored = t.explored();
      cr.truncated = t.truncated && bad < 0;
      if (bad >= 0) {
        cr.exclusive = false;
        cr.counterexample = key_configuration(t.keys[bad]);
        cr.bad_witness = Schedule::of_sequence(t.path_to(bad));
      }
      cr.reaches_south = south >= 0;
      cr.reaches_east = east >= 0;
      if (south >= 0) cr.south_witness = Schedule::of_sequence(t.path_to(south));
      if (east >= 0) cr.east_witness = Schedule::of_sequence(t.path_to(east));
    }
  });
  return rep;
}

// ---------------------------------------------------------------------------
// Tiles placed edge to edge see each other through the I/O pairs (s1 above
// n1, e1 left of w1, ...) and through facing border cells. Across every edge
// one of the two facing border cells must be inert (active, or 3+ active
// neighbors), so it never changes and the other one reads a constant. Port
// k is the partner of an I/O cell: bits 0-3 for n1 n2 w1 w2, 4-7 for
// s1 s2 e1 e2.

namespace port {
inline constexpr unsigned N = 0x3, W = 0xC, S = 0x30, E = 0xC0, Out = 0xF0, All = 0xFF;
inline constexpr unsigned n1 = 0x1, w1 = 0x4;
inline int index(int cell) {
  for (int k = 0; k < 4; ++k) {
    if (pcell::inputs[k] == cell) return k;
    if (pcell::outputs[k] == cell) return 4 + k;
  }
  return -1;
}
}  // namespace port

inline bool inert(const Pattern10& p, int i) { return p.bits[i] || p.count(i) >= 3; }

namespace detail {

inline LocalSystem port_system(const Pattern10& p, unsigned ports_on) {
  LocalSystem s;
  s.size = 100;
  s.nb.assign(100, 0);
  s.ext.assign(100, 0);
  const int dr[4] = {-1, 1, 0, 0}, dc[4] = {0, 0, -1, 1};
  for (int r = 0; r < 10; ++r)
    for (int c = 0; c < 10; ++c) {
      int i = pcell::id(r, c), k = port::index(i);
      for (int d = 0; d < 4; ++d) {
        int rr = r + dr[d], cc = c + dc[d];
        if (rr >= 0 && rr < 10 && cc >= 0 && cc < 10)
          s.nb[i] |= bit128(pcell::id(rr, cc));
        else if (k < 0)
          s.ext[i] += p.bits[pcell::id((rr + 10) % 10, (cc + 10) % 10)];
        else
          s.ext[i] += (ports_on >> k) & 1;
      }
    }
  return s;
}

inline u128 mask_of(std::initializer_list<int> cells) {
  u128 m = 0;
  for (int c : cells) m |= bit128(c);
  return m;
}

}  // namespace detail

// Cells that can ever fire when the ports in `ports_on` may switch on at any
// time and the `killed` cells never fire. A cell is included once it is not
// dead at the start and two of its neighbors can be active.
inline detail::u128 port_closure(const Pattern10& p, unsigned ports_on, detail::u128 killed = 0) {
  using namespace detail;
  LocalSystem sys = port_system(p, ports_on);
  u128 base = pattern_key(p), cl = 0;
  std::vector<char> elig(100);
  for (int i = 0; i < 100; ++i) elig[i] = !p.bits[i] && p.count(i) <= 2 && !((killed >> i) & 1);
  for (bool grew = true; grew;) {
    grew = false;
    for (int i = 0; i < 100; ++i) {
      if (!elig[i] || ((cl >> i) & 1)) continue;
      if (popcount128(sys.nb[i] & (base | cl)) + sys.ext[i] >= 2) {
        cl |= bit128(i);
        grew = true;
      }
    }
  }
  return cl;
}

struct PortCase {
  unsigned ports = 0;
  int branch = 0;  // selector: 1 south (v1 fired), 2 east (v2 fired)
  bool reached = false;
  size_t explored = 0;
  std::optional<Schedule> witness;
};

struct ComposeReport {
  bool io_counts = false;     // inputs have 1 active neighbor, outputs 0
  bool border_inert = false;  // facing border cells of two copies
  bool safety = false;        // no false output under any port behaviour
  std::vector<PortCase> cases;

  bool passed() const {
    return io_counts && border_inert && safety &&
           std::all_of(cases.begin(), cases.end(), [](auto& c) { return c.reached; });
  }
};

// Border cells facing each other across a vertical or horizontal edge.
inline std::vector<std::pair<int, int>> facing_border_pairs() {
  std::vector<std::pair<int, int>> out;
  for (int c = 0; c < 10; ++c)
    if (!pcell::is_io(pcell::id(9, c))) out.emplace_back(pcell::id(9, c), pcell::id(0, c));
  for (int r = 0; r < 10; ++r)
    if (!pcell::is_io(pcell::id(r, 9))) out.emplace_back(pcell::id(r, 9), pcell::id(r, 0));
  return out;
}

inline bool borders_compatible(const Pattern10& upper_or_left, const Pattern10& lower_or_right) {
  for (auto [a, b] : facing_border_pairs())
    if (!inert(upper_or_left, a) && !inert(lower_or_right, b)) return false;
  return true;
}

// Safety: with every output partner adversarial, outputs whose wire is false
// stay outside the closure. Witnesses: from one active partner per true
// input side, some schedule fires s1 and e1 (or one selector branch) while
// s2 and e2 stay inactive, so the next tile again sees a single partner.
inline ComposeReport verify_composable(const Pattern10& p, size_t budget = kPatternBudget) {
  using namespace detail;
  p.validate();
  ComposeReport rep;
  rep.io_counts = true;
  for (int i : pcell::inputs) rep.io_counts = rep.io_counts && p.count(i) == 1;
  for (int o : pcell::outputs) rep.io_counts = rep.io_counts && p.count(o) == 0;
  rep.border_inert = borders_compatible(p, p);
  const u128 S = mask_of({pcell::s1, pcell::s2}), E = mask_of({pcell::e1, pcell::e2}), outs = S | E;
  auto safe = [&](unsigned ports, u128 killed, u128 forbid) { return (port_closure(p, ports, killed) & forbid) == 0; };
  const u128 v1 = bit128(pcell::v1), v2 = bit128(pcell::v2);
  switch (p.kind) {
    case PatternKind::Or: rep.safety = safe(port::Out, 0, outs); break;
    case PatternKind::And: rep.safety = safe(port::N | port::Out, 0, outs) && safe(port::W | port::Out, 0, outs); break;
    case PatternKind::Fixed: rep.safety = safe(port::All, 0, outs); break;
    case PatternKind::Selector: rep.safety = safe(port::All, v2, E) && safe(port::All, v1, S); break;
  }
  auto search = [&](unsigned ports, int branch, u128 start, u128 on, u128 off) {
    PortCase pc;
    pc.ports = ports;
    pc.branch = branch;
    SearchTree t;
    int64_t hit = enumerate(port_system(p, ports), start, budget, t, [&](u128 k) { return (k & on) == on && !(k & off); });
    pc.explored = t.explored();
    pc.reached = hit >= 0;
    if (hit >= 0) pc.witness = Schedule::of_sequence(t.path_to(hit));
    rep.cases.push_back(std::move(pc));
  };
  const u128 base = pattern_key(p);
  const u128 on = mask_of({pcell::s1, pcell::e1}), off = mask_of({pcell::s2, pcell::e2});
  switch (p.kind) {
    case PatternKind::Or:
      for (unsigned ports : {port::n1, port::w1, port::n1 | port::w1}) search(ports, 0, base, on, off);
      break;
    case PatternKind::And: search(port::n1 | port::w1, 0, base, on, off); break;
    case PatternKind::Selector:
      // the selector cell fires before anything else
      for (unsigned ports : {0u, port::n1, port::w1, port::n1 | port::w1}) {
        search(ports, 1, base | v1, bit128(pcell::s1), bit128(pcell::s2));
        search(ports, 2, base | v2, bit128(pcell::e1), bit128(pcell::e2));
      }
      break;
    case PatternKind::Fixed: break;
  }
  return rep;
}

// Canonical text of a verification outcome; its hash goes into the sidecar.
inline std::string certificate_text(const Pattern10& p, size_t budget = kPatternBudget, bool* passed = nullptr) {
  std::ostringstream out;
  out << to_string(p.kind) << "\n" << format_pattern(p);
  bool ok;
  if (p.kind == PatternKind::Selector) {
    auto r = verify_selector(p, budget);
    ok = r.passed();
    out << "base " << r.base_ok << "\n";
    for (auto& c : r.combos)
      out << c.inputs << " " << c.explored << " " << c.exclusive << c.reaches_south << c.reaches_east << c.truncated
          << "\n";
  } else {
    auto r = verify_robust(p, budget);
    ok = r.passed();
    out << "fixed " << r.fixed_point << " c " << r.clause_c << "\n";
    for (auto& c : r.combos)
      out << c.inputs << " " << c.expected << " " << c.explored << " " << c.clause_a << c.clause_b << c.truncated
          << "\n";
  }
  auto cr = verify_composable(p, budget);
  ok = ok && cr.passed();
  out << "ports " << cr.io_counts << cr.border_inert << cr.safety << "\n";
  for (auto& c : cr.cases) out << c.ports << " " << c.branch << " " << c.reached << " " << c.explored << "\n";
  if (passed) *passed = ok;
  return out.str();
}

inline std::string certificate_hash(const Pattern10& p, size_t budget = kPatternBudget, bool* passed = nullptr) {
  return detail::hex64(detail::fnv1a(certificate_text(p, budget, passed)));
}

// ---------------------------------------------------------------------------
// Library

struct PatternRecord {
  Pattern10 pattern;
  bool verified = false;
  std::string certificate_hash;
};

struct PatternLibrary {
  std::map<PatternKind, PatternRecord> entries;

  bool has(PatternKind k) const { return entries.count(k) > 0; }
  // Refuses missing or unverified patterns.
  const Pattern10& get(PatternKind k) const {
    auto it = entries.find(k);
    if (it == entries.end()) throw Error("refused", std::string("no ") + to_string(k) + " pattern in the library");
    if (!it->second.verified) throw Error("refused", std::string("the ") + to_string(k) + " pattern is not verified");
    return it->second.pattern;
  }
  // Tiles only line up when every pattern has the same border outside the
  // I/O cells.
  bool shared_border() const {
    const Pattern10* ref = nullptr;
    for (auto& [k, rec] : entries) {
      if (!ref) {
        ref = &rec.pattern;
        continue;
      }
      for (int i = 0; i < 100; ++i)
        if (pcell::on_border(i) && rec.pattern.bits[i] != ref->bits[i]) return false;
    }
    return true;
  }
  // Every pair of kinds may meet across a horizontal or vertical edge.
  bool borders_inert() const {
    for (auto& [a, ra] : entries)
      for (auto& [b, rb] : entries)
        if (!borders_compatible(ra.pattern, rb.pattern)) return false;
    return true;
  }
};

inline std::string default_pattern_dir() {
  if (const char* s = std::getenv("FREEZA_PATTERNS")) return s;
#ifdef FREEZA_DATA_DIR
  return std::string(FREEZA_DATA_DIR) + "/patterns";
#else
  return "data/patterns";
#endif
}

inline PatternLibrary load_library(const std::string& dir = default_pattern_dir()) {
  namespace fs = std::filesystem;
  PatternLibrary lib;
  for (PatternKind k : {PatternKind::And, PatternKind::Or, PatternKind::Selector, PatternKind::Fixed}) {
    fs::path pat = fs::path(dir) / (std::string(to_string(k)) + ".pat");
    fs::path side = fs::path(dir) / (std::string(to_string(k)) + ".json");
    if (!fs::exists(pat)) continue;
    std::ifstream in(pat);
    std::stringstream ss;
    ss << in.rdbuf();
    PatternRecord rec;
    rec.pattern = parse_pattern(k, ss.str());
    if (fs::exists(side)) {
      std::ifstream js(side);
      try {
        auto j = nlohmann::json::parse(js);
        if (pattern_kind_from_string(j.at("kind").get<std::string>()) != k)
          throw Error("parse", "sidecar kind does not match " + pat.string());
        rec.verified = j.at("verified").get<bool>();
        rec.certificate_hash = j.at("certificate_hash").get<std::string>();
      } catch (const nlohmann::json::exception& e) {
        throw Error("parse", "bad sidecar " + side.string() + ": " + e.what());
      }
    }
    lib.entries[k] = rec;
  }
  if (!lib.shared_border()) throw Error("refused", "library patterns do not share one border");
  if (!lib.borders_inert()) throw Error("refused", "library patterns interact across tile borders");
  return lib;
}

// ---------------------------------------------------------------------------
// Compilation of a circuit into an S22 instance

struct S22Instance {
  Configuration config;
  int decision = -1;
  int block_side = 0;
  std::pair<int, int> target{0, 0};
};

inline constexpr size_t kMaxInstanceCells = size_t{1} << 26;

inline PatternKind pattern_for(BlockKind k) {
  switch (k) {
    case BlockKind::Fixed0: return PatternKind::Fixed;
    case BlockKind::And: return PatternKind::And;
    case BlockKind::Or: return PatternKind::Or;
    case BlockKind::Selector: return PatternKind::Selector;
    default: throw Error("refused", std::string("block kind '") + block_symbol(k) + "' has no S22 pattern");
  }
}

// Block (i, j) occupies cells [10i, 10i+10) x [10j, 10j+10); output cells of
// one tile sit next to the input cells of the following tile. The grid is a
// torus, so the last row feeds row 0 and the last column feeds column 0.
// That is harmless when either side of the seam is all Fixed0 (Fixed tiles
// neither emit nor care); otherwise a Fixed0 row and column are appended.
template <class Circuit>
bool seam_inert(const Circuit& c) {
  int n = c.side();
  auto all_fixed = [&](auto at) {
    for (int k = 0; k < n; ++k)
      if (at(k) != BlockKind::Fixed0) return false;
    return true;
  };
  bool rows = all_fixed([&](int k) { return c.at(0, k); }) || all_fixed([&](int k) { return c.at(n - 1, k); });
  bool cols = all_fixed([&](int k) { return c.at(k, 0); }) || all_fixed([&](int k) { return c.at(k, n - 1); });
  return rows && cols;
}

template <class Circuit>
S22Instance compile_configuration(const Circuit& c, int bi, int bj, const PatternLibrary& lib,
                                  size_t max_cells = kMaxInstanceCells) {
  int n = c.side();
  if (bi < 0 || bj < 0 || bi >= n || bj >= n) throw Error("precondition", "target block out of range");
  int m = seam_inert(c) ? n : n + 1;
  size_t side = static_cast<size_t>(m) * kPatternSide;
  if (side * side > max_cells)
    throw Error("refused", "compile: " + std::to_string(side) + "x" + std::to_string(side) + " grid exceeds the cell budget");
  std::array<const Pattern10*, 4> pats{};
  auto get = [&](PatternKind k) -> const Pattern10& {
    auto& slot = pats[static_cast<int>(k)];
    if (!slot) slot = &lib.get(k);
    return *slot;
  };
  S22Instance inst;
  inst.block_side = m;
  inst.target = {bi, bj};
  inst.config = Configuration(GridSpec{GridKind::Square, static_cast<int>(side)});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      const Pattern10& p = get(i < n && j < n ? pattern_for(c.at(i, j)) : PatternKind::Fixed);
      for (int r = 0; r < 10; ++r) {
        uint8_t* row = inst.config.s.data() + (static_cast<size_t>(10 * i + r) * side + 10 * j);
        for (int q = 0; q < 10; ++q) row[q] = p.at(r, q);
      }
    }
  inst.decision = static_cast<int>((static_cast<size_t>(10 * bi + 9) * side) + 10 * bj + 3);
  return inst;
}

inline int tile_cell(const S22Instance& inst, int bi, int bj, int local) {
  int side = inst.config.spec.n;
  return (10 * bi + local / 10) * side + 10 * bj + local % 10;
}

// ---------------------------------------------------------------------------
// Stage-wise witness: fire each selector cell first, then walk the blocks in
// row-major order and search inside every block that must output a true
// signal, reading the rest of the grid as it stands. A true side ends with
// exactly its first output cell active (s1 or e1).

struct StageWitness {
  Schedule schedule;
  size_t selector_steps = 0;
  size_t tiles_searched = 0;
  size_t explored = 0;
  bool complete = false;
  std::string failure;
};

namespace detail {

struct TileSearch {
  const Configuration& x;
  int side;
  std::unordered_map<std::string, std::optional<std::vector<int>>> cache;
  size_t explored = 0;

  explicit TileSearch(const Configuration& c) : x(c), side(c.spec.n) {}

  int global(int bi, int bj, int local) const { return (10 * bi + local / 10) * side + 10 * bj + local % 10; }

  // Searches moves inside block (bi, bj) until the cells in `on` are active
  // and those in `off` are not.
  std::optional<std::vector<int>> run(const std::vector<uint8_t>& cur, int bi, int bj, u128 on, u128 off,
                                      size_t budget) {
    LocalSystem sys;
    sys.size = 100;
    sys.nb.assign(100, 0);
    sys.ext.assign(100, 0);
    u128 start = 0;
    std::string key(100 + 100 + 32, '\0');
    for (int l = 0; l < 100; ++l) {
      int r = l / 10, c = l % 10;
      if (cur[global(bi, bj, l)]) start |= bit128(l);
      const int dr[4] = {-1, 1, 0, 0}, dc[4] = {0, 0, -1, 1};
      for (int k = 0; k < 4; ++k) {
        int rr = r + dr[k], cc = c + dc[k];
        if (rr >= 0 && rr < 10 && cc >= 0 && cc < 10) {
          sys.nb[l] |= bit128(rr * 10 + cc);
        } else {
          int gr = ((10 * bi + rr) % side + side) % side, gc = ((10 * bj + cc) % side + side) % side;
          sys.ext[l] += cur[static_cast<size_t>(gr) * side + gc];
        }
      }
      key[l] = static_cast<char>((start >> l) & 1);
      key[100 + l] = static_cast<char>(sys.ext[l]);
    }
    for (int b = 0; b < 16; ++b) {
      key[200 + b] = static_cast<char>(on >> (8 * b));
      key[216 + b] = static_cast<char>(off >> (8 * b));
    }
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    SearchTree t;
    int64_t hit = enumerate(sys, start, budget, t, [&](u128 k) { return (k & on) == on && !(k & off); });
    explored += t.explored();
    std::optional<std::vector<int>> res;
    if (hit >= 0) res = t.path_to(hit);
    cache.emplace(std::move(key), res);
    return res;
  }
};

}  // namespace detail

// `u` is the circuit's selector assignment (row-major, 1 = east).
template <class Circuit>
StageWitness assemble_witness(const Circuit& c, const S22Instance& inst, const std::vector<uint8_t>& u,
                              size_t tile_budget = 200'000) {
  using namespace detail;
  StageWitness w;
  GridCircuit dense = [&] {
    if constexpr (std::is_same_v<Circuit, GridCircuit>)
      return c;
    else
      return c.to_grid();
  }();
  auto vals = evaluate(dense, u);
  auto sel = dense.selectors();
  int n = dense.side();
  std::vector<uint8_t> cur = inst.config.s;
  std::vector<int> seq;
  std::vector<char> east_of(static_cast<size_t>(n) * n, 0);
  for (size_t k = 0; k < sel.size(); ++k) {
    auto [i, j] = sel[k];
    int cell = tile_cell(inst, i, j, u[k] ? pcell::v2 : pcell::v1);
    cur[cell] = 1;
    seq.push_back(cell);
    east_of[static_cast<size_t>(i) * n + j] = u[k];
  }
  w.selector_steps = seq.size();
  const u128 s1 = bit128(pcell::s1), s2 = bit128(pcell::s2), e1 = bit128(pcell::e1), e2 = bit128(pcell::e2);
  TileSearch ts(inst.config);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      BlockKind k = dense.at(i, j);
      const BlockOut& v = vals[static_cast<size_t>(i) * n + j];
      u128 on = 0, off = 0;
      if (k == BlockKind::Selector) {
        bool east = east_of[static_cast<size_t>(i) * n + j];
        on = east ? e1 : s1;
        off = east ? e2 : s2;
      } else if (k == BlockKind::And || k == BlockKind::Or) {
        if (v.south) on |= s1, off |= s2;
        if (v.east) on |= e1, off |= e2;
      }
      bool target = std::make_pair(i, j) == inst.target;
      if (target) {
        if (!v.south) {
          w.failure = "target block carries no true south signal under this assignment";
          w.schedule = Schedule::of_sequence(seq);
          return w;
        }
        on |= s1;
      }
      if (!on) continue;
      ++w.tiles_searched;
      auto moves = ts.run(cur, i, j, on, off, tile_budget);
      if (!moves) {
        w.failure = "no local schedule for block (" + std::to_string(i) + "," + std::to_string(j) + ")";
        w.schedule = Schedule::of_sequence(seq);
        w.explored = ts.explored;
        return w;
      }
      for (int l : *moves) {
        int g = ts.global(i, j, l);
        cur[g] = 1;
        seq.push_back(g);
      }
    }
  w.schedule = Schedule::of_sequence(seq);
  w.explored = ts.explored;
  w.complete = true;
  return w;
}

// Replays a schedule with the engine; true if the decision cell changes.
inline bool replay_iterates(const S22Instance& inst, const Schedule& s) {
  auto a = s22_automaton(inst.config.spec.n);
  auto tr = run(a, inst.config, s);
  for (auto& r : tr.records)
    for (int ch : r.changed)
      if (ch == inst.decision) return true;
  return false;
}

// ---------------------------------------------------------------------------
// CNF to S22

struct Provenance {
  std::vector<int> clause_gate;                     // per clause
  std::vector<std::pair<int, int>> gate_block;      // per gate id (index 0 unused)
  int source_side = 0;
  int delta = 0;                                    // blocks per meta-block side
  int restricted_side = 0;
  std::vector<std::pair<int, int>> gadget_tile;     // per source block, 8x8 tile holding its gadget
  std::pair<int, int> target_source{0, 0};
  std::pair<int, int> target_block{0, 0};
  std::vector<std::pair<int, int>> variable_selectors;  // restricted selector block per input gate
  std::vector<int> variable_of_selector;

  // Source block that owns a restricted block.
  std::pair<int, int> source_of(int r, int c) const { return {r / delta, c / delta}; }
  // Cell range of a restricted block's pattern tile.
  std::pair<int, int> tile_origin(int r, int c) const { return {10 * r, 10 * c}; }
};

struct Reduction {
  Dag dag;
  Embedding embedding;
  RestrictedCircuit restricted;
  S22Instance instance;
  Provenance provenance;
};

inline Reduction reduce_sat(const CnfFormula& f, const PatternLibrary& lib, size_t max_cells = kMaxInstanceCells) {
  Reduction red;
  auto stage = [](const char* name, auto&& fn) {
    try {
      return fn();
    } catch (const Error& e) {
      throw Error(e.code(), std::string(name) + ": " + e.what());
    }
  };
  red.dag = stage("normalize", [&] { return normalize_circuit(f); });
  red.embedding = stage("embed", [&] { return embed(red.dag); });
  const GridCircuit& src = red.embedding.circuit;
  {
    size_t side = static_cast<size_t>(src.side()) * 8 * (src.side() + 2) * kPatternSide;
    if (side * side > max_cells)
      throw Error("refused", "restrict: " + std::to_string(side) + "x" + std::to_string(side) +
                                 " S22 grid exceeds the cell budget");
  }
  red.restricted = stage("restrict", [&] { return restrict_circuit(src); });
  auto& pv = red.provenance;
  pv.clause_gate = red.dag.clause_gate;
  pv.gate_block.resize(red.dag.size() + 1);
  for (int g = 1; g <= red.dag.size(); ++g) pv.gate_block[g] = red.embedding.block_of(g);
  pv.source_side = src.side();
  pv.delta = red.restricted.delta;
  pv.restricted_side = red.restricted.grid.side();
  pv.gadget_tile = red.restricted.gadget_tile;
  pv.target_source = red.embedding.block_of(red.dag.output);
  pv.target_block = red.restricted.south_output(pv.target_source.first, pv.target_source.second);
  for (auto [I, J] : src.selectors()) {
    auto [ti, tj] = red.restricted.gadget_tile[static_cast<size_t>(I) * src.side() + J];
    pv.variable_selectors.emplace_back(8 * ti + 4, 8 * tj + 4);
  }
  for (int g = 1; g <= red.dag.size(); ++g)
    if (red.dag.gate(g).kind == GateKind::Input) pv.variable_of_selector.push_back(red.dag.gate(g).var);
  red.instance = stage("compile", [&] {
    return compile_configuration(red.restricted.grid, pv.target_block.first, pv.target_block.second, lib, max_cells);
  });
  return red;
}

// Source selector assignment (row-major input gates) from a CNF assignment,
// lifted to the restricted circuit.
inline std::vector<uint8_t> lifted_assignment(const Reduction& red, const std::vector<uint8_t>& vars) {
  std::vector<uint8_t> u;
  for (int v : red.provenance.variable_of_selector) u.push_back(vars.at(v - 1));
  return lift_assignment(red.embedding.circuit, red.restricted, u);
}

// ---------------------------------------------------------------------------
// Decision without the oracle. With a verified library an active output cell
// always carries a true wire under the assignment "a selector goes east iff
// its v2 fired", so the target's s1 can change only when the circuit wire is
// satisfiable. SAT gives a stage-wise witness, UNSAT a stability proof.

struct CompositionalDecision {
  Verdict verdict = Verdict::Indeterminate;
  std::optional<std::vector<uint8_t>> assignment;  // per selector, 1 = east
  StageWitness witness;
  bool replayed = false;
  std::string reason;
};

template <class Circuit>
CompositionalDecision decide_compositional(const Circuit& c, const S22Instance& inst, const PatternLibrary& lib,
                                           size_t tile_budget = 200'000, bool replay = true) {
  CompositionalDecision d;
  for (PatternKind k : {PatternKind::And, PatternKind::Or, PatternKind::Selector, PatternKind::Fixed}) lib.get(k);
  if (!lib.shared_border() || !lib.borders_inert()) throw Error("refused", "library is not composable");
  auto cc = compile(c);
  d.assignment = netlist_sat(cc.net, cc.south(inst.target.first, inst.target.second));
  if (!d.assignment) {
    d.verdict = Verdict::Stable;
    d.reason = "target wire is unsatisfiable";
    return d;
  }
  d.witness = assemble_witness(c, inst, *d.assignment, tile_budget);
  if (!d.witness.complete) {
    d.reason = d.witness.failure;
    return d;
  }
  if (replay) {
    d.replayed = replay_iterates(inst, d.witness.schedule);
    if (!d.replayed) {
      d.reason = "witness did not change the decision cell on replay";
      return d;
    }
  }
  d.verdict = Verdict::Unstable;
  d.reason = "stage-wise witness";
  return d;
}

// ---------------------------------------------------------------------------
// Candidate search: min-conflict local search over bit patterns that meet the
// cheap necessary conditions. Candidates still need full verification.

struct PatternConstraints {
  std::optional<Pattern10> border;  // copy border cells from this pattern
  uint64_t seed = 1;
  int restarts = 20;
  int steps = 20'000;
  int max_candidates = 1;
};

struct SearchStats {
  int restarts = 0;
  long long steps = 0;
  int candidates = 0;
};

inline int pattern_violations(const Pattern10& p) {
  int bad = 0;
  for (int i = 0; i < 100; ++i) {
    bool io = pcell::is_io(i);
    if (io && p.bits[i]) ++bad;
    if (p.bits[i]) continue;
    int c = p.count(i);
    if (std::find(pcell::inputs.begin(), pcell::inputs.end(), i) != pcell::inputs.end()) {
      bad += c != 1;
    } else if (std::find(pcell::outputs.begin(), pcell::outputs.end(), i) != pcell::outputs.end()) {
      bad += c != 0;
    } else if (p.kind == PatternKind::Selector && (i == pcell::v1 || i == pcell::v2)) {
      bad += c != 2;
    } else {
      bad += c == 2;
    }
  }
  if (p.kind == PatternKind::Selector) bad += p.bits[pcell::v1] + p.bits[pcell::v2];
  if (p.kind == PatternKind::And)  // the central 2x2 starts with all neighbors inactive
    for (int i : {pcell::id(3, 3), pcell::id(3, 4), pcell::id(4, 3), pcell::id(4, 4)}) bad += p.bits[i] + p.count(i);
  return bad;
}

inline std::vector<Pattern10> search_pattern(PatternKind kind, const PatternConstraints& cons, SearchStats* stats = nullptr) {
  std::vector<Pattern10> out;
  SearchStats st;
  if (kind == PatternKind::Fixed && !cons.border) {
    Pattern10 p;
    p.kind = kind;
    out.push_back(p);  // all inactive: every count is 0
    st.candidates = 1;
    if (stats) *stats = st;
    return out;
  }
  Rng rng(cons.seed);
  std::vector<int> free_cells;
  for (int i = 0; i < 100; ++i)
    if (!pcell::is_io(i) && !(cons.border && pcell::on_border(i))) free_cells.push_back(i);
  for (int rs = 0; rs < cons.restarts && static_cast<int>(out.size()) < cons.max_candidates; ++rs) {
    ++st.restarts;
    Pattern10 p;
    p.kind = kind;
    if (cons.border)
      for (int i = 0; i < 100; ++i)
        if (pcell::on_border(i) && !pcell::is_io(i)) p.bits[i] = cons.border->bits[i];
    for (int i : free_cells) p.bits[i] = coin(rng, 0.4);
    int cur = pattern_violations(p);
    for (int s = 0; s < cons.steps && cur > 0; ++s) {
      ++st.steps;
      int i = free_cells[uniform_below(rng, free_cells.size())];
      p.bits[i] ^= 1;
      int nv = pattern_violations(p);
      if (nv <= cur || coin(rng, 0.02))
        cur = nv;
      else
        p.bits[i] ^= 1;
    }
    if (cur == 0 && std::find(out.begin(), out.end(), p) == out.end()) out.push_back(p);
  }
  st.candidates = static_cast<int>(out.size());
  if (stats) *stats = st;
  return out;
}

}  // namespace freeza
