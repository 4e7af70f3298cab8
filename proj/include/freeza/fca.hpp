#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "freeza/error.hpp"
#include "freeza/topology.hpp"

namespace freeza {

// Partial order on states 0..q-1, stored as a dense relation.
class StateOrder {
 public:
  StateOrder() : StateOrder(2, {{0, 1}}) {}

  // pairs (a, b) mean a <= b; closed reflexively and transitively, then
  // checked for antisymmetry.
  StateOrder(int q, const std::vector<std::pair<int, int>>& pairs) : q_(q), leq_(q * q, 0) {
    if (q < 1 || q > 16) throw Error("parse", "state count must be in [1,16]");
    for (int a = 0; a < q; ++a) leq_[a * q + a] = 1;
    for (auto [a, b] : pairs) {
      if (a < 0 || b < 0 || a >= q || b >= q) throw Error("parse", "order pair out of range");
      leq_[a * q + b] = 1;
    }
    for (int k = 0; k < q; ++k)
      for (int a = 0; a < q; ++a)
        for (int b = 0; b < q; ++b)
          if (leq_[a * q + k] && leq_[k * q + b]) leq_[a * q + b] = 1;
    for (int a = 0; a < q; ++a)
      for (int b = 0; b < q; ++b)
        if (a != b && leq_[a * q + b] && leq_[b * q + a])
          throw Error("parse", "order relation is not antisymmetric");
  }

  static StateOrder chain(int q) {
    std::vector<std::pair<int, int>> p;
    for (int a = 0; a + 1 < q; ++a) p.push_back({a, a + 1});
    return StateOrder(q, p);
  }

  int size() const { return q_; }
  bool leq(int a, int b) const { return leq_[a * q_ + b] != 0; }
  bool total() const {
    for (int a = 0; a < q_; ++a)
      for (int b = 0; b < q_; ++b)
        if (!leq(a, b) && !leq(b, a)) return false;
    return true;
  }
  // number of states strictly below a; a linear extension key
  int rank(int a) const {
    int r = 0;
    for (int b = 0; b < q_; ++b) r += (b != a && leq(b, a));
    return r;
  }
  bool is_top(int a) const {
    for (int b = 0; b < q_; ++b)
      if (b != a && leq(a, b)) return false;
    return true;
  }

 private:
  int q_;
  std::vector<uint8_t> leq_;
};

enum class RuleClass { Trivial, Infiltration, MonotoneLike, Hard };

inline const char* to_string(RuleClass c) {
  switch (c) {
    case RuleClass::Trivial: return "Trivial";
    case RuleClass::Infiltration: return "Infiltration";
    case RuleClass::MonotoneLike: return "MonotoneLike";
    default: return "Hard";
  }
}

// Life-like freezing rule: inactive cell activates iff its active-neighbor
// count lies in `allowed` (bit k set <=> k in I_F).
struct LfcaRule {
  GridKind kind = GridKind::Square;
  uint8_t allowed = 0;

  int degree() const { return kind == GridKind::Triangular ? 3 : 4; }
  bool contains(int k) const { return k >= 0 && k <= 4 && ((allowed >> k) & 1); }
  bool empty() const { return allowed == 0; }
  int lo() const {
    for (int k = 0; k <= 4; ++k)
      if (contains(k)) return k;
    return -1;
  }
  int hi() const {
    for (int k = 4; k >= 0; --k)
      if (contains(k)) return k;
    return -1;
  }
  static LfcaRule interval(GridKind kind, int k1, int k2) {
    LfcaRule r{kind, 0};
    for (int k = k1; k <= k2; ++k) r.allowed |= uint8_t(1u << k);
    return r;
  }
  bool is_interval() const {
    if (empty()) return true;
    for (int k = lo(); k <= hi(); ++k)
      if (!contains(k)) return false;
    return true;
  }
  // "S22" style; the empty rule prints as "S--"
  std::string name() const {
    std::string s(1, kind == GridKind::Triangular ? 'T' : 'S');
    if (empty()) return s + "--";
    if (!is_interval()) throw Error("internal", "non-interval LFCA rule has no name");
    return s + char('0' + lo()) + char('0' + hi());
  }
  bool operator==(const LfcaRule&) const = default;
};

inline LfcaRule parse_rule_name(const std::string& name) {
  if (name.size() != 3 || (name[0] != 'T' && name[0] != 'S') || name[1] < '0' || name[1] > '4' ||
      name[2] < '0' || name[2] > '4')
    throw Error("parse", "rule name must match [TS][0-4][0-4], got '" + name + "'");
  GridKind kind = name[0] == 'T' ? GridKind::Triangular : GridKind::Square;
  int k1 = name[1] - '0', k2 = name[2] - '0';
  if (k1 > k2) throw Error("parse", "rule '" + name + "' has k1 > k2");
  int deg = kind == GridKind::Triangular ? 3 : 4;
  if (k2 > deg) throw Error("parse", "rule '" + name + "' exceeds neighborhood size");
  return LfcaRule::interval(kind, k1, k2);
}

// All named rules (10 triangular, 15 square).
inline std::vector<LfcaRule> all_named_rules() {
  std::vector<LfcaRule> out;
  for (auto kind : {GridKind::Triangular, GridKind::Square}) {
    int deg = kind == GridKind::Triangular ? 3 : 4;
    for (int a = 0; a <= deg; ++a)
      for (int b = a; b <= deg; ++b) out.push_back(LfcaRule::interval(kind, a, b));
  }
  return out;
}

inline RuleClass classify(const LfcaRule& r) {
  static const char* trivial[] = {"T00", "S00", "T33", "S44", "T03", "S04", "T13", "S14"};
  if (!r.empty() && r.is_interval()) {
    std::string nm = r.name();
    for (auto t : trivial)
      if (nm == t) return RuleClass::Trivial;
    if (nm == "S22") return RuleClass::Hard;
  }
  if (r.contains(1)) return RuleClass::Infiltration;
  if (r.contains(r.degree() - 1)) return RuleClass::MonotoneLike;
  return RuleClass::Hard;
}

inline int lfca_apply(const LfcaRule& r, int self, int active_count) {
  return (self == 1 || r.contains(active_count)) ? 1 : 0;
}

inline int local_apply(const LfcaRule& r, int self, const std::vector<int>& nbr) {
  if (static_cast<int>(nbr.size()) != r.degree())
    throw Error("arity", "expected " + std::to_string(r.degree()) + " neighbor states, got " +
                             std::to_string(nbr.size()));
  int cnt = 0;
  for (int v : nbr) cnt += (v != 0);
  return lfca_apply(r, self, cnt);
}

inline LfcaRule star_rule(const LfcaRule& r) {
  LfcaRule s = r;
  s.allowed &= uint8_t(~(1u << r.degree()));
  return s;
}

// Exhaustive: more active neighbors never turns activation off.
inline bool is_monotone(const LfcaRule& r) {
  for (int a = 0; a <= r.degree(); ++a)
    for (int b = a; b <= r.degree(); ++b)
      for (int s = 0; s <= 1; ++s)
        for (int t = s; t <= 1; ++t)
          if (lfca_apply(r, s, a) > lfca_apply(r, t, b)) return false;
  return true;
}

// Radius-1 rule on a ring, keyed by (left, self, right).
class Rule1D {
 public:
  Rule1D() = default;
  Rule1D(StateOrder order, std::vector<uint8_t> table) : order_(std::move(order)), f_(std::move(table)) {
    int q = order_.size();
    if (static_cast<int>(f_.size()) != q * q * q) throw Error("parse", "1D table must have q^3 entries");
    for (auto v : f_)
      if (v >= q) throw Error("parse", "1D table entry out of range");
  }

  const StateOrder& order() const { return order_; }
  int num_states() const { return order_.size(); }
  int apply(int l, int s, int r) const {
    int q = num_states();
    return f_[(l * q + s) * q + r];
  }
  const std::vector<uint8_t>& table() const { return f_; }

  // 2-state rule from an 8-bit code: bit (4l + 2s + r) is f(l,s,r).
  static Rule1D from_code(unsigned code) {
    std::vector<uint8_t> t(8);
    for (int i = 0; i < 8; ++i) t[i] = (code >> i) & 1;
    return Rule1D(StateOrder::chain(2), t);
  }

  static Rule1D from_json(const nlohmann::json& j) {
    try {
      std::vector<nlohmann::json> labels = j.at("states").get<std::vector<nlohmann::json>>();
      int q = static_cast<int>(labels.size());
      auto lookup = [&](const nlohmann::json& v) {
        for (int i = 0; i < q; ++i)
          if (labels[i] == v) return i;
        throw Error("parse", "unknown state label " + v.dump());
      };
      std::vector<std::pair<int, int>> pairs;
      for (auto& p : j.at("order_pairs")) pairs.push_back({lookup(p.at(0)), lookup(p.at(1))});
      StateOrder ord(q, pairs);
      std::vector<int> t(q * q * q, -1);
      for (auto& e : j.at("entries")) {
        int l = lookup(e.at(0)), s = lookup(e.at(1)), r = lookup(e.at(2)), o = lookup(e.at(3));
        t[(l * q + s) * q + r] = o;
      }
      std::vector<uint8_t> out;
      for (int v : t) {
        if (v < 0) throw Error("parse", "1D table is not total");
        out.push_back(static_cast<uint8_t>(v));
      }
      return Rule1D(ord, out);
    } catch (const nlohmann::json::exception& e) {
      throw Error("parse", std::string("bad 1D rule JSON: ") + e.what());
    }
  }

  nlohmann::json to_json() const {
    int q = num_states();
    nlohmann::json j;
    j["states"] = nlohmann::json::array();
    for (int a = 0; a < q; ++a) j["states"].push_back(a);
    j["order_pairs"] = nlohmann::json::array();
    for (int a = 0; a < q; ++a)
      for (int b = 0; b < q; ++b)
        if (a != b && order_.leq(a, b)) j["order_pairs"].push_back({a, b});
    j["entries"] = nlohmann::json::array();
    for (int l = 0; l < q; ++l)
      for (int s = 0; s < q; ++s)
        for (int r = 0; r < q; ++r) j["entries"].push_back({l, s, r, apply(l, s, r)});
    return j;
  }

 private:
  StateOrder order_;
  std::vector<uint8_t> f_;
};

inline bool is_freezing(const Rule1D& r) {
  int q = r.num_states();
  for (int l = 0; l < q; ++l)
    for (int s = 0; s < q; ++s)
      for (int x = 0; x < q; ++x)
        if (!r.order().leq(s, r.apply(l, s, x))) return false;
  return true;
}

inline bool is_freezing(const LfcaRule&) { return true; }

}  // namespace freeza
