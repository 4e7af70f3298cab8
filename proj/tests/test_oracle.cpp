#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "freeza/oracle.hpp"

using namespace freeza;

namespace {

bool witness_iterates(const LfcaAutomaton& a, const Configuration& x, const Schedule& w, int cell) {
  auto t = run(a, x, w);
  for (auto& r : t.records)
    for (int c : r.changed)
      if (c == cell) return true;
  return false;
}

ExploreOptions plain() {
  ExploreOptions o;
  o.reduce = false;
  return o;
}

}  // namespace

TEST_CASE("oracle small cases") {
  LfcaAutomaton s22(parse_spec("sq:5"), parse_rule_name("S22"));
  Configuration x(s22.spec());
  x.at({0, 0}) = 1;
  x.at({1, 1}) = 1;
  auto rep = explore(s22, x);
  std::vector<int> want{x.spec.index({0, 1}), x.spec.index({1, 0})};
  CHECK(rep.unstable == want);
  CHECK_FALSE(rep.truncated);
  CHECK(explore(s22, x, plain()).unstable == want);

  LfcaAutomaton t00(parse_spec("tri:3"), parse_rule_name("T00"));
  Configuration z(t00.spec());
  CHECK(explore(t00, z).unstable.size() == 18);

  LfcaAutomaton s34(parse_spec("sq:5"), parse_rule_name("S34"));
  Configuration c(s34.spec());
  c.at({1, 2}) = c.at({3, 2}) = c.at({2, 1}) = 1;
  auto d = decide_unstable(s34, c, c.spec.index({2, 2}));
  CHECK(d.verdict == Verdict::Unstable);
  REQUIRE(d.witness);
  CHECK(d.witness->steps.size() == 1);
  CHECK_THROWS_AS(decide_unstable(s34, c, c.spec.index({1, 2})), Error);
}

TEST_CASE("truncation is reported, never a silent answer") {
  LfcaAutomaton s22(parse_spec("sq:6"), parse_rule_name("S22"));
  Configuration y(s22.spec());
  for (int c = 0; c < 6; ++c) y.at({0, c}) = 1;
  y.at({2, 0}) = 1;
  y.at({2, 2}) = 1;
  y.at({4, 4}) = 1;
  ExploreOptions o = plain();
  o.budget = 3;
  auto rep = explore(s22, y, o);
  CHECK(rep.truncated);
  CHECK(rep.explored <= 3);
  o.budget = 1;
  auto d = decide_unstable(s22, y, y.spec.index({5, 5}), o);
  CHECK(d.verdict == Verdict::Indeterminate);
}

TEST_CASE("pruned search equals plain search") {
  Rng rng(17);
  for (auto& r : all_named_rules()) {
    for (int n : {3, 4, 5}) {
      GridSpec g{r.kind, n};
      if (g.size() > 25) continue;
      LfcaAutomaton a(g, r);
      for (int k = 0; k < 25; ++k) {
        double p = 0.1 + 0.1 * (k % 5);
        auto x = random_configuration(g, 2, p, rng);
        auto fast = explore(a, x);
        auto slow = explore(a, x, plain());
        REQUIRE_FALSE(slow.truncated);
        CHECK(fast.unstable == slow.unstable);
        for (auto& [c, w] : fast.witness) CHECK(witness_iterates(a, x, w, c));
      }
    }
  }
}

TEST_CASE("unstable set does not depend on expansion order") {
  Rng rng(23);
  for (auto name : {"S22", "S12", "T11", "S23"}) {
    auto r = parse_rule_name(name);
    LfcaAutomaton a(GridSpec{r.kind, 4}, r);
    for (int k = 0; k < 20; ++k) {
      auto x = random_configuration(a.spec(), 2, 0.3, rng);
      ExploreOptions rev = plain();
      rev.reverse = true;
      CHECK(explore(a, x, plain()).unstable == explore(a, x, rev).unstable);
    }
  }
}

TEST_CASE("S22 explore agrees with per-cell decisions") {
  Rng rng(31);
  LfcaAutomaton a(parse_spec("sq:6"), parse_rule_name("S22"));
  for (int k = 0; k < 20; ++k) {
    Configuration x(a.spec());
    std::vector<int> idx(36);
    for (int i = 0; i < 36; ++i) idx[i] = i;
    shuffle_portable(idx, rng);
    for (int i = 0; i < 8; ++i) x.s[idx[i]] = 1;
    auto rep = explore(a, x);
    for (int c = 0; c < 36; ++c) {
      if (x.s[c]) continue;
      auto d = decide_unstable(a, x, c);
      REQUIRE(d.verdict != Verdict::Indeterminate);
      CHECK((d.verdict == Verdict::Unstable) == rep.is_unstable(c));
      if (d.witness) CHECK(witness_iterates(a, x, *d.witness, c));
    }
  }
}

TEST_CASE("monotone rules: unstable cells are the synchronous fixed point") {
  Rng rng(41);
  for (auto& r : all_named_rules()) {
    if (!is_monotone(r)) continue;
    LfcaAutomaton a(GridSpec{r.kind, 4}, r);
    for (int k = 0; k < 100; ++k) {
      auto x = random_configuration(a.spec(), 2, 0.35, rng);
      auto fp = synchronous_fixed_point(a, x);
      std::vector<int> changed;
      for (int c = 0; c < x.size(); ++c)
        if (fp.s[c] != x.s[c]) changed.push_back(c);
      CHECK(explore(a, x).unstable == changed);
    }
  }
}

TEST_CASE("reachable enumeration") {
  LfcaAutomaton s22(parse_spec("sq:4"), parse_rule_name("S22"));
  Configuration fixed(s22.spec());
  fixed.at({0, 0}) = 1;
  ReachableEnumerator e(s22, fixed);
  int count = 0;
  while (auto y = e.next()) ++count;
  CHECK(count == 1);
  CHECK_FALSE(e.truncated());

  // two actives with two common neighbors
  Configuration x(s22.spec());
  x.at({0, 0}) = 1;
  x.at({1, 1}) = 1;
  ReachableEnumerator f(s22, x);
  std::set<std::vector<uint8_t>> seen;
  bool first = true;
  while (auto y = f.next()) {
    if (first) CHECK(*y == x);
    first = false;
    CHECK(seen.insert(y->s).second);
    for (int c = 0; c < x.size(); ++c) CHECK(y->s[c] >= x.s[c]);
  }
  CHECK_FALSE(f.truncated());
  CHECK(seen.size() >= 3);
  CHECK(seen.size() <= (1u << 14));

  LfcaAutomaton t01(parse_spec("tri:3"), parse_rule_name("T01"));
  ReachableEnumerator g(t01, Configuration(t01.spec()), 50);
  int m = 0;
  while (g.next()) ++m;
  CHECK(g.truncated());
  CHECK(m == 50);
}

TEST_CASE("oracle handles multi-state ring rules") {
  // 3 states: a cell steps up once its left neighbor is strictly higher
  std::vector<uint8_t> t(27);
  for (int l = 0; l < 3; ++l)
    for (int s = 0; s < 3; ++s)
      for (int r = 0; r < 3; ++r) t[(l * 3 + s) * 3 + r] = static_cast<uint8_t>(l > s ? s + 1 : s);
  RingAutomaton a(parse_spec("ring:5"), Rule1D(StateOrder::chain(3), t));
  Configuration x(a.spec());
  x.s = {2, 0, 0, 0, 0};
  auto rep = explore(a, x);
  CHECK(rep.unstable == std::vector<int>{1, 2, 3, 4});
  for (auto& [c, w] : rep.witness) {
    auto tr = run(a, x, w);
    CHECK(tr.records.back().changed == std::vector<int>{c});
  }
}
