#include <catch2/catch_amalgamated.hpp>

#include "freeza/fca.hpp"

using namespace freeza;

TEST_CASE("rule names parse") {
  auto s22 = parse_rule_name("S22");
  CHECK(s22.kind == GridKind::Square);
  CHECK(s22.allowed == 0b100);
  auto t13 = parse_rule_name("T13");
  CHECK(t13.kind == GridKind::Triangular);
  CHECK(t13.allowed == 0b1110);
  for (auto bad : {"S43", "T04", "X11", "S2", "S222", "Sab"}) CHECK_THROWS_AS(parse_rule_name(bad), Error);
}

TEST_CASE("names round trip for all table rules") {
  auto all = all_named_rules();
  REQUIRE(all.size() == 25);
  for (auto& r : all) CHECK(parse_rule_name(r.name()) == r);
}

TEST_CASE("classification table") {
  auto cls = [](const char* n) { return classify(parse_rule_name(n)); };
  for (auto n : {"T00", "S00", "T33", "S44", "T03", "S04", "T13", "S14"}) CHECK(cls(n) == RuleClass::Trivial);
  for (auto n : {"T01", "T02", "T11", "T12", "S01", "S02", "S03", "S11", "S12", "S13"})
    CHECK(cls(n) == RuleClass::Infiltration);
  for (auto n : {"T22", "T23", "S23", "S24", "S33", "S34"}) CHECK(cls(n) == RuleClass::MonotoneLike);
  CHECK(cls("S22") == RuleClass::Hard);
  int hard = 0;
  for (auto& r : all_named_rules()) {
    auto c = classify(r);
    hard += c == RuleClass::Hard;
    if (c == RuleClass::Infiltration) CHECK(r.contains(1));
    if (c == RuleClass::MonotoneLike) CHECK((!r.contains(1) && r.contains(r.degree() - 1)));
  }
  CHECK(hard == 1);
}

TEST_CASE("local function") {
  auto s34 = parse_rule_name("S34");
  CHECK(local_apply(s34, 0, {1, 1, 1, 0}) == 1);
  CHECK(local_apply(parse_rule_name("S22"), 0, {1, 1, 1, 0}) == 0);
  CHECK_THROWS_AS(local_apply(s34, 0, {1, 1, 1}), Error);
  for (auto& r : all_named_rules())
    for (int mask = 0; mask < (1 << r.degree()); ++mask)
      for (int self = 0; self <= 1; ++self) {
        std::vector<int> nb;
        for (int k = 0; k < r.degree(); ++k) nb.push_back((mask >> k) & 1);
        CHECK(local_apply(r, self, nb) >= self);
        if (self) CHECK(local_apply(r, self, nb) == 1);
      }
}

TEST_CASE("star rule") {
  CHECK(star_rule(parse_rule_name("S24")) == parse_rule_name("S23"));
  CHECK(star_rule(parse_rule_name("T22")) == parse_rule_name("T22"));
  CHECK(star_rule(parse_rule_name("S34")) == parse_rule_name("S33"));
  CHECK(star_rule(parse_rule_name("S44")).empty());
  CHECK(star_rule(parse_rule_name("S44")).name() == "S--");
}

TEST_CASE("monotone rules") {
  for (auto n : {"S24", "S34", "T23", "T13"}) CHECK(is_monotone(parse_rule_name(n)));
  CHECK_FALSE(is_monotone(parse_rule_name("S22")));
  for (auto& r : all_named_rules()) {
    CHECK(is_monotone(r) == (r.hi() == r.degree()));
    if (!is_monotone(r)) continue;
    // pointwise order on tuples
    int d = r.degree();
    for (int x = 0; x < (1 << d); ++x)
      for (int y = 0; y < (1 << d); ++y) {
        if ((x & y) != x) continue;
        for (int s = 0; s <= 1; ++s)
          CHECK(lfca_apply(r, s, __builtin_popcount(x)) <= lfca_apply(r, s, __builtin_popcount(y)));
      }
  }
}

TEST_CASE("state orders") {
  StateOrder o(3, {{0, 1}, {1, 2}});
  CHECK(o.leq(0, 2));
  CHECK(o.total());
  CHECK(o.is_top(2));
  CHECK_THROWS_AS(StateOrder(2, {{0, 1}, {1, 0}}), Error);
  StateOrder v(3, {{0, 1}, {0, 2}});
  CHECK_FALSE(v.total());
  CHECK(v.is_top(1));
  CHECK(v.is_top(2));
}

TEST_CASE("1d rules freezing check and json") {
  CHECK(is_freezing(parse_rule_name("S22")));
  auto drop = Rule1D::from_code(0b00000000);  // f(.,1,.) = 0
  CHECK_FALSE(is_freezing(drop));
  std::vector<uint8_t> id(27);
  for (int l = 0; l < 3; ++l)
    for (int s = 0; s < 3; ++s)
      for (int r = 0; r < 3; ++r) id[(l * 3 + s) * 3 + r] = static_cast<uint8_t>(s);
  CHECK(is_freezing(Rule1D(StateOrder::chain(3), id)));
  int freezing = 0;
  for (unsigned c = 0; c < 256; ++c) freezing += is_freezing(Rule1D::from_code(c));
  CHECK(freezing == 16);
  auto r = Rule1D::from_code(0b11111010);
  auto back = Rule1D::from_json(r.to_json());
  CHECK(back.table() == r.table());
  CHECK_THROWS_AS(Rule1D::from_json(nlohmann::json::parse(R"({"states":[0,1],"order_pairs":[[0,1]],"entries":[]})")),
                  Error);
}
