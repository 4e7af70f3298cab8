#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "freeza/circuits.hpp"

using namespace freeza;
using BK = BlockKind;

namespace {

GridCircuit random_circuit(int n, Rng& rng, double selector_p = 0.05) {
  const BK kinds[] = {BK::And, BK::Or, BK::Cross, BK::MulNorth, BK::MulWest, BK::Fixed0, BK::Fixed1};
  GridCircuit c(n);
  for (int i = 1; i < n; ++i)
    for (int j = 1; j < n; ++j)
      c.at(i, j) = coin(rng, selector_p) ? BK::Selector : kinds[uniform_below(rng, 7)];
  for (int k = 0; k < n; ++k)
    if (coin(rng, 0.2)) c.at(k, 0) = BK::Fixed1;
  return c;
}

std::vector<uint8_t> random_bits(size_t n, Rng& rng) {
  std::vector<uint8_t> u(n);
  for (auto& b : u) b = static_cast<uint8_t>(rng() & 1);
  return u;
}

CnfFormula random_cnf(int vars, int clauses, int width, Rng& rng) {
  CnfFormula f;
  f.nvars = vars;
  for (int c = 0; c < clauses; ++c) {
    std::vector<int> cl;
    int w = 1 + static_cast<int>(uniform_below(rng, width));
    for (int k = 0; k < w; ++k) {
      int v = 1 + static_cast<int>(uniform_below(rng, vars));
      cl.push_back(rng() & 1 ? v : -v);
    }
    f.clauses.push_back(cl);
  }
  return f;
}

std::vector<uint8_t> bits_of(uint64_t m, int n) {
  std::vector<uint8_t> u(n);
  for (int k = 0; k < n; ++k) u[k] = static_cast<uint8_t>((m >> k) & 1);
  return u;
}

// Two-variable example circuit: inputs 1,2; 3 = not 1; 4 = or(1); 5 = not 2; 6 = or(1);
// 7 = and(3,4); 8 = or(4,5); 9 = and(5,6).
Dag two_var_dag() {
  Dag d;
  d.add(GateKind::Input, {}, 1);
  d.add(GateKind::Input, {}, 2);
  d.add(GateKind::Not, {1});
  d.add(GateKind::Or, {1});
  d.add(GateKind::Not, {2});
  d.add(GateKind::Or, {1});
  d.add(GateKind::And, {3, 4});
  d.add(GateKind::Or, {4, 5});
  d.add(GateKind::And, {5, 6});
  d.output = 9;
  return d;
}

}  // namespace

TEST_CASE("block semantics") {
  CHECK(apply_block(BK::And, 1, 1) == BlockOut{1, 1});
  CHECK(apply_block(BK::And, 1, 0) == BlockOut{0, 0});
  CHECK(apply_block(BK::Or, 0, 1) == BlockOut{1, 1});
  CHECK(apply_block(BK::Cross, 1, 0) == BlockOut{0, 1});
  CHECK(apply_block(BK::MulNorth, 1, 0) == BlockOut{1, 1});
  CHECK(apply_block(BK::MulWest, 1, 0) == BlockOut{0, 0});
  CHECK(apply_block(BK::Selector, 1, 1, 1) == BlockOut{1, 0});
  CHECK(apply_block(BK::Selector, 0, 0, 0) == BlockOut{0, 1});
  CHECK(apply_block(BK::Fixed0, 1, 1) == BlockOut{0, 0});
  for (char s : std::string("01&|CNWS")) CHECK(block_symbol(block_from_symbol(s)) == s);
  CHECK_THROWS_AS(block_from_symbol('x'), Error);
}

TEST_CASE("evaluation") {
  GridCircuit zero(6);
  for (auto& v : evaluate(zero, {})) CHECK(v == BlockOut{0, 0});
  Rng rng(3);
  auto c = random_circuit(12, rng);
  CHECK_THROWS_AS(evaluate(c, std::vector<uint8_t>(c.selector_count() + 1)), Error);

  // causality: changing a block strictly south-east of v never changes v
  for (int t = 0; t < 30; ++t) {
    auto a = random_circuit(10, rng, 0.0);
    int i = 1 + static_cast<int>(uniform_below(rng, 8)), j = 1 + static_cast<int>(uniform_below(rng, 8));
    auto before = evaluate(a, {});
    auto b = a;
    for (int r = i; r < 10; ++r)
      for (int s = j; s < 10; ++s)
        if ((r > i || s > j) && !(r == i && s == j)) b.at(r, s) = coin(rng, 0.5) ? BK::Or : BK::Fixed1;
    auto after = evaluate(b, {});
    CHECK(before[i * 10 + j] == after[i * 10 + j]);
  }

  auto big = random_circuit(600, rng, 0.001);
  auto u = random_bits(big.selector_count(), rng);
  auto one = evaluate(big, u, 1);
  CHECK(evaluate(big, u, 2) == one);
  CHECK(evaluate(big, u, 8) == one);
}

TEST_CASE("compiled netlist matches evaluation") {
  Rng rng(5);
  for (int t = 0; t < 40; ++t) {
    auto c = random_circuit(14, rng, 0.08);
    auto cc = compile(c);
    int s = c.selector_count();
    std::vector<uint64_t> words(s);
    for (auto& w : words) w = rng();
    auto w = cc.net.eval64(words);
    for (int bit = 0; bit < 64; bit += 9) {
      std::vector<uint8_t> u(s);
      for (int k = 0; k < s; ++k) u[k] = static_cast<uint8_t>((words[k] >> bit) & 1);
      auto v = evaluate(c, u);
      for (int i = 0; i < 14; ++i)
        for (int j = 0; j < 14; ++j) {
          CHECK(((Netlist::lit64(w, cc.east(i, j)) >> bit) & 1) == v[i * 14 + j].east);
          CHECK(((Netlist::lit64(w, cc.south(i, j)) >> bit) & 1) == v[i * 14 + j].south);
        }
    }
  }
}

TEST_CASE("circuit text format") {
  Rng rng(9);
  auto c = random_circuit(7, rng, 0.2);
  std::stringstream ss;
  write_circuit(ss, c);
  CHECK(ss.str().rfind("gridcircuit n=7\n", 0) == 0);
  CHECK(read_circuit(ss) == c);
  std::stringstream bad("gridcircuit n=2\n00\n0x\n");
  CHECK_THROWS_AS(read_circuit(bad), Error);
  std::stringstream short_rows("gridcircuit n=3\n000\n0|\n");
  CHECK_THROWS_AS(read_circuit(short_rows), Error);
}

TEST_CASE("circuit satisfiability") {
  GridCircuit c(3);
  c.at(1, 1) = BK::Selector;
  c.at(1, 2) = BK::Or;
  auto a = is_satisfiable(c, 1, 2);
  CHECK(a.satisfiable);
  REQUIRE(a.assignment);
  CHECK(*a.assignment == std::vector<uint8_t>{1});
  CHECK_FALSE(is_satisfiable(c, 2, 2).satisfiable);  // Fixed(0)
  c.at(2, 1) = BK::Or;  // reads the south output
  CHECK(*is_satisfiable(c, 2, 1).assignment == std::vector<uint8_t>{0});

  GridCircuit wide(24, BK::Selector);
  for (int k = 0; k < 24; ++k) wide.at(0, k) = wide.at(k, 0) = BK::Fixed0;
  try {
    is_satisfiable(wide, 5, 5);
    FAIL("expected refusal");
  } catch (const Error& e) {
    CHECK(e.code() == "refused");
  }

  // exhaustive answer equals a direct scan and is worker invariant
  Rng rng(21);
  for (int t = 0; t < 30; ++t) {
    auto r = random_circuit(9, rng, 0.15);
    int s = r.selector_count();
    if (s > 12) continue;
    int i = 1 + static_cast<int>(uniform_below(rng, 8)), j = 1 + static_cast<int>(uniform_below(rng, 8));
    std::optional<uint64_t> first;
    for (uint64_t m = 0; m < (uint64_t{1} << s) && !first; ++m)
      if (block_value(r, evaluate(r, bits_of(m, s)), i, j)) first = m;
    auto got = is_satisfiable(r, i, j, 22, 1);
    CHECK(got.satisfiable == first.has_value());
    if (first) CHECK(*got.assignment == bits_of(*first, s));
    auto par = is_satisfiable(r, i, j, 22, 8);
    CHECK(par.satisfiable == got.satisfiable);
    CHECK(par.assignment == got.assignment);
  }
}

TEST_CASE("dimacs and brute force") {
  std::stringstream in("c comment\np cnf 3 2\n1 -2 0\n2 3\n0\n");
  auto f = parse_dimacs(in);
  CHECK(f.nvars == 3);
  CHECK(f.clauses == std::vector<std::vector<int>>{{1, -2}, {2, 3}});
  std::stringstream out;
  write_dimacs(out, f);
  CHECK(parse_dimacs(out) == f);
  std::stringstream bad("p cnf 2 1\n1 5 0\n");
  CHECK_THROWS_AS(parse_dimacs(bad), Error);
  std::stringstream count("p cnf 2 2\n1 0\n");
  CHECK_THROWS_AS(parse_dimacs(count), Error);

  CHECK_FALSE(cnf_brute_force({1, {{1}, {-1}}}).satisfiable);
  auto s = cnf_brute_force({2, {{1, 2}}});
  CHECK(s.satisfiable);
  CHECK(*s.assignment == std::vector<uint8_t>{1, 0});
  CHECK_THROWS_AS(cnf_brute_force({25, {{1}}}), Error);
}

TEST_CASE("cdcl agrees with brute force") {
  Rng rng(77);
  for (int t = 0; t < 300; ++t) {
    int vars = 3 + static_cast<int>(uniform_below(rng, 10));
    auto f = random_cnf(vars, static_cast<int>(vars * 4.2), 3, rng);
    SatSolver s;
    for (int v = 0; v < vars; ++v) s.new_var();
    for (auto& c : f.clauses) s.add_clause(c);
    bool sat = s.solve();
    CHECK(sat == cnf_brute_force(f).satisfiable);
    if (sat) {
      std::vector<uint8_t> a(vars);
      for (int v = 0; v < vars; ++v) a[v] = s.value(v + 1);
      CHECK(eval_cnf(f, a));
    }
  }
}

TEST_CASE("normalization") {
  auto unit = normalize_circuit({1, {{1}}});
  REQUIRE(unit.size() == 2);
  CHECK(unit.gate(1).kind == GateKind::Input);
  CHECK(unit.gate(2).kind == GateKind::Or);
  CHECK(unit.output == 2);
  auto neg = normalize_circuit({1, {{-1}}});
  REQUIRE(neg.size() == 2);
  CHECK(neg.gate(2).kind == GateKind::Not);
  CHECK(neg.output == 2);
  CHECK_THROWS_AS(normalize_circuit({1, {}}), Error);

  Rng rng(31);
  for (int t = 0; t < 200; ++t) {
    int vars = 1 + static_cast<int>(uniform_below(rng, 4));
    auto f = random_cnf(vars, 1 + static_cast<int>(uniform_below(rng, 7)), 3, rng);
    auto d = normalize_circuit(f);
    // fan-out of every gate is at most 2, and inputs feed at most one negation
    std::vector<int> out(d.size() + 1, 0), negs(d.size() + 1, 0);
    for (int g = 1; g <= d.size(); ++g)
      for (int h : d.gate(g).in) {
        ++out[h];
        negs[h] += d.gate(g).kind == GateKind::Not;
      }
    for (int g = 1; g <= d.size(); ++g) {
      CHECK(out[g] <= 2);
      CHECK(negs[g] <= 1);
    }
    CHECK(d.clause_gate.size() == f.clauses.size());
    auto ins = d.inputs();
    for (uint32_t m = 0; m < (1u << vars); ++m) {
      auto a = bits_of(m, vars);
      std::vector<uint8_t> iv;
      for (int g : ins) iv.push_back(a[d.gate(g).var - 1]);
      auto v = evaluate_dag(d, iv);
      CHECK(v[d.output - 1] == eval_cnf(f, a));
      for (size_t k = 0; k < f.clauses.size(); ++k) {
        bool c = false;
        for (int l : f.clauses[k]) c = c || (a[std::abs(l) - 1] != 0) == (l > 0);
        CHECK(v[d.clause_gate[k] - 1] == c);
      }
    }
  }
}

TEST_CASE("embedding of the two-variable circuit") {
  auto e = embed(two_var_dag());
  const char* want[] = {
      "0000000000",  //
      "0SCCWCWCCC",  //
      "0CSCCCCCCC",  //
      "0NC|CCCWCC",  //
      "0CCC|CCCWC",  //
      "0CNCC|CCCW",  //
      "0CCCCC|CCC",  //
      "0CCCNCC&CC",  //
      "0CCCCNCC|C",  //
      "0CCCCCNCC&",  //
  };
  REQUIRE(e.circuit.side() == 10);
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j) CHECK(block_symbol(e.circuit.at(i, j)) == want[i][j]);
  CHECK(e.block_of(9) == std::make_pair(9, 9));

  Dag single;
  single.add(GateKind::Input, {}, 1);
  single.output = 1;
  auto s = embed(single);
  CHECK(s.circuit.side() == 2);
  CHECK(s.circuit.at(1, 1) == BK::Selector);
  CHECK(s.circuit.at(0, 1) == BK::Fixed0);

  Dag and1;
  and1.add(GateKind::Input, {}, 1);
  and1.add(GateKind::Or, {1});
  and1.add(GateKind::And, {2});
  and1.output = 3;
  auto a = embed(and1);
  CHECK(a.circuit.at(3, 0) == BK::Fixed1);
  for (int x = 0; x < 2; ++x) CHECK(block_value(a.circuit, evaluate(a.circuit, {static_cast<uint8_t>(x)}), 3, 3) == x);

  Dag bad;
  bad.add(GateKind::Input, {}, 1);
  bad.add(GateKind::Input, {}, 2);
  bad.add(GateKind::And, {1, 2});
  bad.output = 3;
  CHECK_THROWS_AS(embed(bad), Error);
}

TEST_CASE("embedding preserves every gate value") {
  Rng rng(41);
  auto check = [](const Dag& d) {
    auto e = embed(d);
    int k = static_cast<int>(d.inputs().size());
    for (uint32_t m = 0; m < (1u << k); ++m) {
      auto u = bits_of(m, k);
      auto gv = evaluate_dag(d, u);
      auto bv = evaluate(e.circuit, u);
      for (int g = 1; g <= d.size(); ++g) {
        auto [i, j] = e.block_of(g);
        if (d.gate(g).kind == GateKind::Input) continue;
        CHECK(block_value(e.circuit, bv, i, j) == gv[g - 1]);
        CHECK(bv[i * e.circuit.side() + j].south == gv[g - 1]);
      }
    }
  };
  check(two_var_dag());
  for (int t = 0; t < 150; ++t) {
    int vars = 1 + static_cast<int>(uniform_below(rng, 4));
    check(normalize_circuit(random_cnf(vars, 1 + static_cast<int>(uniform_below(rng, 5)), 3, rng)));
  }
}

TEST_CASE("grid satisfiability equals cnf satisfiability") {
  Rng rng(43);
  for (int t = 0; t < 300; ++t) {
    int vars = 1 + static_cast<int>(uniform_below(rng, 3));
    auto f = random_cnf(vars, 1 + static_cast<int>(uniform_below(rng, 3)), 3, rng);
    auto d = normalize_circuit(f);
    auto e = embed(d);
    auto [i, j] = e.block_of(d.output);
    auto g = is_satisfiable(e.circuit, i, j);
    CHECK(g.satisfiable == cnf_brute_force(f).satisfiable);
    if (g.satisfiable) {
      std::vector<uint8_t> a(vars, 0);
      auto ins = d.inputs();
      for (size_t k = 0; k < ins.size(); ++k) a[d.gate(ins[k]).var - 1] = (*g.assignment)[k];
      CHECK(eval_cnf(f, a));
    }
  }
}

TEST_CASE("crossing gadget layout and table") {
  auto g = crossing_gadget();
  const char* rows[] = {"000|0000", "000|S||0", "000|&0|0", "|||&|0|0", "0S&|||&|", "0|00|000", "0|||&000", "0000|000"};
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) CHECK(block_symbol(g[i * 8 + j]) == rows[i][j]);
  auto sel = gadget_as_circuit(g).selectors();
  REQUIRE(sel == std::vector<std::pair<int, int>>{{1, 4}, {4, 1}});

  // rows: a, b, s1, s2 (1 = east), a', b'
  const int table[16][6] = {
      {0, 0, 0, 0, 0, 0}, {0, 0, 0, 1, 0, 0}, {0, 0, 1, 0, 0, 0}, {0, 0, 1, 1, 0, 0},
      {0, 1, 0, 0, 0, 1}, {0, 1, 0, 1, 0, 0}, {0, 1, 1, 0, 0, 0}, {0, 1, 1, 1, 0, 0},
      {1, 0, 0, 0, 0, 0}, {1, 0, 0, 1, 0, 0}, {1, 0, 1, 0, 0, 0}, {1, 0, 1, 1, 1, 0},
      {1, 1, 0, 0, 0, 1}, {1, 1, 0, 1, 1, 1}, {1, 1, 1, 0, 0, 0}, {1, 1, 1, 1, 1, 0},
  };
  for (auto& r : table) {
    auto o = gadget_outputs(g, r[0], r[1], {static_cast<uint8_t>(r[3]), static_cast<uint8_t>(r[2])});
    INFO("a=" << r[0] << " b=" << r[1] << " s1=" << r[2] << " s2=" << r[3]);
    CHECK(o.east == r[4]);
    CHECK(o.south == r[5]);
    CHECK(o.east <= r[0]);
    CHECK(o.south <= r[1]);
    if (r[2] == !r[1] && r[3] == r[0]) CHECK((o.east == r[0] && o.south == r[1]));
  }
}

TEST_CASE("block gadgets meet their contracts") {
  CHECK(block_gadget(BK::Cross) == crossing_gadget());
  for (BK k : {BK::Fixed0, BK::Fixed1, BK::And, BK::Or, BK::MulNorth, BK::MulWest, BK::Selector}) {
    auto g = block_gadget(k);
    for (auto b : g) CHECK((b == BK::And || b == BK::Or || is_fixed(b) || b == BK::Selector));
    for (auto b : g) CHECK(b != BK::Fixed1);
    int s = gadget_as_circuit(g).selector_count();
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        for (int m = 0; m < (1 << s); ++m) {
          auto o = gadget_outputs(g, a, b, bits_of(m, s));
          INFO(to_string(k) << " a=" << a << " b=" << b << " m=" << m);
          if (k == BK::Selector) {
            CHECK(o == apply_block(k, b, a, m & 1));
          } else {
            CHECK(o == apply_block(k, b, a));
          }
        }
  }
  // Or with only the west input set, baseline selectors
  CHECK(gadget_outputs(block_gadget(BK::Or), 1, 0, {}) == BlockOut{1, 1});
}

TEST_CASE("wire gadgets") {
  auto straight = wire_gadget({3, 0}, {3, 7});
  for (int j = 0; j < 8; ++j) CHECK(straight[3 * 8 + j] == BK::Or);
  CHECK(std::count(straight.begin(), straight.end(), BK::Or) == 8);
  auto bend = wire_gadget({0, 3}, {4, 7});
  CHECK(std::count(bend.begin(), bend.end(), BK::Or) == 9);
  for (auto [in, out] : std::vector<std::pair<std::pair<int, int>, std::pair<int, int>>>{
           {{3, 0}, {3, 7}}, {{0, 3}, {4, 7}}, {{4, 0}, {7, 3}}, {{0, 3}, {3, 7}}, {{0, 4}, {7, 4}}, {{3, 0}, {7, 3}}}) {
    auto w = wire_gadget(in, out);
    // drive the input through a harness placed so that `in` reads the injected signal
    for (int x = 0; x < 2; ++x) {
      GridCircuit c(9);
      for (int k = 0; k < 64; ++k) c.at(1 + k / 8, 1 + k % 8) = w[k];
      if (in.second == 0)
        c.at(1 + in.first, 0) = x ? BK::Fixed1 : BK::Fixed0;
      else
        c.at(0, 1 + in.second) = x ? BK::Fixed1 : BK::Fixed0;
      auto v = evaluate(c, {});
      auto o = v[(1 + out.first) * 9 + 1 + out.second];
      CHECK(o.east == x);
      CHECK(o.south == x);
    }
  }
  CHECK_THROWS_AS(wire_gadget({3, 0}, {2, 7}), Error);
  CHECK_THROWS_AS(wire_gadget({3, 3}, {7, 7}), Error);
}

TEST_CASE("restriction of small circuits") {
  GridCircuit fixed(2);
  auto rf = restrict_circuit(fixed);
  CHECK(rf.delta == 32);
  CHECK(rf.grid.side() == 64);
  CHECK(rf.grid.occupied() == 0);

  GridCircuit c(3);
  c.at(1, 1) = BK::Selector;
  c.at(1, 2) = BK::Or;
  c.at(2, 2) = BK::Or;
  c.at(2, 1) = BK::Cross;
  auto rc = restrict_circuit(c);
  CHECK(rc.delta == 40);
  auto dense = rc.grid.to_grid();
  for (auto k : dense.blocks()) CHECK((k == BK::And || k == BK::Or || k == BK::Fixed0 || k == BK::Selector));
  auto cc = compile(rc.grid);
  CHECK(cc.selectors == dense.selectors());
  for (int x = 0; x < 2; ++x) {
    std::vector<uint8_t> u{static_cast<uint8_t>(x)};
    auto src = evaluate(c, u);
    auto ru = lift_assignment(c, rc, u);
    CHECK(project_assignment(c, rc, ru) == u);
    auto dv = evaluate(dense, ru);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        auto [er, ec] = rc.east_output(i, j);
        auto [sr, sc] = rc.south_output(i, j);
        CHECK(dv[er * dense.side() + ec].east == src[i * 3 + j].east);
        CHECK(dv[sr * dense.side() + sc].south == src[i * 3 + j].south);
      }
  }
  auto [r, col] = rc.east_output(1, 2);
  CHECK(is_satisfiable(dense, r, col).satisfiable);
  auto [r2, col2] = rc.south_output(2, 2);
  CHECK(netlist_sat(cc.net, cc.south(r2, col2)).has_value() == is_satisfiable(c, 2, 2).satisfiable);
}

TEST_CASE("restriction of the two-variable circuit") {
  auto e = embed(two_var_dag());
  auto& c = e.circuit;
  auto rc = restrict_circuit(c);
  CHECK(rc.grid.side() == 960);
  auto cc = compile(rc.grid);
  int rs = static_cast<int>(cc.selectors.size());
  Rng rng(55);
  // lifted assignments reproduce every source output exactly
  for (int m = 0; m < 4; ++m) {
    auto u = bits_of(m, 2);
    auto src = evaluate(c, u);
    auto ru = lift_assignment(c, rc, u);
    std::vector<uint64_t> words(rs);
    for (int k = 0; k < rs; ++k) words[k] = ru[k] ? ~uint64_t{0} : 0;
    auto w = cc.net.eval64(words);
    for (int i = 0; i < 10; ++i)
      for (int j = 0; j < 10; ++j) {
        auto [er, ec] = rc.east_output(i, j);
        auto [sr, sc] = rc.south_output(i, j);
        CHECK((Netlist::lit64(w, cc.east(er, ec)) & 1) == src[i * 10 + j].east);
        CHECK((Netlist::lit64(w, cc.south(sr, sc)) & 1) == src[i * 10 + j].south);
      }
  }
  // any restricted assignment is dominated by the source under its projection
  for (int t = 0; t < 16; ++t) {
    std::vector<uint64_t> words(rs);
    for (auto& x : words) x = rng();
    auto w = cc.net.eval64(words);
    for (int bit = 0; bit < 64; ++bit) {
      std::vector<uint8_t> ru(rs);
      for (int k = 0; k < rs; ++k) ru[k] = static_cast<uint8_t>((words[k] >> bit) & 1);
      auto src = evaluate(c, project_assignment(c, rc, ru));
      for (int g = 3; g <= 9; ++g) {
        auto [sr, sc] = rc.south_output(g, g);
        CHECK(((Netlist::lit64(w, cc.south(sr, sc)) >> bit) & 1) <= src[g * 10 + g].south);
      }
    }
  }
  for (int g = 3; g <= 9; ++g) {
    auto [sr, sc] = rc.south_output(g, g);
    CHECK(netlist_sat(cc.net, cc.south(sr, sc)).has_value() == is_satisfiable(c, g, g).satisfiable);
  }
}
