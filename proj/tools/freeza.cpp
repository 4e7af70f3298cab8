// freeza: command-line front end. JSON on stdout, error JSON on stderr.
// Exit codes: 0 ok, 1 indeterminate or refused, 2 usage error.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <variant>

#include <CLI11.hpp>
#include <json.hpp>

#include "freeza/oracle.hpp"
#include "freeza/s22kit.hpp"
#include "freeza/solvers.hpp"

using namespace freeza;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {


bool g_pretty = false;
int g_workers = 1;

void emit(const json& j) { std::cout << (g_pretty ? j.dump(2) : j.dump()) << '\n'; }

template <class T>
T read_file(const std::string& path, T (*reader)(std::istream&)) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot open " + path);
  return reader(in);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_to(const std::string& path, const std::function<void(std::ostream&)>& fn) {
  std::ofstream out(path);
  if (!out) throw Error("io", "cannot write " + path);
  fn(out);
}

json cell_json(const GridSpec& g, int i) {
  auto u = g.cell(i);
  return json::array({u.r, u.c});
}

json schedule_json(const GridSpec& g, const Schedule& s) {
  json out = json::array();
  for (auto& st : s.steps) {
    json step = json::array();
    for (int c : st) step.push_back(cell_json(g, c));
    out.push_back(step);
  }
  return out;
}

// --rule takes an LFCA name (S22, T13) or ECA<code> for a 2-state ring rule;
// --rule-file takes the 1D JSON table format.
using Automaton = std::variant<LfcaAutomaton, RingAutomaton>;

Automaton make_automaton(const std::string& rule, const std::string& rule_file, const GridSpec& g) {
  if (!rule_file.empty()) return RingAutomaton(g, Rule1D::from_json(json::parse(slurp(rule_file))));
  if (rule.rfind("ECA", 0) == 0) {
    try {
      size_t used = 0;
      unsigned long code = std::stoul(rule.substr(3), &used);
      if (used + 3 == rule.size() && code < 256) return RingAutomaton(g, Rule1D::from_code(static_cast<unsigned>(code)));
    } catch (const std::logic_error&) {
    }
    throw Error("parse", "bad elementary rule '" + rule + "'");
  }
  return LfcaAutomaton(g, parse_rule_name(rule));
}

ExploreOptions explore_options(size_t budget) {
  ExploreOptions o;
  if (budget) o.budget = budget;
  return o;
}

// ---- commands ----

struct RuleArgs {
  std::string rule, rule_file, config;
  size_t budget = 0;
  void add(CLI::App* c) {
    auto* r = c->add_option("--rule", rule, "LFCA rule (S22, T13) or ECA<code>");
    auto* f = c->add_option("--rule-file", rule_file, "1D rule table (JSON)");
    r->excludes(f);
    c->add_option("--config", config, "configuration file")->required()->check(CLI::ExistingFile);
    c->add_option("--budget", budget, "oracle budget (configurations); FREEZA_BUDGET also works");
  }
  void check() const {
    if (rule.empty() && rule_file.empty()) throw CLI::ValidationError("--rule", "one of --rule or --rule-file is required");
  }
};

int cmd_decide(const RuleArgs& ra, const std::string& cell, bool with_witness) {
  ra.check();
  auto x = read_file<Configuration>(ra.config, read_configuration);
  auto a = make_automaton(ra.rule, ra.rule_file, x.spec);
  int u = x.spec.index(parse_cell(x.spec, cell));
  auto d = std::visit([&](auto& au) { return decide(au, x, u, explore_options(ra.budget), g_workers); }, a);
  json j;
  j["cell"] = cell_json(x.spec, u);
  j["method"] = d.method;
  j["verdict"] = to_string(d.verdict);
  if (d.verdict == Verdict::Indeterminate)
    j["unstable"] = nullptr;
  else
    j["unstable"] = d.verdict == Verdict::Unstable;
  if (with_witness && d.witness) j["witness"] = schedule_json(x.spec, *d.witness);
  emit(j);
  return d.verdict == Verdict::Indeterminate ? 1 : 0;
}

int cmd_oracle(const RuleArgs& ra, bool with_witness) {
  ra.check();
  auto x = read_file<Configuration>(ra.config, read_configuration);
  auto a = make_automaton(ra.rule, ra.rule_file, x.spec);
  auto opt = explore_options(ra.budget);
  opt.witnesses = with_witness;
  auto rep = std::visit([&](auto& au) { return explore(au, x, opt); }, a);
  json j;
  j["unstable"] = json::array();
  for (int c : rep.unstable) j["unstable"].push_back(cell_json(x.spec, c));
  j["explored"] = rep.explored;
  j["truncated"] = rep.truncated;
  if (with_witness) {
    j["witnesses"] = json::array();
    for (auto& [c, w] : rep.witness) j["witnesses"].push_back({{"cell", cell_json(x.spec, c)}, {"schedule", schedule_json(x.spec, w)}});
  }
  emit(j);
  return rep.truncated ? 1 : 0;
}

struct SimArgs {
  std::string schedule, out;
  bool sync = false;
  std::optional<uint64_t> seed;
};

template <class A>
json simulate(const A& a, const Configuration& x, const SimArgs& sa, Configuration& final_config) {
  const int n = x.size();
  Schedule s;
  std::string mode;
  if (!sa.schedule.empty()) {
    mode = "schedule";
    std::ifstream in(sa.schedule);
    if (!in) throw Error("io", "cannot open " + sa.schedule);
    s = read_schedule(in, x.spec);
  } else if (sa.sync) {
    // one block step of every cell until nothing changes
    mode = "sync";
    std::vector<int> all(n);
    for (int i = 0; i < n; ++i) all[i] = i;
    Configuration cur = x;
    for (;;) {
      s.steps.push_back(all);
      auto [nxt, changed] = step(a, cur, all);
      if (changed.empty()) break;
      cur = std::move(nxt);
    }
  } else {
    // random permutation sweeps from one mt19937_64 stream until a sweep changes nothing
    mode = "random-seq";
    Rng rng(*sa.seed);
    Configuration cur = x;
    for (;;) {
      Schedule sw = random_sweeps(n, 1, rng);
      auto t = run(a, cur, sw);
      s.steps.insert(s.steps.end(), sw.steps.begin(), sw.steps.end());
      if (t.changes() == 0) break;
      cur = t.final_config;
    }
  }
  auto t = run(a, x, s);
  final_config = t.final_config;
  size_t changed_cells = 0;
  for (int i = 0; i < n; ++i) changed_cells += t.final_config.s[i] != x.s[i];
  json j;
  j["mode"] = mode;
  if (sa.seed) j["seed"] = *sa.seed;
  j["steps"] = s.steps.size();
  j["changes"] = t.changes();
  j["changed_cells"] = changed_cells;
  j["fixed_point"] = t.fixed_point;
  auto active = [n](const Configuration& c) -> int64_t { return n - std::count(c.s.begin(), c.s.end(), 0); };
  j["nonzero_initial"] = active(x);
  j["nonzero_final"] = active(t.final_config);
  return j;
}

int cmd_simulate(const RuleArgs& ra, const SimArgs& sa) {
  ra.check();
  int modes = !sa.schedule.empty() + sa.sync + sa.seed.has_value();
  if (modes != 1) throw CLI::ValidationError("simulate", "give exactly one of --schedule, --sync, --random-seq");
  auto x = read_file<Configuration>(ra.config, read_configuration);
  auto a = make_automaton(ra.rule, ra.rule_file, x.spec);
  Configuration fin;
  json j = std::visit([&](auto& au) { return simulate(au, x, sa, fin); }, a);
  if (!sa.out.empty()) {
    write_to(sa.out, [&](std::ostream& o) { write_configuration(o, fin); });
    j["out"] = sa.out;
  }
  emit(j);
  return 0;
}

int cmd_classify(const std::string& rule) {
  auto r = parse_rule_name(rule);
  emit({{"rule", r.name()}, {"class", to_string(classify(r))}});
  return 0;
}

json compositional_json(const CompositionalDecision& cd) {
  json j{{"verdict", to_string(cd.verdict)}, {"reason", cd.reason}};
  if (cd.verdict == Verdict::Unstable) {
    j["witness_steps"] = cd.witness.schedule.steps.size();
    j["tiles_searched"] = cd.witness.tiles_searched;
    j["replayed"] = cd.replayed;
  }
  return j;
}

int cmd_reduce_sat(const std::string& cnf, const std::string& out, size_t max_cells, bool decide_it) {
  auto f = read_file<CnfFormula>(cnf, parse_dimacs);
  auto lib = load_library();
  auto red = reduce_sat(f, lib, max_cells ? max_cells : kMaxInstanceCells);
  auto& pv = red.provenance;
  auto& g = red.instance.config.spec;
  json prov;
  prov["clause_gate"] = pv.clause_gate;
  prov["gate_block"] = json::array();
  for (size_t k = 1; k < pv.gate_block.size(); ++k) prov["gate_block"].push_back({pv.gate_block[k].first, pv.gate_block[k].second});
  prov["source_side"] = pv.source_side;
  prov["delta"] = pv.delta;
  prov["restricted_side"] = pv.restricted_side;
  prov["gadget_tile"] = json::array();
  for (auto [a, b] : pv.gadget_tile) prov["gadget_tile"].push_back({a, b});
  prov["target_source"] = {pv.target_source.first, pv.target_source.second};
  prov["target_block"] = {pv.target_block.first, pv.target_block.second};
  prov["variable_selectors"] = json::array();
  for (size_t k = 0; k < pv.variable_selectors.size(); ++k)
    prov["variable_selectors"].push_back({{"variable", pv.variable_of_selector[k]},
                                          {"block", {pv.variable_selectors[k].first, pv.variable_selectors[k].second}}});
  prov["block_to_source"] = "source block of restricted block (r, c) is (r / delta, c / delta); its pattern tile starts at cell (10r, 10c)";
  json j;
  j["grid"] = g.to_string();
  j["decision_cell"] = cell_json(g, red.instance.decision);
  j["block_side"] = red.instance.block_side;
  j["provenance"] = prov;
  if (!out.empty()) {
    fs::create_directories(out);
    write_to((fs::path(out) / "instance.grid").string(), [&](std::ostream& o) { write_configuration(o, red.instance.config); });
    write_to((fs::path(out) / "restricted.circuit").string(), [&](std::ostream& o) { write_circuit(o, red.restricted.grid.to_grid()); });
    write_to((fs::path(out) / "provenance.json").string(), [&](std::ostream& o) { o << j.dump(2) << '\n'; });
    j["files"] = {"instance.grid", "restricted.circuit", "provenance.json"};
  }
  j.erase("provenance");
  if (decide_it) {
    auto cd = decide_compositional(red.restricted.grid, red.instance, lib);
    j["decision"] = compositional_json(cd);
    j["cnf_satisfiable"] = cnf_brute_force(f).satisfiable;
    emit(j);
    return cd.verdict == Verdict::Indeterminate ? 1 : 0;
  }
  emit(j);
  return 0;
}

int cmd_compile_circuit(const std::string& file, const std::string& target, bool restrict_it, const std::string& out,
                        bool decide_it, bool oracle_it, size_t budget) {
  auto c = read_file<GridCircuit>(file, read_circuit);
  json j;
  j["source_side"] = c.side();
  if (restrict_it) {
    auto rc = restrict_circuit(c);
    j["restricted_side"] = rc.grid.side();
    j["delta"] = rc.delta;
    if (!target.empty()) {
      GridSpec sg{GridKind::Square, c.side()};
      auto t = parse_cell(sg, target);
      auto [er, ec] = rc.east_output(t.r, t.c);
      auto [sr, sc] = rc.south_output(t.r, t.c);
      j["east_output"] = {er, ec};
      j["south_output"] = {sr, sc};
    }
    if (!out.empty()) write_to(out, [&](std::ostream& o) { write_circuit(o, rc.grid.to_grid()); });
    emit(j);
    return 0;
  }
  if (target.empty()) throw CLI::ValidationError("--target", "required when compiling to a configuration");
  GridSpec sg{GridKind::Square, c.side()};
  auto t = parse_cell(sg, target);
  auto lib = load_library();
  auto inst = compile_configuration(c, t.r, t.c, lib);
  j["grid"] = inst.config.spec.to_string();
  j["block_side"] = inst.block_side;
  j["decision_cell"] = cell_json(inst.config.spec, inst.decision);
  if (!out.empty()) write_to(out, [&](std::ostream& o) { write_configuration(o, inst.config); });
  int code = 0;
  if (decide_it) {
    auto cd = decide_compositional(c, inst, lib);
    j["compositional"] = compositional_json(cd);
    code = cd.verdict == Verdict::Indeterminate;
  }
  if (oracle_it) {
    auto d = decide_unstable(s22_automaton(inst.config.spec.n), inst.config, inst.decision, explore_options(budget));
    j["oracle"] = {{"verdict", to_string(d.verdict)}, {"explored", d.explored}};
    code |= d.verdict == Verdict::Indeterminate;
  }
  emit(j);
  return code;
}

int cmd_verify_gadget(const std::string& file, std::string kind, size_t budget, bool write_sidecar) {
  if (kind.empty()) kind = fs::path(file).stem().string();
  auto p = parse_pattern(pattern_kind_from_string(kind), slurp(file));
  if (!budget) budget = kPatternBudget;
  json j;
  j["kind"] = to_string(p.kind);
  bool inconclusive;
  if (p.kind == PatternKind::Selector) {
    auto r = verify_selector(p, budget, g_workers);
    inconclusive = r.inconclusive();
    j["base_fixed_point"] = r.base_ok;
    j["exclusive"] = r.exclusive();
    j["both_branches"] = r.both_branches();
    j["explored"] = r.explored();
  } else {
    auto r = verify_robust(p, budget, g_workers);
    inconclusive = r.inconclusive();
    j["base_fixed_point"] = r.fixed_point;
    j["clause_a"] = r.clause_a();
    j["clause_b"] = r.clause_b();
    j["clause_c"] = r.clause_c;
    j["explored"] = r.explored();
    json combos = json::array();
    for (auto& c : r.combos)
      combos.push_back({{"inputs", c.inputs}, {"expected", c.expected}, {"a", c.clause_a}, {"b", c.clause_b},
                        {"explored", c.explored}, {"truncated", c.truncated}});
    j["combos"] = combos;
  }
  auto cr = verify_composable(p, budget);
  j["composable"] = {{"io_counts", cr.io_counts}, {"border_inert", cr.border_inert}, {"safety", cr.safety}, {"passed", cr.passed()}};
  bool passed = false;
  j["certificate_hash"] = certificate_hash(p, budget, &passed);
  j["inconclusive"] = inconclusive;
  j["passed"] = passed;
  if (write_sidecar) {
    fs::path side = fs::path(file).replace_extension(".json");
    json sc{{"kind", to_string(p.kind)}, {"verified", passed}, {"certificate_hash", j["certificate_hash"]}};
    write_to(side.string(), [&](std::ostream& o) { o << sc.dump() << '\n'; });
    j["sidecar"] = side.string();
  }
  emit(j);
  return passed ? 0 : 1;
}

int cmd_bench(const std::vector<std::string>& rules, const std::string& grid, int count, uint64_t seed, size_t budget) {
  GridSpec g = parse_spec(grid);
  json rows = json::array();
  for (auto& name : rules) {
    LfcaAutomaton a(g, parse_rule_name(name));
    Rng rng(seed);
    double solver_ms = 0, oracle_ms = 0;
    int agree = 0, decided = 0;
    for (int k = 0; k < count; ++k) {
      auto x = random_configuration(g, 2, 0.3, rng);
      std::vector<int> inactive;
      for (int i = 0; i < x.size(); ++i)
        if (!x.s[i]) inactive.push_back(i);
      if (inactive.empty()) continue;
      int u = inactive[uniform_below(rng, inactive.size())];
      auto t0 = std::chrono::steady_clock::now();
      auto d = decide(a, x, u, explore_options(budget), g_workers);
      auto t1 = std::chrono::steady_clock::now();
      auto o = decide_unstable(a, x, u, explore_options(budget));
      auto t2 = std::chrono::steady_clock::now();
      solver_ms += std::chrono::duration<double, std::milli>(t1 - t0).count();
      oracle_ms += std::chrono::duration<double, std::milli>(t2 - t1).count();
      if (d.verdict != Verdict::Indeterminate && o.verdict != Verdict::Indeterminate) {
        ++decided;
        agree += d.verdict == o.verdict;
      }
    }
    rows.push_back({{"rule", name}, {"class", to_string(classify(a.rule()))}, {"grid", grid}, {"instances", count},
                    {"decided", decided}, {"agree", agree}, {"solver_ms", solver_ms}, {"oracle_ms", oracle_ms}});
  }
  emit({{"seed", seed}, {"rows", rows}});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"freeza: asynchronous stability of freezing cellular automata"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_flag("--pretty", g_pretty, "indent JSON output");
  app.add_option("--workers", g_workers, "worker threads")->check(CLI::Range(1, 256));

  RuleArgs ra;
  std::string cell;
  bool witness = false;
  auto* decide_c = app.add_subcommand("decide", "decide whether a cell is unstable");
  ra.add(decide_c);
  decide_c->add_option("--cell", cell, "cell r,c (or c on a ring)")->required();
  decide_c->add_flag("--witness", witness, "include the witness schedule");

  RuleArgs rb;
  bool oracle_witness = false;
  auto* oracle_c = app.add_subcommand("oracle", "all unstable cells by reachability");
  rb.add(oracle_c);
  oracle_c->add_flag("--witness", oracle_witness, "include one schedule per unstable cell");

  RuleArgs rs;
  SimArgs sa;
  uint64_t seed = 0;
  auto* sim_c = app.add_subcommand("simulate", "run a schedule");
  rs.add(sim_c);
  sim_c->add_option("--schedule", sa.schedule, "schedule file (one step per line)")->check(CLI::ExistingFile);
  sim_c->add_flag("--sync", sa.sync, "synchronous steps until a fixed point");
  auto* seed_opt = sim_c->add_option("--random-seq", seed, "random permutation sweeps (mt19937_64 seed)");
  sim_c->add_option("--out", sa.out, "write the final configuration");

  std::string rule;
  auto* cls_c = app.add_subcommand("classify", "complexity class of an LFCA rule");
  cls_c->add_option("rule", rule, "rule name")->required();

  std::string cnf, out;
  size_t max_cells = 0;
  bool red_decide = false;
  auto* red_c = app.add_subcommand("reduce-sat", "DIMACS CNF to an S22 instance");
  red_c->add_option("--cnf", cnf, "DIMACS file")->required()->check(CLI::ExistingFile);
  red_c->add_option("--out", out, "output directory");
  red_c->add_option("--max-cells", max_cells, "cell budget for the S22 grid");
  red_c->add_flag("--decide", red_decide, "decide the instance compositionally");

  std::string circuit, target, cout_file;
  bool restrict_it = false, cc_decide = false, cc_oracle = false;
  size_t cc_budget = 0;
  auto* cc_c = app.add_subcommand("compile-circuit", "restrict a circuit or compile it to S22");
  cc_c->add_option("--circuit", circuit, "circuit file")->required()->check(CLI::ExistingFile);
  cc_c->add_option("--target", target, "target block r,c");
  cc_c->add_flag("--restrict", restrict_it, "emit the restricted circuit instead");
  cc_c->add_option("--out", cout_file, "output file");
  cc_c->add_flag("--decide", cc_decide, "decide the target compositionally");
  cc_c->add_flag("--oracle", cc_oracle, "decide the target with the reachability oracle");
  cc_c->add_option("--budget", cc_budget, "oracle budget");

  std::string pattern, kind;
  size_t vg_budget = 0;
  bool sidecar = false;
  auto* vg_c = app.add_subcommand("verify-gadget", "verify a 10x10 S22 pattern");
  vg_c->add_option("--pattern", pattern, "pattern file")->required()->check(CLI::ExistingFile);
  vg_c->add_option("--kind", kind, "and, or, fixed or selector (default: file name)");
  vg_c->add_option("--budget", vg_budget, "reachability budget per combination");
  vg_c->add_flag("--write-sidecar", sidecar, "write the JSON sidecar next to the pattern");

  std::vector<std::string> rules;
  std::string grid = "sq:5";
  int count = 50;
  uint64_t bench_seed = 1;
  size_t bench_budget = 0;
  auto* bench_c = app.add_subcommand("bench", "solver vs oracle timing");
  bench_c->add_option("--rules", rules, "rule names")->delimiter(',');
  bench_c->add_option("--grid", grid, "grid spec");
  bench_c->add_option("--count", count, "instances per rule")->check(CLI::PositiveNumber);
  bench_c->add_option("--seed", bench_seed, "seed");
  bench_c->add_option("--budget", bench_budget, "oracle budget");

  try {
    app.parse(argc, argv);
    if (seed_opt->count()) sa.seed = seed;
    int code = 0;
    if (*decide_c) code = cmd_decide(ra, cell, witness);
    if (*oracle_c) code = cmd_oracle(rb, oracle_witness);
    if (*sim_c) code = cmd_simulate(rs, sa);
    if (*cls_c) code = cmd_classify(rule);
    if (*red_c) code = cmd_reduce_sat(cnf, out, max_cells, red_decide);
    if (*cc_c) code = cmd_compile_circuit(circuit, target, restrict_it, cout_file, cc_decide, cc_oracle, cc_budget);
    if (*vg_c) code = cmd_verify_gadget(pattern, kind, vg_budget, sidecar);
    if (*bench_c) {
      if (rules.empty())
        rules = grid.rfind("tri", 0) == 0 ? std::vector<std::string>{"T01", "T12", "T23", "T22"}
                                          : std::vector<std::string>{"S01", "S12", "S34", "S23"};
      code = cmd_bench(rules, grid, count, bench_seed, bench_budget);
    }
    return code;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << json{{"error", {{"code", "usage"}, {"message", e.what()}}}}.dump() << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << json{{"error", {{"code", e.code()}, {"message", e.what()}}}}.dump() << '\n';
    return e.code() == "refused" || e.code() == "sat-budget" || e.code() == "internal" ? 1 : 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << json{{"error", {{"code", "parse"}, {"message", e.what()}}}}.dump() << '\n';
    return 2;
  }
}
