#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out, err;
};

// Runs the CLI inside the fixture directory.
Result cli(const std::string& args, const std::string& env = "") {
  static int counter = 0;
  fs::path err = fs::temp_directory_path() / ("freeza_cli_err_" + std::to_string(++counter));
  std::string cmd = "cd " FREEZA_FIXTURES " && " + env + " " FREEZA_CLI " " + args + " 2>" + err.string();
  Result r;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p);
  std::array<char, 4096> buf;
  size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), p)) > 0) r.out.append(buf.data(), n);
  int st = pclose(p);
  r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  std::ifstream e(err);
  std::stringstream ss;
  ss << e.rdbuf();
  r.err = ss.str();
  fs::remove(err);
  return r;
}

void golden(const std::string& name, const std::string& args, int code = 0) {
  INFO(args);
  auto r = cli(args);
  CHECK(r.code == code);
  CHECK_NOTHROW(json::parse(r.out));
  fs::path g = fs::path(FREEZA_GOLDEN) / (name + ".json");
  if (std::getenv("FREEZA_UPDATE_GOLDEN")) std::ofstream(g) << r.out;
  std::ifstream in(g);
  REQUIRE(in);
  std::stringstream ss;
  ss << in.rdbuf();
  CHECK(r.out == ss.str());
}

std::set<std::vector<int>> cells_of(const json& arr) {
  std::set<std::vector<int>> s;
  for (auto& c : arr) s.insert(c.get<std::vector<int>>());
  return s;
}

}  // namespace

TEST_CASE("classify") {
  golden("classify_s22", "classify S22");
  golden("classify_t13", "classify T13");
  golden("classify_s34", "classify S34");
  auto r = cli("classify S22");
  CHECK(json::parse(r.out)["class"] == "Hard");
}

TEST_CASE("decide") {
  golden("decide_t13_all_zero", "decide --rule T13 --config all_zero.grid --cell 0,0");
  auto j = json::parse(cli("decide --rule T13 --config all_zero.grid --cell 0,0").out);
  CHECK(j["unstable"] == false);
  CHECK(j["method"] == "trivial");
  golden("decide_s22_witness", "decide --rule S22 --config two_diag.grid --cell 0,1 --witness");
  golden("decide_s22_stable", "decide --rule S22 --config two_diag.grid --cell 3,3");
  golden("decide_s34", "decide --rule S34 --config s34_cross.grid --cell 2,2");
  golden("decide_s12", "decide --rule S12 --config s34_cross.grid --cell 0,0 --witness");
  golden("decide_ring", "decide --rule ECA252 --config ring6.grid --cell 1 --witness");
  golden("decide_ring_file", "decide --rule-file or_left.json --config ring6.grid --cell 4");
}

TEST_CASE("oracle") {
  golden("oracle_s22_two_diag", "oracle --rule S22 --config two_diag.grid");
  auto j = json::parse(cli("oracle --rule S22 --config two_diag.grid").out);
  CHECK(cells_of(j["unstable"]) == std::set<std::vector<int>>{{0, 1}, {1, 0}});
  golden("oracle_s22_witness", "oracle --rule S22 --config two_diag.grid --witness");
  golden("oracle_ring", "oracle --rule ECA252 --config ring6.grid");
  // truncation is an indeterminate answer
  auto t = cli("oracle --rule S12 --config s34_cross.grid --budget 1 --workers 1");
  CHECK(t.code == 1);
  CHECK(json::parse(t.out)["truncated"] == true);
  auto e = cli("oracle --rule S12 --config s34_cross.grid", "FREEZA_BUDGET=1");
  CHECK(e.code == 1);
}

TEST_CASE("decide and oracle agree on every fixture") {
  struct Fx {
    const char* config;
    const char* rule;
  };
  for (auto [config, rule] : {Fx{"two_diag.grid", "S22"}, Fx{"two_diag.grid", "S12"}, Fx{"s34_cross.grid", "S34"},
                              Fx{"s34_cross.grid", "S23"}, Fx{"all_zero.grid", "T13"}, Fx{"tri_mix.grid", "T12"},
                              Fx{"tri_mix.grid", "T22"}, Fx{"ring6.grid", "ECA252"}}) {
    INFO(config << " " << rule);
    auto o = cli(std::string("oracle --rule ") + rule + " --config " + config);
    REQUIRE(o.code == 0);
    auto unstable = cells_of(json::parse(o.out)["unstable"]);
    std::ifstream in(fs::path(FREEZA_FIXTURES) / config);
    std::string header, row;
    std::getline(in, header);
    bool ring = header.rfind("ring", 0) == 0;
    int r = 0;
    while (std::getline(in, row)) {
      if (row.empty()) continue;
      for (int c = 0; c < static_cast<int>(row.size()); ++c) {
        if (row[c] != '0') continue;
        std::string cell = ring ? std::to_string(c) : std::to_string(r) + "," + std::to_string(c);
        auto d = cli(std::string("decide --rule ") + rule + " --config " + config + " --cell " + cell);
        REQUIRE(d.code == 0);
        CHECK(json::parse(d.out)["unstable"] == (unstable.count({r, c}) > 0));
      }
      ++r;
    }
  }
}

TEST_CASE("simulate") {
  golden("simulate_schedule", "simulate --rule S22 --config two_diag.grid --schedule two_diag.sched");
  golden("simulate_sync", "simulate --rule S12 --config two_diag.grid --sync");
  golden("simulate_random", "simulate --rule S12 --config two_diag.grid --random-seq 7");
  // the same seed gives the same stream
  CHECK(cli("simulate --rule T12 --config tri_mix.grid --random-seq 3").out ==
        cli("simulate --rule T12 --config tri_mix.grid --random-seq 3").out);
  fs::path out = fs::temp_directory_path() / "freeza_sim_out.grid";
  auto r = cli("simulate --rule S12 --config two_diag.grid --sync --out " + out.string());
  CHECK(r.code == 0);
  std::ifstream in(out);
  std::string header;
  std::getline(in, header);
  CHECK(header == "sq:5");
  fs::remove(out);
  CHECK(cli("simulate --rule S12 --config two_diag.grid").code == 2);
  CHECK(cli("simulate --rule S12 --config two_diag.grid --sync --random-seq 1").code == 2);
}

TEST_CASE("compile-circuit") {
  golden("compile_circuit", "compile-circuit --circuit sel.circuit --target 2,2 --decide --oracle");
  golden("compile_circuit_unstable", "compile-circuit --circuit sel.circuit --target 1,2 --decide --oracle");
  golden("compile_circuit_restrict", "compile-circuit --circuit sel.circuit --target 1,1 --restrict");
  CHECK(cli("compile-circuit --circuit sel.circuit").code == 2);
  auto r = cli("compile-circuit --circuit cross.circuit --target 1,1");
  CHECK(r.code == 1);
  CHECK(json::parse(r.err)["error"]["code"] == "refused");
}

TEST_CASE("reduce-sat") {
  golden("reduce_sat_x1", "reduce-sat --cnf x1.cnf --decide");
  golden("reduce_sat_x1_not_x1", "reduce-sat --cnf x1_not_x1.cnf --decide");
  auto j = json::parse(cli("reduce-sat --cnf x1.cnf --decide").out);
  CHECK(j["decision"]["verdict"] == "unstable");
  CHECK(j["decision"]["replayed"] == true);
  CHECK(json::parse(cli("reduce-sat --cnf x1_not_x1.cnf --decide").out)["decision"]["verdict"] == "stable");
  fs::path dir = fs::temp_directory_path() / "freeza_reduce";
  fs::remove_all(dir);
  auto w = cli("reduce-sat --cnf x1.cnf --out " + dir.string());
  CHECK(w.code == 0);
  CHECK(fs::exists(dir / "instance.grid"));
  CHECK(fs::exists(dir / "restricted.circuit"));
  std::ifstream pv(dir / "provenance.json");
  auto p = json::parse(pv);
  CHECK(p["provenance"]["source_side"] == 3);
  CHECK(p["provenance"]["clause_gate"].size() == 1);
  fs::remove_all(dir);
  auto r = cli("reduce-sat --cnf x1.cnf --max-cells 100");
  CHECK(r.code == 1);
  auto e = json::parse(r.err);
  CHECK(e["error"]["code"] == "refused");
  CHECK(e["error"]["message"].get<std::string>().rfind("restrict:", 0) == 0);
}

TEST_CASE("verify-gadget") {
  golden("verify_gadget_fixed", "verify-gadget --pattern " FREEZA_PATTERN_DIR "/fixed.pat");
  golden("verify_gadget_selector", "verify-gadget --pattern " FREEZA_PATTERN_DIR "/selector.pat --workers 2");
  auto r = cli("verify-gadget --pattern " FREEZA_PATTERN_DIR "/or.pat --kind and");
  CHECK(r.code == 1);
  CHECK(json::parse(r.out)["passed"] == false);
}

TEST_CASE("bench") {
  auto r = cli("bench --grid sq:4 --count 10 --seed 5");
  CHECK(r.code == 0);
  auto j = json::parse(r.out);
  REQUIRE(j["rows"].size() == 4);
  for (auto& row : j["rows"]) {
    CHECK(row["agree"] == row["decided"]);
    CHECK(row.contains("solver_ms"));
    CHECK(row.contains("oracle_ms"));
  }
}

TEST_CASE("usage errors and error JSON") {
  struct Case {
    const char* args;
    int code;
    const char* err;
  };
  for (auto c : {Case{"", 2, "usage"}, Case{"frobnicate", 2, "usage"}, Case{"classify", 2, "usage"},
                 Case{"classify S99", 2, "parse"}, Case{"decide --config two_diag.grid --cell 0,0", 2, "usage"},
                 Case{"decide --rule S22 --config two_diag.grid --cell 0,0", 2, "precondition"},
                 Case{"decide --rule S22 --config two_diag.grid --cell 9,9", 2, "out-of-range"},
                 Case{"decide --rule T22 --config two_diag.grid --cell 0,1", 2, "invalid-spec"},
                 Case{"decide --rule S22 --config missing.grid --cell 0,1", 2, "usage"},
                 Case{"decide --rule ECA232 --config ring6.grid --cell 1", 2, "precondition"},
                 Case{"oracle --rule S22 --config two_diag.grid --workers 0", 2, "usage"}}) {
    INFO(c.args);
    auto r = cli(c.args);
    CHECK(r.code == c.code);
    CHECK(r.out.empty());
    json e;
    REQUIRE_NOTHROW(e = json::parse(r.err));
    CHECK(e["error"]["code"] == c.err);
  }
  CHECK(cli("--help").code == 0);
}
