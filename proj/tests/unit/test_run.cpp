#include <fstream>

#include "doctest.h"
#include "memosearch/run.hpp"
#include "support.hpp"

using namespace mstest;
namespace fs = std::filesystem;

namespace {

void write(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

int count_lines(const std::string& s) { return static_cast<int>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_CASE("tree rendering of the golden run") {
  const SearchOutcome out = golden_run(3);
  const std::string text = run::render_tree(out.tree, golden_config(), run::TreeFormat::text);
  CHECK(count_lines(text) == static_cast<int>(out.tree.size()));
  CHECK(text.rfind("node 0 root  mean=0.2000 n=2 K=1 S=0.3000", 0) == 0);
  int selected_lines = 0;
  std::istringstream lines(text);
  for (std::string line; std::getline(lines, line);) {
    if (line.find("[selected]") == std::string::npos) continue;
    ++selected_lines;
    CHECK(line.find("node 1 ") != std::string::npos);
    CHECK(line.find("lcb=0.3335") != std::string::npos);
  }
  CHECK(selected_lines == 1);
  // Children sit one indentation step below their parent.
  for (const auto& n : out.tree.nodes()) {
    int depth = 0;
    for (auto p = n.parent; p; p = out.tree.node(*p).parent) ++depth;
    const std::string prefix = std::string(2 * depth, ' ') + "node " + std::to_string(n.id.value) + " ";
    CHECK((text.find("\n" + prefix) != std::string::npos || (depth == 0 && text.rfind(prefix, 0) == 0)));
  }

  const std::string dot = run::render_tree(out.tree, golden_config(), run::TreeFormat::dot);
  CHECK(dot == read_file(fs::path(MS_GOLDEN_DIR) / "t3_tree.dot"));

  const Json j = Json::parse(run::render_tree(out.tree, golden_config(), run::TreeFormat::json));
  CHECK(j["selected"] == 1);
  CHECK(j["lcb_confidence"].get<double>() == doctest::Approx(golden_config().lcb_confidence()));
  CHECK(j["nodes"].size() == out.tree.size());

  CHECK(run::tree_format_from_string("dot") == run::TreeFormat::dot);
  CHECK_THROWS_AS(run::tree_format_from_string("svg"), ConfigError);
}

TEST_CASE("run config parsing") {
  TempDir dir("ms-config");
  using run::run_config_from_json;
  CHECK_THROWS_AS(run_config_from_json(Json::array()), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(Json{{"mode", "sim"}, {"colour", 1}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(Json{{"mode", 3}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(Json{{"mode", "browser"}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(Json{{"search", {{"search_steps", 0}}}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(Json{{"root", {{"cmd", {"x"}}}}}), ConfigError);

  const Json external{{"mode", "external"},
                      {"batches", "data/batches.json"},
                      {"runner", {{"command", {"./run_task.sh"}}}},
                      {"root", {{"source", "seed/memo.py"}}},
                      {"meta", {{"command", {"./meta.sh"}}}}};
  const run::RunConfig c = run_config_from_json(external, dir.path());
  CHECK(c.batches == dir / "data/batches.json");
  CHECK(c.root.source == dir / "seed/memo.py");
  CHECK(c.runner.working_dir == dir.path());

  for (const char* key : {"batches", "runner", "root", "meta"}) {
    Json partial = external;
    partial.erase(key);
    CAPTURE(key);
    CHECK_THROWS_AS(run_config_from_json(partial, dir.path()), ConfigError);
  }
  Json llm = external;
  llm["mode"] = "llm";
  llm.erase("meta");
  CHECK_THROWS_AS(run_config_from_json(llm, dir.path()), ConfigError);
  llm["endpoint"] = {{"base_url", "http://127.0.0.1:9/v1"}, {"model", "m"}};
  CHECK(run_config_from_json(llm, dir.path()).endpoint->model == "m");
  llm["endpoint"]["base_url"] = "http://api.example.com/v1";
  CHECK_THROWS_AS(run_config_from_json(llm, dir.path()), ConfigError);
}

TEST_CASE("config files resolve against their directory") {
  TempDir dir("ms-load");
  fs::create_directories(dir / "sub");
  write(dir / "sub" / "exp.json", R"({"mode":"sim","search":{"search_steps":2}})");
  const run::RunConfig c = run::load_run_config(dir / "sub" / "exp.json");
  CHECK(c.run_dir == fs::absolute(dir / "sub") / "runs" / "exp");
  CHECK(c.search.search_steps == 2);
  CHECK_THROWS_AS(run::load_run_config(dir / "absent.json"), ConfigError);
  write(dir / "broken.json", "{\"mode\":");
  CHECK_THROWS_AS(run::load_run_config(dir / "broken.json"), ConfigError);

  // The stored canonical form loads back to the same document.
  write(dir / "stored.json", run::to_json(c).dump(2));
  const run::RunConfig again = run::load_run_config(dir / "stored.json");
  CHECK(run::to_json(again) == run::to_json(c));
}

TEST_CASE("search, tree and summary commands") {
  TempDir dir("ms-cmd");
  write(dir / "s.json", R"({"mode":"sim","search":{"search_steps":5,"rng_seed":3},"landscape":{"seed":3}})");
  const std::string out = run::cmd_search(dir / "s.json");
  CHECK(out.find("run directory: ") != std::string::npos);
  CHECK(out.find("rounds: 5  evaluations: ") != std::string::npos);
  CHECK(out.find("selected: node ") != std::string::npos);
  const fs::path run_dir = dir / "runs" / "s";
  CHECK(fs::exists(run_dir / "config.json"));
  CHECK(fs::exists(run_dir / "journal.jsonl"));
  const std::string tree = run::cmd_tree(run_dir, run::TreeFormat::text);
  CHECK(tree.find("[selected]") != std::string::npos);
  CHECK_THROWS_AS(run::cmd_tree(dir.path(), run::TreeFormat::text), CorruptionError);
  CHECK_THROWS_AS(run::cmd_search(dir / "s.json", {std::string("bogus"), dir / "other"}), ConfigError);
  CHECK_FALSE(fs::exists(dir / "other" / "journal.jsonl"));
}

TEST_CASE("eval command over sim batches") {
  TempDir dir("ms-eval");
  write(dir / "zn.json", R"({"mode":"sim","landscape":{"zero_noise":true}})");
  const std::string wrote = run::cmd_sim_write_batches(dir / "zn.json", dir / "batches.json");
  CHECK(wrote.find("batches.json") != std::string::npos);

  run::EvalOptions o;
  o.candidate = {"builtin:empty"};
  o.batches = dir / "batches.json";
  o.config = dir / "zn.json";
  CHECK(run::cmd_eval(o).rfind("score: 0.3000 over 20 tasks (6 succeeded, 0 invalid)", 0) == 0);
  o.json = true;
  CHECK(Json::parse(run::cmd_eval(o))["score"].get<double>() == doctest::Approx(0.3));

  o.json = false;
  o.candidate = {"builtin:bad-schema"};
  try {
    run::cmd_eval(o);
    FAIL("expected an exam failure");
  } catch (const run::ExamFailed& e) {
    CHECK(e.report().first_failure() == "schema");
  }
  o.skip_exam = true;
  CHECK(run::cmd_eval(o).rfind("score: ", 0) == 0);

  o.candidate.clear();
  CHECK_THROWS_AS(run::cmd_eval(o), ConfigError);
}

TEST_CASE("sim batch command") {
  TempDir dir("ms-batch");
  CHECK_THROWS_AS(run::cmd_sim_batch(std::nullopt, 0, 0, std::nullopt), ConfigError);
  write(dir / "short.json", R"({"mode":"sim","search":{"search_steps":4}})");
  const std::string out = run::cmd_sim_batch(dir / "short.json", 0, 4, dir / "report.json");
  CHECK(out.find("selected beats candidate mean: ") != std::string::npos);
  CHECK(out.find("/4\n") != std::string::npos);
  const Json report = Json::parse(read_file(dir / "report.json"));
  CHECK(report["seeds"] == 4);
  CHECK(report["search"]["search_steps"] == 4);
}
