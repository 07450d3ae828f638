// Command-line front end. Links only the C API.
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "memosearch/memosearch.h"

namespace {

std::vector<std::string> split_words(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

std::vector<const char*> c_argv(const std::vector<std::string>& v) {
  std::vector<const char*> out;
  for (const auto& s : v) out.push_back(s.c_str());
  return out;
}

const char* or_null(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

int finish(ms_context* ctx, int status) {
  std::fputs(ms_last_output(ctx), stdout);
  if (status != MS_OK) std::fprintf(stderr, "error: %s\n", ms_last_error(ctx));
  ms_context_free(ctx);
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Memory-design search over candidate memo programs"};
  app.require_subcommand(1);
  app.set_version_flag("--version", ms_version());
  std::string log_level = "warn";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off");

  std::string config, mode, run_dir, resume;
  auto* search = app.add_subcommand("search", "Run a search, or resume one");
  search->add_option("--config", config, "Run config file");
  search->add_option("--mode", mode, "sim, external or llm; overrides the config")->check(CLI::IsMember({"sim", "external", "llm"}));
  search->add_option("--run-dir", run_dir, "Run directory; overrides the config");
  search->add_option("--resume", resume, "Resume the run in this directory");

  std::string batches, runner;
  std::vector<std::string> candidate;
  bool skip_exam = false, json = false;
  auto* eval = app.add_subcommand("eval", "Full evaluation of one candidate");
  eval->add_option("--batches", batches, "Batches file")->required();
  eval->add_option("--config", config, "Run config for search and landscape settings");
  eval->add_option("--runner", runner, "Task runner command (split on spaces); default is the sim landscape");
  eval->add_flag("--skip-exam", skip_exam, "Skip the quick exam");
  eval->add_flag("--json", json, "Print the result as JSON");
  eval->add_option("candidate", candidate, "Candidate command, after --")->required();

  std::string format = "text";
  auto* tree = app.add_subcommand("tree", "Render a run's generation tree");
  tree->add_option("run_dir", run_dir, "Run directory")->required();
  tree->add_option("--format", format, "text, dot or json")->check(CLI::IsMember({"text", "dot", "json"}));

  std::uint64_t seed = 0;
  int count = 100;
  std::string out;
  auto* batch = app.add_subcommand("sim-batch", "Run simulated searches over many seeds");
  batch->add_option("--config", config, "Run config for search and landscape settings");
  batch->add_option("--seed", seed, "First seed");
  batch->add_option("--count", count, "Number of seeds");
  batch->add_option("--out", out, "Aggregate report file");

  auto* write_batches = app.add_subcommand("sim-batches", "Write the sim evaluation batches to a file");
  write_batches->add_option("--config", config, "Run config for landscape settings");
  write_batches->add_option("--out", out, "Output file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : MS_ERR_CONFIG;
  }

  ms_context* ctx = ms_context_new();
  if (!ctx) return MS_ERR_OTHER;
  if (int s = ms_set_log_level(ctx, log_level.c_str()); s != MS_OK) return finish(ctx, s);

  if (search->parsed()) {
    if (!resume.empty()) return finish(ctx, ms_resume(ctx, resume.c_str(), or_null(config)));
    if (config.empty()) {
      std::fprintf(stderr, "error: search needs --config or --resume\n");
      ms_context_free(ctx);
      return MS_ERR_CONFIG;
    }
    return finish(ctx, ms_search(ctx, config.c_str(), or_null(mode), or_null(run_dir)));
  }
  if (eval->parsed()) {
    auto cand = c_argv(candidate);
    auto runner_words = split_words(runner);
    auto run = c_argv(runner_words);
    ms_eval_options o{cand.data(), cand.size(), batches.c_str(), or_null(config),
                      run.empty() ? nullptr : run.data(), run.size(), skip_exam ? 1 : 0, json ? 1 : 0};
    return finish(ctx, ms_eval(ctx, &o));
  }
  if (tree->parsed()) return finish(ctx, ms_tree(ctx, run_dir.c_str(), format.c_str()));
  if (batch->parsed()) return finish(ctx, ms_sim_batch(ctx, or_null(config), seed, count, or_null(out)));
  if (write_batches->parsed()) return finish(ctx, ms_sim_write_batches(ctx, or_null(config), out.c_str()));
  ms_context_free(ctx);
  return MS_ERR_OTHER;
}
