#include "memosearch/memosearch.h"

#include <string>
#include <vector>

#include "memosearch/log.hpp"
#include "memosearch/policy.hpp"
#include "memosearch/run.hpp"

struct ms_context {
  std::string error;
  std::string output;
};

namespace {

using namespace memosearch;

std::vector<std::string> argv_of(const char* const* argv, size_t argc) {
  std::vector<std::string> out;
  for (size_t i = 0; i < argc; ++i) out.emplace_back(argv[i] ? argv[i] : "");
  return out;
}

template <typename F>
int guarded(ms_context* ctx, F&& body) {
  if (!ctx) return MS_ERR_OTHER;
  ctx->error.clear();
  ctx->output.clear();
  try {
    body();
    return MS_OK;
  } catch (const run::ExamFailed& e) {
    ctx->error = e.what();
    ctx->output = to_json(e.report()).dump(2) + "\n";
    return MS_ERR_EXAM;
  } catch (const ConfigError& e) {
    ctx->error = e.what();
    return MS_ERR_CONFIG;
  } catch (const DomainError& e) {
    ctx->error = e.what();
    return MS_ERR_CONFIG;
  } catch (const CorruptionError& e) {
    ctx->error = e.what();
    return MS_ERR_CORRUPT;
  } catch (const std::exception& e) {
    ctx->error = e.what();
    return MS_ERR_OTHER;
  } catch (...) {
    ctx->error = "unknown error";
    return MS_ERR_OTHER;
  }
}

void require_out(const double* out) {
  if (!out) throw ConfigError("out", "result pointer is null");
}

std::optional<std::filesystem::path> opt_path(const char* p) {
  if (!p || !*p) return std::nullopt;
  return std::filesystem::path(p);
}

}  // namespace

extern "C" {

ms_context* ms_context_new(void) { return new (std::nothrow) ms_context(); }

void ms_context_free(ms_context* ctx) { delete ctx; }

const char* ms_last_error(const ms_context* ctx) { return ctx ? ctx->error.c_str() : "null context"; }

const char* ms_last_output(const ms_context* ctx) { return ctx ? ctx->output.c_str() : ""; }

const char* ms_version(void) { return MEMOSEARCH_VERSION; }

int ms_set_log_level(ms_context* ctx, const char* level) {
  return guarded(ctx, [&] {
    auto lvl = spdlog::level::from_str(level ? level : "");
    if (lvl == spdlog::level::off && std::string(level ? level : "") != "off")
      throw ConfigError("log_level", std::string("unknown level '") + (level ? level : "") + "'");
    log::logger()->set_level(lvl);
  });
}

int ms_search(ms_context* ctx, const char* config_path, const char* mode, const char* run_dir) {
  return guarded(ctx, [&] {
    if (!config_path || !*config_path) throw ConfigError("config", "path required");
    run::SearchOptions o;
    if (mode && *mode) o.mode = mode;
    o.run_dir = opt_path(run_dir);
    ctx->output = run::cmd_search(config_path, o);
  });
}

int ms_resume(ms_context* ctx, const char* run_dir, const char* config_path) {
  return guarded(ctx, [&] {
    if (!run_dir || !*run_dir) throw ConfigError("run_dir", "path required");
    ctx->output = run::cmd_resume(run_dir, opt_path(config_path));
  });
}

int ms_eval(ms_context* ctx, const ms_eval_options* options) {
  return guarded(ctx, [&] {
    if (!options) throw ConfigError("options", "required");
    run::EvalOptions o;
    o.candidate = argv_of(options->candidate_argv, options->candidate_argc);
    if (options->batches_path) o.batches = options->batches_path;
    o.config = opt_path(options->config_path);
    if (options->runner_argv) o.runner = argv_of(options->runner_argv, options->runner_argc);
    o.skip_exam = options->skip_exam != 0;
    o.json = options->json != 0;
    ctx->output = run::cmd_eval(o);
  });
}

int ms_tree(ms_context* ctx, const char* run_dir, const char* format) {
  return guarded(ctx, [&] {
    if (!run_dir || !*run_dir) throw ConfigError("run_dir", "path required");
    ctx->output = run::cmd_tree(run_dir, run::tree_format_from_string(format ? format : "text"));
  });
}

int ms_sim_batch(ms_context* ctx, const char* config_path, uint64_t first_seed, int count, const char* out_path) {
  return guarded(ctx, [&] { ctx->output = run::cmd_sim_batch(opt_path(config_path), first_seed, count, opt_path(out_path)); });
}

int ms_sim_write_batches(ms_context* ctx, const char* config_path, const char* out_path) {
  return guarded(ctx, [&] {
    if (!out_path || !*out_path) throw ConfigError("out", "path required");
    ctx->output = run::cmd_sim_write_batches(opt_path(config_path), out_path);
  });
}

int ms_ucb_eval(ms_context* ctx, double mean, int eval_count, int total_evals, double eval_confidence, double* out) {
  return guarded(ctx, [&] {
    require_out(out);
    *out = policy::ucb_eval(mean, eval_count, total_evals, eval_confidence);
  });
}

int ms_lcb_eval(ms_context* ctx, double mean, int eval_count, int total_evals, double confidence, double* out) {
  return guarded(ctx, [&] {
    require_out(out);
    *out = policy::lcb_eval(mean, eval_count, total_evals, confidence);
  });
}

int ms_local_potential(ms_context* ctx, double mean, double root_mean, double cumulative_improvement,
                       int child_count, double prior_strength, double prior_pseudocount, double* out) {
  return guarded(ctx, [&] {
    require_out(out);
    *out = policy::local_potential(mean, root_mean, cumulative_improvement, child_count, prior_strength,
                                   prior_pseudocount);
  });
}

int ms_ucb_gen(ms_context* ctx, double mean, double potential, int child_count, int total_evals,
               double gen_confidence, double prior_pseudocount, double* out) {
  return guarded(ctx, [&] {
    require_out(out);
    *out = policy::ucb_gen(mean, potential, child_count, total_evals, gen_confidence, prior_pseudocount);
  });
}

}  // extern "C"
