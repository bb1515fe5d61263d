// Command-line front end. Talks to the library only through the C API.
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>

#include <CLI11.hpp>

#include "ramwalk/ramwalk.h"

namespace {

int verbosity() {
  const char* env = std::getenv("RAMWALK_LOG");
  if (!env || std::strcmp(env, "info") == 0) return RW_LOG_INFO;
  if (std::strcmp(env, "error") == 0) return RW_LOG_ERROR;
  if (std::strcmp(env, "debug") == 0) return RW_LOG_DEBUG;
  std::fprintf(stderr, "ramwalk: ignoring RAMWALK_LOG=%s (expected error, info or debug)\n", env);
  return RW_LOG_INFO;
}

void print_log(rw_log_level level, const char* message, void* user) {
  if (static_cast<int>(level) <= *static_cast<int*>(user)) std::fprintf(stderr, "%s\n", message);
}

struct Flags {
  std::string config;
  std::string out;
  std::string dataset;
  std::string checkpoint;
  std::string tracks;
  std::uint64_t seed = 0;
  std::int64_t count = -1;
  int workers = 0;
};

int fail(const char* what, rw_status status) {
  std::fprintf(stderr, "ramwalk %s: %s: %s\n", what, rw_status_name(status), rw_last_error());
  return static_cast<int>(status);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Object-permanence tracking with random walks over a learned spatial memory"};
  app.set_version_flag("--version", std::string(rw_version()));
  app.require_subcommand(1);

  Flags f;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", f.config, "Configuration file (sections: generate, model, train, track, viz)");
    sub->add_option("--seed", f.seed, "Seed; overrides the config's seed key");
    sub->add_option("--out", f.out, "Output directory")->required();
    sub->add_option("--workers", f.workers, "Worker threads; overrides the config's workers key")
        ->check(CLI::PositiveNumber);
  };
  auto* gen = app.add_subcommand("generate", "Generate a procedural dataset");
  common(gen);
  gen->add_option("--count", f.count, "Number of sequences")->check(CLI::NonNegativeNumber);

  auto* trn = app.add_subcommand("train", "Train a model on a dataset");
  common(trn);
  trn->add_option("--dataset", f.dataset, "Dataset file")->required();

  auto* trk = app.add_subcommand("track", "Track every sequence of a dataset");
  common(trk);
  trk->add_option("--dataset", f.dataset, "Dataset file")->required();
  trk->add_option("--checkpoint", f.checkpoint, "Model checkpoint")->required();

  auto* evl = app.add_subcommand("eval", "Score track files against ground truth");
  common(evl);
  evl->add_option("--dataset", f.dataset, "Dataset file")->required();
  evl->add_option("--tracks", f.tracks, "Directory of track files")->required();

  auto* viz = app.add_subcommand("viz", "Export frames with the walker belief overlay");
  common(viz);
  viz->add_option("--dataset", f.dataset, "Dataset file")->required();
  viz->add_option("--checkpoint", f.checkpoint, "Model checkpoint")->required();

  CLI11_PARSE(app, argc, argv);

  int level = verbosity();
  rw_config* cfg = nullptr;
  rw_status st = f.config.empty() ? rw_config_create(&cfg) : rw_config_load(f.config.c_str(), &cfg);
  if (st != RW_OK) return fail("config", st);

  rw_run_options o;
  rw_run_options_init(&o);
  o.config_path = f.config.empty() ? nullptr : f.config.c_str();
  o.out_dir = f.out.c_str();
  o.dataset_path = f.dataset.c_str();
  o.checkpoint_path = f.checkpoint.c_str();
  o.tracks_dir = f.tracks.c_str();
  o.has_seed = app.get_subcommands().front()->count("--seed") > 0;
  o.seed = f.seed;
  o.count = f.count;
  o.workers = f.workers;
  o.log = print_log;
  o.user = &level;

  const std::string name = app.get_subcommands().front()->get_name();
  if (name == "generate") st = rw_run_generate(cfg, &o);
  else if (name == "train") st = rw_run_train(cfg, &o);
  else if (name == "track") st = rw_run_track(cfg, &o);
  else if (name == "eval") st = rw_run_eval(cfg, &o);
  else st = rw_run_viz(cfg, &o);
  rw_config_destroy(cfg);
  if (st != RW_OK) return fail(name.c_str(), st);
  if (level >= RW_LOG_INFO) std::fprintf(stderr, "ramwalk %s: wrote %s\n", name.c_str(), f.out.c_str());
  return 0;
}
