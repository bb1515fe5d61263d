#include "ramwalk/ramwalk.h"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <new>
#include <optional>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "ramwalk/diff/checkpoint.hpp"
#include "ramwalk/metrics/metrics.hpp"
#include "ramwalk/model/model.hpp"
#include "ramwalk/track/track_io.hpp"
#include "ramwalk/track/tracker.hpp"
#include "ramwalk/train/trainer.hpp"
#include "ramwalk/util/bytes.hpp"
#include "ramwalk/util/config.hpp"
#include "ramwalk/util/parallel.hpp"
#include "ramwalk/viz/ppm.hpp"
#include "ramwalk/world/serialize.hpp"
#include "ramwalk/world/world.hpp"

namespace fs = std::filesystem;
using namespace ramwalk;

struct rw_config {
  util::KeyValueConfig values;
  std::string dumped;
};

struct rw_dataset {
  std::vector<world::SceneSequence> sequences;
};

struct rw_model {
  model::ModelParams params;
};

struct rw_report {
  metrics::EvalReport total;
  std::vector<metrics::EvalReport> per_sequence;
  std::vector<std::uint64_t> seeds;
};

namespace {

constexpr const char* kVersion = "0.1.0";
constexpr const char* kManifestName = "manifest.txt";
constexpr const char* kDatasetName = "dataset.rwds";
constexpr const char* kCheckpointName = "model.ckpt";
constexpr const char* kTrainLogName = "train_log.jsonl";

thread_local std::string g_last_error;

class InvalidArgument : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Incompatible : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename F>
rw_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return RW_OK;
  } catch (const InvalidArgument& e) {
    g_last_error = e.what();
    return RW_ERR_INVALID_ARGUMENT;
  } catch (const util::ConfigError& e) {
    g_last_error = e.what();
    return RW_ERR_CONFIG;
  } catch (const std::invalid_argument& e) {
    g_last_error = e.what();
    return RW_ERR_CONFIG;
  } catch (const util::IoError& e) {
    g_last_error = e.what();
    return RW_ERR_IO;
  } catch (const fs::filesystem_error& e) {
    g_last_error = e.what();
    return RW_ERR_IO;
  } catch (const world::FormatError& e) {
    g_last_error = e.what();
    return RW_ERR_FORMAT;
  } catch (const diff::CheckpointError& e) {
    g_last_error = e.what();
    return RW_ERR_FORMAT;
  } catch (const track::TrackFormatError& e) {
    g_last_error = e.what();
    return RW_ERR_FORMAT;
  } catch (const metrics::EvalError& e) {
    g_last_error = e.what();
    return RW_ERR_FORMAT;
  } catch (const Incompatible& e) {
    g_last_error = e.what();
    return RW_ERR_INCOMPATIBLE;
  } catch (const diff::ShapeError& e) {
    g_last_error = e.what();
    return RW_ERR_INCOMPATIBLE;
  } catch (const world::InfeasibleScenario& e) {
    g_last_error = e.what();
    return RW_ERR_INFEASIBLE;
  } catch (const train::TrainingDiverged& e) {
    g_last_error = e.what();
    return RW_ERR_DIVERGED;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return RW_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return RW_ERR_INTERNAL;
  }
}

template <typename T>
void require(const T* p, const char* what) {
  if (!p) throw InvalidArgument(std::string(what) + " must not be null");
}

void log(rw_log_fn fn, void* user, rw_log_level level, const std::string& msg) {
  if (fn) fn(level, msg.c_str(), user);
}

std::string sequence_stem(std::size_t i) { return fmt::format("seq_{:05d}", i); }

std::string track_file(const std::string& dir, std::size_t i) {
  return (fs::path(dir) / (sequence_stem(i) + ".tracks")).string();
}

// Grid size shared by every sequence of the dataset.
std::pair<int, int> dataset_grid(const rw_dataset& ds) {
  if (ds.sequences.empty()) throw InvalidArgument("dataset is empty");
  const auto& first = ds.sequences.front().config;
  for (const auto& s : ds.sequences) {
    if (s.config.height != first.height || s.config.width != first.width) {
      throw Incompatible("dataset mixes grid sizes");
    }
  }
  return {first.height, first.width};
}

void check_compatible(const model::ModelParams& p, const rw_dataset& ds) {
  for (const auto& s : ds.sequences) {
    if (p.config.in_channels != static_cast<int>(world::kFrameChannels) || p.config.height != s.config.height ||
        p.config.width != s.config.width) {
      throw Incompatible(fmt::format("checkpoint expects {}x{}x{} frames but the dataset has {}x{}x{}",
                                     p.config.in_channels, p.config.height, p.config.width, world::kFrameChannels,
                                     s.config.height, s.config.width));
    }
  }
}

std::array<std::uint64_t, 4> state_totals(const rw_dataset& ds) {
  std::array<std::uint64_t, 4> out{};
  for (const auto& s : ds.sequences) {
    const auto c = world::state_counts(s);
    for (std::size_t k = 0; k < 4; ++k) out[k] += c[k];
  }
  return out;
}

int resolve_workers(const rw_config& cfg, const rw_run_options& o, const std::string& section) {
  if (o.workers > 0) return o.workers;
  return static_cast<int>(cfg.values.get_int(section, "workers", 1));
}

std::uint64_t resolve_seed(const rw_config& cfg, const rw_run_options& o, const std::string& section) {
  if (o.has_seed) return o.seed;
  return static_cast<std::uint64_t>(cfg.values.get_int(section, "seed", 0));
}

std::string prepare_out(const rw_run_options& o) {
  if (!o.out_dir || !*o.out_dir) throw InvalidArgument("an output directory is required");
  std::error_code ec;
  fs::create_directories(o.out_dir, ec);
  if (ec || !fs::is_directory(o.out_dir)) throw util::IoError(std::string("cannot create directory ") + o.out_dir);
  return o.out_dir;
}

const char* need_path(const char* p, const char* flag) {
  if (!p || !*p) throw InvalidArgument(std::string(flag) + " is required");
  return p;
}

// Key/value run record written last, so its presence marks a complete run.
class Manifest {
 public:
  Manifest(std::string command, const rw_config& cfg, const rw_run_options& o)
      : command_(std::move(command)), cfg_(cfg), config_path_(o.config_path ? o.config_path : ""),
        start_(std::chrono::steady_clock::now()) {}

  void add(const std::string& key, const std::string& value) { lines_.push_back(key + " " + value); }

  void write(const std::string& dir) const {
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    std::string text = fmt::format("command {}\ncode_version {}\nconfig_path {}\n", command_, kVersion,
                                   config_path_.empty() ? "-" : config_path_);
    for (const auto& l : lines_) text += l + "\n";
    text += fmt::format("wall_seconds {:.3f}\n[config]\n{}", wall, cfg_.values.dump());
    util::write_text_atomic((fs::path(dir) / kManifestName).string(), text);
  }

 private:
  std::string command_;
  const rw_config& cfg_;
  std::string config_path_;
  std::vector<std::string> lines_;
  std::chrono::steady_clock::time_point start_;
};

std::unique_ptr<rw_dataset> generate_dataset(const rw_config& cfg, std::uint64_t base, std::size_t count,
                                             int workers) {
  const auto scenario = world::scenario_from_config(cfg.values, "generate");
  auto ds = std::make_unique<rw_dataset>();
  ds->sequences.resize(count);
  util::parallel_for(count, workers,
                     [&](std::size_t i) { ds->sequences[i] = world::generate_sequence(scenario, base + i); });
  return ds;
}

model::ModelConfig model_config_for(const rw_config& cfg, const rw_dataset& ds) {
  const auto [h, w] = dataset_grid(ds);
  util::KeyValueConfig values = cfg.values;
  for (const auto& [key, v] : {std::pair{"height", h}, std::pair{"width", w}}) {
    if (values.has("model", key) && values.get_int("model", key, 0) != v) {
      throw Incompatible(fmt::format("model {} {} does not match the dataset's {}", key,
                                     values.get_int("model", key, 0), v));
    }
    values.set("model", key, std::to_string(v));
  }
  return model::model_from_config(values, "model");
}

std::unique_ptr<rw_model> train_model(const rw_config& cfg, const rw_dataset& ds, std::uint64_t seed, int workers,
                                      rw_log_fn logfn, void* user, std::vector<train::EpochRecord>* log_out) {
  const auto mc = model_config_for(cfg, ds);
  auto tc = train::train_from_config(cfg.values, "train");
  tc.seed = seed;
  if (workers > 0) tc.workers = workers;
  log(logfn, user, RW_LOG_INFO,
      fmt::format("training on {} sequences, {} epochs, seed {}", ds.sequences.size(), tc.epochs, seed));
  auto result = train::train(ds.sequences, model::init_params(mc, seed), tc, [&](const train::EpochRecord& r) {
    log(logfn, user, RW_LOG_INFO, train::to_json_line(r));
  });
  if (log_out) *log_out = result.log;
  auto m = std::make_unique<rw_model>();
  m->params = std::move(result.params);
  return m;
}

void track_all(const rw_model& m, const rw_dataset& ds, const rw_config& cfg, int workers, const std::string& dir) {
  check_compatible(m.params, ds);
  const auto tc = track::tracker_from_config(cfg.values, "track");
  fs::create_directories(dir);
  util::parallel_for(ds.sequences.size(), workers, [&](std::size_t i) {
    track::write_tracks(track_file(dir, i), track::track_sequence(m.params, ds.sequences[i], tc));
  });
}

std::unique_ptr<rw_report> evaluate_all(const std::string& dir, const rw_dataset& ds) {
  auto rep = std::make_unique<rw_report>();
  for (std::size_t i = 0; i < ds.sequences.size(); ++i) {
    const auto records = track::read_tracks(track_file(dir, i));
    auto r = metrics::evaluate(records, ds.sequences[i]);
    rep->total += r;
    rep->per_sequence.push_back(r);
    rep->seeds.push_back(ds.sequences[i].seed);
  }
  return rep;
}

void save_report(const rw_report& rep, const std::string& dir) {
  std::string jsonl;
  for (std::size_t i = 0; i < rep.per_sequence.size(); ++i)
    jsonl += metrics::to_json_line(rep.per_sequence[i], i, rep.seeds[i]) + "\n";
  util::write_text_atomic((fs::path(dir) / "report.txt").string(), metrics::format_report(rep.total));
  util::write_text_atomic((fs::path(dir) / "report.jsonl").string(), jsonl);
}

std::size_t viz_all(const rw_model& m, const rw_dataset& ds, const rw_config& cfg, int workers,
                    const std::string& dir) {
  check_compatible(m.params, ds);
  const auto tc = track::tracker_from_config(cfg.values, "track");
  viz::VizConfig vc;
  vc.scale = static_cast<int>(cfg.values.get_int("viz", "scale", 8));
  vc.display_threshold = cfg.values.get_double("viz", "display_threshold", vc.display_threshold);
  if (vc.scale < 1) throw util::ConfigError("viz: scale must be >= 1");
  const auto limit = cfg.values.get_int("viz", "sequences", 0);
  if (limit < 0) throw util::ConfigError("viz: sequences must be >= 0");
  const std::size_t n = limit == 0 ? ds.sequences.size()
                                   : std::min<std::size_t>(ds.sequences.size(), static_cast<std::size_t>(limit));
  fs::create_directories(dir);
  util::parallel_for(n, workers, [&](std::size_t i) {
    for (const auto& f : viz::visualize_sequence(m.params, ds.sequences[i], tc, vc)) {
      const auto name = fmt::format("{}_f{:03d}.ppm", sequence_stem(i), f.frame);
      util::write_file_atomic((fs::path(dir) / name).string(), viz::encode_ppm(f.image));
    }
  });
  return n;
}

}  // namespace

extern "C" {

const char* rw_version(void) { return kVersion; }

const char* rw_last_error(void) { return g_last_error.c_str(); }

const char* rw_status_name(rw_status status) {
  switch (status) {
    case RW_OK: return "ok";
    case RW_ERR_INVALID_ARGUMENT: return "invalid argument";
    case RW_ERR_CONFIG: return "config error";
    case RW_ERR_IO: return "i/o error";
    case RW_ERR_FORMAT: return "format error";
    case RW_ERR_INCOMPATIBLE: return "incompatible inputs";
    case RW_ERR_INFEASIBLE: return "infeasible scenario";
    case RW_ERR_DIVERGED: return "training diverged";
    case RW_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

rw_status rw_config_create(rw_config** out) {
  return guarded([&] {
    require(out, "out");
    *out = new rw_config{};
  });
}

rw_status rw_config_parse(const char* text, rw_config** out) {
  return guarded([&] {
    require(text, "text");
    require(out, "out");
    *out = new rw_config{util::KeyValueConfig::parse(text), {}};
  });
}

rw_status rw_config_load(const char* path, rw_config** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    if (!fs::exists(path)) throw util::IoError(std::string("config file not found: ") + path);
    *out = new rw_config{util::KeyValueConfig::load(path), {}};
  });
}

rw_status rw_config_set(rw_config* config, const char* section, const char* key, const char* value) {
  return guarded([&] {
    require(config, "config");
    require(key, "key");
    require(value, "value");
    config->values.set(section ? section : "", key, value);
  });
}

const char* rw_config_dump(rw_config* config) {
  if (!config) return "";
  config->dumped = config->values.dump();
  return config->dumped.c_str();
}

void rw_config_destroy(rw_config* config) { delete config; }

rw_status rw_dataset_generate(const rw_config* config, uint64_t base_seed, size_t count, int workers,
                              rw_dataset** out) {
  return guarded([&] {
    require(config, "config");
    require(out, "out");
    *out = generate_dataset(*config, base_seed, count, workers).release();
  });
}

rw_status rw_dataset_load(const char* path, rw_dataset** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    auto ds = std::make_unique<rw_dataset>();
    ds->sequences = world::load_dataset(path);
    *out = ds.release();
  });
}

rw_status rw_dataset_save(const rw_dataset* dataset, const char* path) {
  return guarded([&] {
    require(dataset, "dataset");
    require(path, "path");
    world::save_dataset(path, dataset->sequences);
  });
}

rw_status rw_dataset_size(const rw_dataset* dataset, size_t* out) {
  return guarded([&] {
    require(dataset, "dataset");
    require(out, "out");
    *out = dataset->sequences.size();
  });
}

rw_status rw_dataset_state_counts(const rw_dataset* dataset, uint64_t counts[4]) {
  return guarded([&] {
    require(dataset, "dataset");
    require(counts, "counts");
    const auto c = state_totals(*dataset);
    for (std::size_t k = 0; k < 4; ++k) counts[k] = c[k];
  });
}

void rw_dataset_destroy(rw_dataset* dataset) { delete dataset; }

rw_status rw_model_train(const rw_config* config, const rw_dataset* dataset, uint64_t seed, int workers,
                         rw_log_fn logfn, void* user, rw_model** out) {
  return guarded([&] {
    require(config, "config");
    require(dataset, "dataset");
    require(out, "out");
    *out = train_model(*config, *dataset, seed, workers, logfn, user, nullptr).release();
  });
}

rw_status rw_model_load(const char* path, rw_model** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    auto m = std::make_unique<rw_model>();
    m->params = model::load_model(path);
    *out = m.release();
  });
}

rw_status rw_model_save(const rw_model* m, const char* path) {
  return guarded([&] {
    require(m, "model");
    require(path, "path");
    model::save_model(path, m->params);
  });
}

void rw_model_destroy(rw_model* m) { delete m; }

rw_status rw_track_dataset(const rw_model* m, const rw_dataset* dataset, const rw_config* config, int workers,
                           const char* out_dir) {
  return guarded([&] {
    require(m, "model");
    require(dataset, "dataset");
    require(config, "config");
    require(out_dir, "out_dir");
    track_all(*m, *dataset, *config, workers, out_dir);
  });
}

rw_status rw_evaluate(const char* tracks_dir, const rw_dataset* dataset, rw_report** out) {
  return guarded([&] {
    require(tracks_dir, "tracks_dir");
    require(dataset, "dataset");
    require(out, "out");
    *out = evaluate_all(tracks_dir, *dataset).release();
  });
}

rw_status rw_report_recovery(const rw_report* report, size_t* episodes, size_t* recovered) {
  return guarded([&] {
    require(report, "report");
    require(episodes, "episodes");
    require(recovered, "recovered");
    *episodes = report->total.episodes;
    *recovered = report->total.recovered;
  });
}

rw_status rw_report_state(const rw_report* report, int state, size_t* frames, double* mean_iou, double* accuracy) {
  return guarded([&] {
    require(report, "report");
    if (state < 0 || state > 3) throw InvalidArgument("state must lie in 0..3");
    const auto& s = report->total.states[static_cast<std::size_t>(state)];
    if (frames) *frames = s.frames;
    if (mean_iou) *mean_iou = s.mean_iou();
    if (accuracy) *accuracy = s.accuracy();
  });
}

rw_status rw_report_id_switches(const rw_report* report, size_t* out) {
  return guarded([&] {
    require(report, "report");
    require(out, "out");
    *out = report->total.id_switches;
  });
}

rw_status rw_report_save(const rw_report* report, const char* out_dir) {
  return guarded([&] {
    require(report, "report");
    require(out_dir, "out_dir");
    fs::create_directories(out_dir);
    save_report(*report, out_dir);
  });
}

void rw_report_destroy(rw_report* report) { delete report; }

rw_status rw_viz(const rw_model* m, const rw_dataset* dataset, const rw_config* config, int workers,
                 const char* out_dir) {
  return guarded([&] {
    require(m, "model");
    require(dataset, "dataset");
    require(config, "config");
    require(out_dir, "out_dir");
    viz_all(*m, *dataset, *config, workers, out_dir);
  });
}

void rw_run_options_init(rw_run_options* o) {
  if (!o) return;
  *o = rw_run_options{};
  o->count = -1;
}

rw_status rw_run_generate(const rw_config* config, const rw_run_options* o) {
  return guarded([&] {
    require(config, "config");
    require(o, "options");
    const auto dir = prepare_out(*o);
    const auto seed = resolve_seed(*config, *o, "generate");
    const auto count = o->count >= 0 ? o->count : config->values.get_int("generate", "count", 16);
    if (count < 0) throw util::ConfigError("generate: count must be >= 0");
    const int workers = resolve_workers(*config, *o, "generate");
    Manifest manifest("generate", *config, *o);
    log(o->log, o->user, RW_LOG_INFO, fmt::format("generating {} sequences from seed {}", count, seed));
    const auto ds = generate_dataset(*config, seed, static_cast<std::size_t>(count), workers);
    const auto path = (fs::path(dir) / kDatasetName).string();
    world::save_dataset(path, ds->sequences);
    // Read back so the manifest describes what is actually on disk.
    const auto check = world::load_dataset(path);
    if (!(check == ds->sequences)) throw util::IoError("dataset read-back differs from what was written: " + path);
    const auto totals = state_totals(*ds);
    manifest.add("seed", std::to_string(seed));
    manifest.add("workers", std::to_string(workers));
    manifest.add("output.dataset", path);
    manifest.add("sequences", std::to_string(count));
    manifest.add("sequence_seeds", count == 0 ? std::string("none")
                                              : fmt::format("{}..{}", seed, seed + static_cast<std::uint64_t>(count) - 1));
    for (auto v : world::kAllStates)
      manifest.add(std::string("frames.") + world::to_string(v), std::to_string(totals[static_cast<std::size_t>(v)]));
    manifest.write(dir);
  });
}

rw_status rw_run_train(const rw_config* config, const rw_run_options* o) {
  return guarded([&] {
    require(config, "config");
    require(o, "options");
    const auto dir = prepare_out(*o);
    const auto dataset_path = need_path(o->dataset_path, "--dataset");
    const auto seed = resolve_seed(*config, *o, "train");
    const int workers = resolve_workers(*config, *o, "train");
    Manifest manifest("train", *config, *o);
    rw_dataset ds{world::load_dataset(dataset_path)};
    std::vector<train::EpochRecord> epochs;
    const auto m = train_model(*config, ds, seed, workers, o->log, o->user, &epochs);
    const auto ckpt = (fs::path(dir) / kCheckpointName).string();
    model::save_model(ckpt, m->params);
    if (!model::same_params(model::load_model(ckpt), m->params))
      throw util::IoError("checkpoint read-back differs from what was written: " + ckpt);
    std::string jsonl;
    for (const auto& r : epochs) jsonl += train::to_json_line(r) + "\n";
    util::write_text_atomic((fs::path(dir) / kTrainLogName).string(), jsonl);
    manifest.add("seed", std::to_string(seed));
    manifest.add("workers", std::to_string(workers));
    manifest.add("input.dataset", dataset_path);
    manifest.add("output.checkpoint", ckpt);
    manifest.add("output.log", (fs::path(dir) / kTrainLogName).string());
    manifest.write(dir);
  });
}

rw_status rw_run_track(const rw_config* config, const rw_run_options* o) {
  return guarded([&] {
    require(config, "config");
    require(o, "options");
    const auto dir = prepare_out(*o);
    const auto dataset_path = need_path(o->dataset_path, "--dataset");
    const auto ckpt = need_path(o->checkpoint_path, "--checkpoint");
    const int workers = resolve_workers(*config, *o, "track");
    Manifest manifest("track", *config, *o);
    rw_dataset ds{world::load_dataset(dataset_path)};
    rw_model m{model::load_model(ckpt)};
    log(o->log, o->user, RW_LOG_INFO, fmt::format("tracking {} sequences", ds.sequences.size()));
    track_all(m, ds, *config, workers, dir);
    for (std::size_t i = 0; i < ds.sequences.size(); ++i) track::read_tracks(track_file(dir, i));
    manifest.add("workers", std::to_string(workers));
    manifest.add("input.dataset", dataset_path);
    manifest.add("input.checkpoint", ckpt);
    manifest.add("output.tracks", fmt::format("{} files seq_NNNNN.tracks", ds.sequences.size()));
    manifest.write(dir);
  });
}

rw_status rw_run_eval(const rw_config* config, const rw_run_options* o) {
  return guarded([&] {
    require(config, "config");
    require(o, "options");
    const auto dir = prepare_out(*o);
    const auto dataset_path = need_path(o->dataset_path, "--dataset");
    const auto tracks = need_path(o->tracks_dir, "--tracks");
    Manifest manifest("eval", *config, *o);
    rw_dataset ds{world::load_dataset(dataset_path)};
    const auto rep = evaluate_all(tracks, ds);
    save_report(*rep, dir);
    log(o->log, o->user, RW_LOG_INFO, metrics::format_report(rep->total));
    manifest.add("input.dataset", dataset_path);
    manifest.add("input.tracks", tracks);
    manifest.add("output.report", (fs::path(dir) / "report.txt").string());
    manifest.add("output.report_lines", (fs::path(dir) / "report.jsonl").string());
    manifest.write(dir);
  });
}

rw_status rw_run_viz(const rw_config* config, const rw_run_options* o) {
  return guarded([&] {
    require(config, "config");
    require(o, "options");
    const auto dir = prepare_out(*o);
    const auto dataset_path = need_path(o->dataset_path, "--dataset");
    const auto ckpt = need_path(o->checkpoint_path, "--checkpoint");
    const int workers = resolve_workers(*config, *o, "viz");
    Manifest manifest("viz", *config, *o);
    rw_dataset ds{world::load_dataset(dataset_path)};
    rw_model m{model::load_model(ckpt)};
    const auto n = viz_all(m, ds, *config, workers, dir);
    manifest.add("workers", std::to_string(workers));
    manifest.add("input.dataset", dataset_path);
    manifest.add("input.checkpoint", ckpt);
    manifest.add("output.images", fmt::format("{} sequences as seq_NNNNN_fMMM.ppm", n));
    manifest.write(dir);
  });
}

}  // extern "C"
