#include "ramwalk/train/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "ramwalk/diff/ops.hpp"
#include "ramwalk/util/config.hpp"
#include "ramwalk/util/parallel.hpp"
#include "ramwalk/walk/transition.hpp"

namespace ramwalk::train {

using diff::Tensor;

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("train: learning rate must be positive");
  if (seq_len < 2) throw std::invalid_argument("train: seq_len must be >= 2");
  if (epochs < 0 || iterations < 0) throw std::invalid_argument("train: epochs and iterations must be non-negative");
  if (accumulate < 1) throw std::invalid_argument("train: accumulate must be >= 1");
  if (workers < 1) throw std::invalid_argument("train: workers must be >= 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("train: optimizer betas must lie in [0, 1)");
  }
  weights.validate();
}

TrainConfig train_from_config(const util::KeyValueConfig& cfg, const std::string& section) {
  TrainConfig c;
  c.learning_rate = cfg.get_double(section, "learning_rate", c.learning_rate);
  c.beta1 = cfg.get_double(section, "beta1", c.beta1);
  c.beta2 = cfg.get_double(section, "beta2", c.beta2);
  c.epsilon = cfg.get_double(section, "epsilon", c.epsilon);
  c.epochs = static_cast<int>(cfg.get_int(section, "epochs", c.epochs));
  c.iterations = static_cast<int>(cfg.get_int(section, "iterations", c.iterations));
  c.seq_len = static_cast<int>(cfg.get_int(section, "seq_len", c.seq_len));
  c.weights = walk::weights_from_config(cfg, section);
  c.seed = static_cast<std::uint64_t>(cfg.get_int(section, "seed", static_cast<std::int64_t>(c.seed)));
  c.occlusion_only = cfg.get_bool(section, "occlusion_only", c.occlusion_only);
  c.freeze_backbone = cfg.get_bool(section, "freeze_backbone", c.freeze_backbone);
  c.accumulate = static_cast<int>(cfg.get_int(section, "accumulate", c.accumulate));
  c.decay_step = static_cast<int>(cfg.get_int(section, "decay_step", c.decay_step));
  c.decay_factor = cfg.get_double(section, "decay_factor", c.decay_factor);
  c.max_grad_norm = cfg.get_double(section, "max_grad_norm", c.max_grad_norm);
  c.workers = static_cast<int>(cfg.get_int(section, "workers", c.workers));
  c.validate();
  return c;
}

std::string to_json_line(const EpochRecord& r) {
  return fmt::format(R"({{"epoch":{},"loss_vis":{:.17g},"loss_ram":{:.17g},"loss_over":{:.17g},"loss_total":{:.17g},"steps":{},"wall":{:.3f}}})",
                     r.epoch, r.loss_vis, r.loss_ram, r.loss_over, r.loss_total, r.steps, r.wall_seconds);
}

Objective sequence_objective(const model::BoundParams& p, const model::ModelConfig& mc,
                             const world::SceneSequence& redacted, std::size_t start, std::size_t length,
                             const walk::LossWeights& w) {
  if (length < 1 || start + length > redacted.length()) {
    throw std::out_of_range("sequence_objective: window exceeds the sequence");
  }
  const model::GridGeometry geom(mc);
  Tensor memory = model::initial_memory(mc);
  std::vector<Tensor> embeddings;
  std::vector<Tensor> visible_terms;
  const bool walk_needed = w.lambda_ram != 0.0 || w.lambda_over != 0.0;
  for (std::size_t t = 0; t < length; ++t) {
    const auto out = model::step_frame(redacted.frames[start + t], memory, p, mc);
    memory = out.memory;
    auto vis = walk::center_focal_loss(out.centers, walk::center_target(redacted, geom, start + t), w.alpha, w.beta);
    const auto labels = walk::size_labels(redacted, geom, start + t);
    if (!labels.empty() && w.size_weight != 0.0) {
      vis = diff::add(vis, diff::scale(walk::size_l1_loss(out.sizes, labels), w.size_weight));
    }
    visible_terms.push_back(vis);
    if (walk_needed) embeddings.push_back(out.embeddings);
  }
  Tensor visible = visible_terms.front();
  for (std::size_t i = 1; i < visible_terms.size(); ++i) visible = diff::add(visible, visible_terms[i]);
  visible = diff::scale(visible, 1.0 / static_cast<double>(length));

  Objective obj;
  obj.visible = visible.item();
  if (!walk_needed) {
    obj.total = visible;
    return obj;
  }

  std::vector<walk::TransitionMatrix> transitions;
  std::shared_ptr<const diff::RowIndex> index;
  if (w.local_attention) {
    const double radius = w.radius_frac * geom.walker_h;
    index = std::make_shared<const diff::RowIndex>(walk::l1_neighbors(geom.walker_h, geom.walker_w, radius));
  }
  for (std::size_t t = 1; t < length; ++t) {
    transitions.push_back(w.local_attention ? walk::affinity_local(embeddings[t - 1], embeddings[t], w.tau, index)
                                            : walk::affinity_global(embeddings[t - 1], embeddings[t], w.tau));
  }
  const auto targets = walk::build_walk_targets(redacted, geom, start, length);
  std::vector<std::vector<Tensor>> walkers;
  for (const auto& target : targets) {
    walkers.push_back(walk::rollout(walk::one_hot_walker(geom.walker_cells(), *target.cells[0]), transitions));
  }
  const auto ram = walk::loss_ram(walkers, targets, geom, w);
  const auto over = walk::loss_overlap(walkers, targets);
  obj.ram = ram.item();
  obj.overlap = over.item();
  obj.total = walk::total_loss(visible, ram, over, w);
  return obj;
}

Adam::Adam(const TrainConfig& cfg, const model::ModelParams& params)
    : beta1_(cfg.beta1), beta2_(cfg.beta2), eps_(cfg.epsilon) {
  for (std::size_t s = 0; s < model::kParamCount; ++s) {
    m_[s].assign(params.values[s].numel(), 0.0);
    v_[s].assign(params.values[s].numel(), 0.0);
  }
}

void Adam::step(model::ModelParams& params, const diff::Gradients& grads, double learning_rate) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (const auto& [slot, g] : grads) {
    const auto gv = g.data();
    const auto cur = params.values[slot].data();
    std::vector<double> next(cur.begin(), cur.end());
    auto& m = m_[slot];
    auto& v = v_[slot];
    for (std::size_t k = 0; k < next.size(); ++k) {
      m[k] = beta1_ * m[k] + (1.0 - beta1_) * gv[k];
      v[k] = beta2_ * v[k] + (1.0 - beta2_) * gv[k] * gv[k];
      next[k] -= learning_rate * (m[k] / c1) / (std::sqrt(v[k] / c2) + eps_);
    }
    params.values[slot] = Tensor(params.values[slot].shape(), std::move(next));
  }
}

namespace {

bool window_has_redaction(const world::SceneSequence& seq, std::size_t start, std::size_t length) {
  for (const auto& tr : seq.tracks) {
    if (tr.shape != world::ShapeClass::Target) continue;
    for (std::size_t t = start; t < start + length; ++t)
      if (!tr.entries[t]) return true;
  }
  return false;
}

bool target_visible_at(const world::SceneSequence& seq, std::size_t t) {
  return std::any_of(seq.tracks.begin(), seq.tracks.end(), [&](const world::ObjectTrack& tr) {
    return tr.shape == world::ShapeClass::Target && tr.entries[t].has_value();
  });
}

std::size_t window_length(const world::SceneSequence& seq, const TrainConfig& cfg) {
  return std::min(seq.length(), static_cast<std::size_t>(cfg.seq_len));
}

}  // namespace

std::vector<std::pair<std::size_t, std::size_t>> training_windows(const std::vector<world::SceneSequence>& redacted,
                                                                  const TrainConfig& cfg) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < redacted.size(); ++i) {
    const auto& seq = redacted[i];
    if (seq.length() < 2) continue;
    const auto len = window_length(seq, cfg);
    for (std::size_t s = 0; s + len <= seq.length(); ++s) {
      if (!target_visible_at(seq, s)) continue;
      if (cfg.occlusion_only && !window_has_redaction(seq, s, len)) continue;
      out.emplace_back(i, s);
    }
  }
  return out;
}

TrainResult train(const std::vector<world::SceneSequence>& dataset, const model::ModelParams& init,
                  const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  if (dataset.empty()) throw std::invalid_argument("train: dataset is empty");
  const auto t0 = std::chrono::steady_clock::now();

  std::vector<world::SceneSequence> redacted;
  redacted.reserve(dataset.size());
  for (const auto& s : dataset) redacted.push_back(world::redact_for_training(s));

  const auto windows = training_windows(redacted, cfg);
  if (windows.empty()) throw std::invalid_argument("train: no sequence provides an eligible training window");
  std::vector<std::vector<std::size_t>> starts_of(redacted.size());
  for (const auto& [i, s] : windows) starts_of[i].push_back(s);
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < redacted.size(); ++i)
    if (!starts_of[i].empty()) eligible.push_back(i);

  TrainResult result{init, {}};
  Adam adam(cfg, init);
  std::mt19937_64 rng(cfg.seed);
  const auto k = static_cast<std::size_t>(cfg.accumulate);
  const std::size_t steps_per_epoch =
      cfg.iterations > 0 ? static_cast<std::size_t>(cfg.iterations) : std::max<std::size_t>(1, eligible.size() / k);
  auto trainable = [&](std::size_t slot) { return !(cfg.freeze_backbone && model::is_backbone(slot)); };

  std::vector<std::size_t> order;
  std::size_t cursor = 0;
  auto next_sample = [&] {
    if (cursor == order.size()) {
      order = eligible;
      std::shuffle(order.begin(), order.end(), rng);
      cursor = 0;
    }
    const std::size_t i = order[cursor++];
    const auto& starts = starts_of[i];
    const std::size_t s = starts[std::uniform_int_distribution<std::size_t>(0, starts.size() - 1)(rng)];
    return std::pair{i, s};
  };

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double lr = cfg.learning_rate;
    if (cfg.decay_step > 0) lr *= std::pow(cfg.decay_factor, epoch / cfg.decay_step);
    EpochRecord rec;
    rec.epoch = epoch;
    for (std::size_t step = 0; step < steps_per_epoch; ++step) {
      std::vector<std::pair<std::size_t, std::size_t>> batch;
      for (std::size_t b = 0; b < k; ++b) batch.push_back(next_sample());

      std::vector<diff::Gradients> grads(batch.size());
      std::vector<Objective> objectives(batch.size());
      util::parallel_for(batch.size(), cfg.workers, [&](std::size_t b) {
        const auto& seq = redacted[batch[b].first];
        diff::Tape tape;
        const auto bound = model::bind(result.params, &tape, trainable);
        auto obj = sequence_objective(bound, result.params.config, seq, batch[b].second, window_length(seq, cfg),
                                      cfg.weights);
        if (!std::isfinite(obj.total.item())) {
          throw TrainingDiverged(fmt::format("non-finite loss at epoch {} on sequence seed {} (window start {})", epoch,
                                             seq.seed, batch[b].second));
        }
        grads[b] = tape.backward(obj.total);
        obj.total = obj.total.detached();
        objectives[b] = std::move(obj);
      });

      diff::Gradients merged;
      for (std::size_t slot = 0; slot < model::kParamCount; ++slot) {
        if (!trainable(slot)) continue;
        std::vector<double> acc(result.params.values[slot].numel(), 0.0);
        for (const auto& g : grads) {
          const auto it = g.find(slot);
          if (it == g.end()) continue;
          const auto d = it->second.data();
          for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += d[j];
        }
        for (auto& v : acc) v /= static_cast<double>(k);
        merged.emplace(slot, Tensor(result.params.values[slot].shape(), std::move(acc)));
      }
      if (cfg.max_grad_norm > 0.0) {
        double sq = 0.0;
        for (const auto& [slot, g] : merged)
          for (double v : g.data()) sq += v * v;
        const double norm = std::sqrt(sq);
        if (norm > cfg.max_grad_norm) {
          const double f = cfg.max_grad_norm / norm;
          for (auto& [slot, g] : merged) g = diff::scale(g, f);
        }
      }
      adam.step(result.params, merged, lr);

      for (const auto& o : objectives) {
        rec.loss_vis += o.visible;
        rec.loss_ram += o.ram;
        rec.loss_over += o.overlap;
        rec.loss_total += o.total.item();
      }
      rec.steps += 1;
    }
    const double n = static_cast<double>(rec.steps * k);
    rec.loss_vis /= n;
    rec.loss_ram /= n;
    rec.loss_over /= n;
    rec.loss_total /= n;
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return result;
}

TrainResult freeze_finetune(const std::vector<world::SceneSequence>& dataset, const model::ModelParams& params,
                            TrainConfig cfg, const EpochCallback& on_epoch) {
  cfg.freeze_backbone = true;
  return train(dataset, params, cfg, on_epoch);
}

}  // namespace ramwalk::train
