#pragma once

// The training loop: Adam on the multi-supervised objective, stepwise loss
// logging, the epoch-15 style learning-rate decay, per-epoch checkpoints,
// and loud divergence failure with the last epoch checkpoint retained.

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "vqe/adam.hpp"
#include "vqe/checkpoint.hpp"
#include "vqe/config.hpp"
#include "vqe/errors.hpp"
#include "vqe/mganet.hpp"
#include "vqe/sampling.hpp"
#include "vqe/tensor.hpp"

namespace vqe {

struct StepLog {
  int epoch = 0;
  int step = 0;  // global step index
  double lr = 0.0;
  double total = 0.0;
  double final_term = 0.0;
  std::vector<double> h_terms;
};

struct TrainResult {
  MganetConfig model;
  ParamTensors<float> params;
  std::vector<StepLog> log;
};

namespace detail {

inline std::string epoch_checkpoint_name(int epoch) {
  std::ostringstream os;
  os << "epoch_" << std::setfill('0') << std::setw(3) << epoch << ".ckpt";
  return os.str();
}

}  // namespace detail

// Trains on patches sampled from `data`. With cfg.pool > 0 the run uses a
// fixed pool of that many patches (batches drawn from the pool); otherwise
// every step samples fresh patches. Deterministic for a given seed. When
// `ckpt_dir` is non-empty a checkpoint is written after each epoch, so a
// diverged run leaves the last completed epoch on disk.
inline TrainResult train(const TrainConfig& cfg, const FramePairSet& data,
                         const std::string& ckpt_dir = "") {
  cfg.validate();
  data.validate();
  const int radius = cfg.model.temporal_radius;
  if (data.frames() < 2 * radius + 1) {
    throw ShapeError("train: clip shorter than the temporal window");
  }
  const std::vector<LumaFrame> guides =
      cfg.model.guidance ? guide_maps_for(data) : std::vector<LumaFrame>{};

  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
  std::vector<PatchSample> pool;
  if (cfg.pool > 0) {
    pool = sample_patches(data, guides, radius, cfg.patch, cfg.pool, cfg.seed);
  }

  TrainResult result;
  result.model = cfg.model;
  result.params = mganet_init<float>(cfg.model, cfg.seed);
  Adam<float> opt({cfg.lr});

  int global_step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = static_cast<double>(cfg.lr) *
                      std::pow(cfg.lr_decay, static_cast<double>(epoch / cfg.lr_decay_epoch));
    opt.config().lr = static_cast<float>(lr);

    for (int s = 0; s < cfg.steps_per_epoch; ++s, ++global_step) {
      PatchBatch batch;
      if (cfg.pool > 0) {
        std::vector<int> idx(cfg.batch);
        if (cfg.pool == cfg.batch) {
          for (int i = 0; i < cfg.batch; ++i) idx[i] = i;
        } else {
          std::uniform_int_distribution<int> pick(0, cfg.pool - 1);
          for (auto& i : idx) i = pick(rng);
        }
        batch = batch_samples(pool, idx);
      } else {
        std::vector<PatchSample> fresh;
        for (const SampleSpec& spec : draw_sample_specs(data, cfg.patch, cfg.batch, rng)) {
          fresh.push_back(gather_sample(data, guides, spec, radius, cfg.patch));
        }
        std::vector<int> idx(cfg.batch);
        for (int i = 0; i < cfg.batch; ++i) idx[i] = i;
        batch = batch_samples(fresh, idx);
      }

      Tape<float> tape;
      ParamVars<float> vars = make_param_vars(tape, result.params, true);
      std::vector<Var<float>> window;
      window.reserve(batch.window.size());
      for (auto& w : batch.window) window.push_back(tape.leaf(w));
      Var<float> guide = cfg.model.guidance ? tape.leaf(batch.guide) : Var<float>{};
      Var<float> target = tape.leaf(batch.target);

      auto out = mganet_forward(cfg.model, vars, window, guide);
      auto loss = multi_supervised_loss(out.final, out.intermediates, target);
      const double total = static_cast<double>(loss.total.value().data[0]);
      if (!std::isfinite(total)) {
        throw DivergedError("train: non-finite loss at step " + std::to_string(global_step));
      }
      tape.backward(loss.total);

      std::map<std::string, Tensor<float>> grads;
      for (auto& [name, var] : vars) grads.emplace(name, var.grad());
      opt.step(result.params, grads);

      StepLog entry;
      entry.epoch = epoch;
      entry.step = global_step;
      entry.lr = lr;
      entry.total = total;
      entry.final_term = static_cast<double>(loss.final_term.value().data[0]);
      for (const auto& h : loss.h_terms) {
        entry.h_terms.push_back(static_cast<double>(h.value().data[0]));
      }
      result.log.push_back(std::move(entry));
    }

    if (!ckpt_dir.empty()) {
      save_checkpoint(ckpt_dir + "/" + detail::epoch_checkpoint_name(epoch), cfg.model,
                      result.params);
    }
  }
  return result;
}

inline void write_loss_csv(std::ostream& os, const std::vector<StepLog>& log) {
  os << "step,epoch,lr,total";
  const std::size_t terms = log.empty() ? 0 : log[0].h_terms.size();
  os << ",final";
  for (std::size_t i = 1; i <= terms; ++i) os << ",h" << i;
  os << '\n';
  os << std::setprecision(12);
  for (const auto& e : log) {
    os << e.step << ',' << e.epoch << ',' << e.lr << ',' << e.total << ',' << e.final_term;
    for (double h : e.h_terms) os << ',' << h;
    os << '\n';
  }
}

}  // namespace vqe
