#pragma once

#include <cstdint>
#include <vector>

#include "dictdis/batch.hpp"
#include "dictdis/checkpoint.hpp"
#include "dictdis/model.hpp"
#include "dictdis/params.hpp"

namespace dictdis {

struct TrainConfig {
  double lr_peak = 5e-4;
  std::size_t warmup_steps = 400;
  double label_smoothing = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double adam_eps = 1e-9;
  double clip_norm = 1.0;
  std::size_t batch_size = 16;
  std::size_t max_updates = 5000;
  std::size_t threads = 1;
  std::uint64_t seed = 1;
  std::size_t checkpoint_every = 500;
  std::size_t log_every = 50;

  void validate() const;
};

// Adam moments aligned with the parameter registry. `step` counts completed
// updates; the bias correction uses step numbers starting at 1.
struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::uint64_t step = 0;

  static AdamState fresh(const Parameters& params);
  void round_to_f32();
};

// Inverse-sqrt schedule with linear warmup, peaking at lr_peak.
double lr_schedule(const TrainConfig& cfg, std::uint64_t t);

// Sum of per-step label-smoothed NLL over target.size()+1 steps (the last
// step predicts <eos>).
Var example_loss(Bound& b, const AugmentedInput& in, const std::vector<int>& target,
                 double smoothing);

AugmentedInput augment_example(const Example& ex, const ModelConfig& cfg);

struct StepResult {
  double loss = 0.0;       // token-mean over the batch
  double grad_norm = 0.0;  // before clipping
  double lr = 0.0;
};

// One optimizer update. Examples run on separate tapes in waves of
// cfg.threads; gradients fold in example index order, so the result does not
// depend on the thread count.
StepResult train_step(Parameters& params, AdamState& opt, const TrainConfig& cfg,
                      const std::vector<Example>& batch);

// Token-mean loss in eval mode (no dropout).
double eval_loss(const Parameters& params, const std::vector<Example>& examples,
                 double smoothing);

// Central-difference check of d(loss)/d(theta) on sampled coordinates.
// Returns the largest relative error seen.
double gradient_check_max_rel(Parameters& params, const Example& ex, double smoothing,
                              std::size_t per_tensor, std::uint64_t seed);

// Checkpoint payload for params + moments. Rounds the in-memory state to
// float32 first, so training continued from memory matches training resumed
// from the file bit for bit.
CheckpointData make_train_checkpoint(Parameters& params, AdamState& opt,
                                     std::uint64_t vocab_fingerprint);
AdamState restore_train_checkpoint(const CheckpointData& data, Parameters& params,
                                   std::uint64_t expect_fingerprint);

}  // namespace dictdis
