#include "dictdis/train.hpp"

#include <cmath>
#include <thread>

#include "dictdis/common.hpp"

namespace dictdis {

namespace {

constexpr std::uint64_t kDropoutTag = 0x6472;  // per-example dropout streams

int gold_at(const std::vector<int>& target, std::size_t t) {
  return t < target.size() ? target[t] : Vocabulary::kEos;
}

}  // namespace

void TrainConfig::validate() const {
  if (lr_peak < 0.0) throw Error(ErrorCategory::Config, "lr_peak must be nonnegative");
  if (warmup_steps == 0) throw Error(ErrorCategory::Config, "warmup_steps must be positive");
  if (!(label_smoothing >= 0.0 && label_smoothing < 1.0))
    throw Error(ErrorCategory::Config, "label_smoothing must be in [0, 1)");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0))
    throw Error(ErrorCategory::Config, "adam betas must be in [0, 1)");
  if (adam_eps <= 0.0) throw Error(ErrorCategory::Config, "adam_eps must be positive");
  if (clip_norm < 0.0) throw Error(ErrorCategory::Config, "clip_norm must be nonnegative");
  if (batch_size == 0) throw Error(ErrorCategory::Config, "batch_size must be positive");
  if (threads == 0) throw Error(ErrorCategory::Config, "threads must be positive");
}

AdamState AdamState::fresh(const Parameters& params) {
  AdamState s;
  s.m.reserve(params.count());
  s.v.reserve(params.count());
  for (std::size_t i = 0; i < params.count(); ++i) {
    s.m.emplace_back(params.at(i).shape);
    s.v.emplace_back(params.at(i).shape);
  }
  return s;
}

void AdamState::round_to_f32() {
  for (Tensor& t : m) round_tensor_to_f32(t);
  for (Tensor& t : v) round_tensor_to_f32(t);
}

double lr_schedule(const TrainConfig& cfg, std::uint64_t t) {
  if (t == 0) throw Error(ErrorCategory::State, "lr_schedule steps start at 1");
  double td = static_cast<double>(t);
  double wd = static_cast<double>(cfg.warmup_steps);
  return cfg.lr_peak * std::min(td / wd, std::sqrt(wd / td));
}

Var example_loss(Bound& b, const AugmentedInput& in, const std::vector<int>& target,
                 double smoothing) {
  TeacherForcedOut fwd = forward_teacher_forced(b, in, target);
  std::vector<Var> terms;
  terms.reserve(fwd.steps.size());
  for (std::size_t t = 0; t < fwd.steps.size(); ++t)
    terms.push_back(b.tape->nll_smoothed(fwd.steps[t].p_final, gold_at(target, t), smoothing));
  return b.tape->add_scalars(terms);
}

AugmentedInput augment_example(const Example& ex, const ModelConfig& cfg) {
  return build_augmented_input(ex.source, ex.constraints, static_cast<int>(cfg.p_offset),
                               static_cast<int>(cfg.max_segments), cfg.max_aug_len);
}

namespace {

struct WorkerSlot {
  double loss = 0.0;
  std::vector<Tensor> grads;  // empty tensor where the example touched nothing
  std::exception_ptr error;
};

void run_example(const Parameters& params, const TrainConfig& cfg, const Example& ex,
                 std::uint64_t step, std::size_t index, WorkerSlot& slot) {
  try {
    std::mt19937_64 rng(derived_seed(cfg.seed ^ kDropoutTag, step, index));
    Tape tape;
    Bound b = bind(tape, params, true);
    b.train = true;
    b.rng = &rng;
    AugmentedInput in = augment_example(ex, params.config());
    Var loss = example_loss(b, in, ex.target, cfg.label_smoothing);
    tape.backward(loss);
    slot.loss = loss.val().v[0];
    slot.grads.resize(params.count());
    for (std::size_t i = 0; i < params.count(); ++i) {
      if (tape.has_grad(b.vars[i].id)) slot.grads[i] = tape.grad(b.vars[i].id);
    }
  } catch (...) {
    slot.error = std::current_exception();
  }
}

}  // namespace

StepResult train_step(Parameters& params, AdamState& opt, const TrainConfig& cfg,
                      const std::vector<Example>& batch) {
  cfg.validate();
  if (batch.empty()) throw Error(ErrorCategory::State, "train_step: empty batch");

  std::size_t total_steps = 0;
  for (const Example& ex : batch) total_steps += ex.target.size() + 1;

  std::vector<Tensor> master(params.count());
  for (std::size_t i = 0; i < params.count(); ++i) master[i] = Tensor(params.at(i).shape);
  double loss_sum = 0.0;

  // Waves of cfg.threads examples; folding strictly in example index order
  // keeps the update identical for every thread count.
  for (std::size_t wave = 0; wave < batch.size(); wave += cfg.threads) {
    std::size_t wave_end = std::min(batch.size(), wave + cfg.threads);
    std::vector<WorkerSlot> slots(wave_end - wave);
    if (wave_end - wave == 1) {
      run_example(params, cfg, batch[wave], opt.step, wave, slots[0]);
    } else {
      std::vector<std::thread> pool;
      for (std::size_t i = wave; i < wave_end; ++i)
        pool.emplace_back(run_example, std::cref(params), std::cref(cfg),
                          std::cref(batch[i]), opt.step, i, std::ref(slots[i - wave]));
      for (std::thread& th : pool) th.join();
    }
    for (WorkerSlot& slot : slots) {
      if (slot.error) std::rethrow_exception(slot.error);
      loss_sum += slot.loss;
      for (std::size_t i = 0; i < master.size(); ++i) {
        if (slot.grads[i].numel() == 0) continue;
        for (std::size_t k = 0; k < master[i].v.size(); ++k)
          master[i].v[k] += slot.grads[i].v[k];
      }
    }
  }

  const double inv_steps = 1.0 / static_cast<double>(total_steps);
  double sq = 0.0;
  for (Tensor& g : master) {
    for (double& x : g.v) {
      x *= inv_steps;
      sq += x * x;
    }
  }
  double norm = std::sqrt(sq);
  if (!std::isfinite(norm))
    throw Error(ErrorCategory::Numeric, "non-finite gradient norm");
  double clip_scale = 1.0;
  if (cfg.clip_norm > 0.0 && norm > cfg.clip_norm) clip_scale = cfg.clip_norm / norm;

  const std::uint64_t t = opt.step + 1;
  const double lr = lr_schedule(cfg, t);
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < params.count(); ++i) {
    Tensor& theta = params.at(i);
    Tensor& m = opt.m[i];
    Tensor& v = opt.v[i];
    for (std::size_t k = 0; k < theta.v.size(); ++k) {
      double g = master[i].v[k] * clip_scale;
      m.v[k] = cfg.beta1 * m.v[k] + (1.0 - cfg.beta1) * g;
      v.v[k] = cfg.beta2 * v.v[k] + (1.0 - cfg.beta2) * g * g;
      double mhat = m.v[k] / bc1;
      double vhat = v.v[k] / bc2;
      theta.v[k] -= lr * mhat / (std::sqrt(vhat) + cfg.adam_eps);
    }
  }
  opt.step = t;

  StepResult res;
  res.loss = loss_sum * inv_steps;
  res.grad_norm = norm;
  res.lr = lr;
  return res;
}

double eval_loss(const Parameters& params, const std::vector<Example>& examples,
                 double smoothing) {
  if (examples.empty()) throw Error(ErrorCategory::State, "eval_loss: no examples");
  double loss_sum = 0.0;
  std::size_t steps = 0;
  for (const Example& ex : examples) {
    Tape tape;
    Bound b = bind(tape, params, false);
    AugmentedInput in = augment_example(ex, params.config());
    Var loss = example_loss(b, in, ex.target, smoothing);
    loss_sum += loss.val().v[0];
    steps += ex.target.size() + 1;
  }
  return loss_sum / static_cast<double>(steps);
}

double gradient_check_max_rel(Parameters& params, const Example& ex, double smoothing,
                              std::size_t per_tensor, std::uint64_t seed) {
  AugmentedInput in = augment_example(ex, params.config());

  auto loss_at = [&]() {
    Tape tape;
    Bound b = bind(tape, params, false);
    return example_loss(b, in, ex.target, smoothing).val().v[0];
  };

  std::vector<Tensor> analytic(params.count());
  {
    Tape tape;
    Bound b = bind(tape, params, true);
    Var loss = example_loss(b, in, ex.target, smoothing);
    tape.backward(loss);
    for (std::size_t i = 0; i < params.count(); ++i) {
      analytic[i] = tape.has_grad(b.vars[i].id) ? tape.grad(b.vars[i].id)
                                                : Tensor(params.at(i).shape);
    }
  }

  const double h = 1e-4;
  double worst = 0.0;
  std::mt19937_64 rng(derived_seed(seed, 0xFD));
  for (std::size_t i = 0; i < params.count(); ++i) {
    Tensor& theta = params.at(i);
    std::size_t n = theta.numel();
    std::size_t samples = std::min(per_tensor, n);
    for (std::size_t s = 0; s < samples; ++s) {
      std::size_t k = rng_index(rng, n);
      double keep = theta.v[k];
      theta.v[k] = keep + h;
      double up = loss_at();
      theta.v[k] = keep - h;
      double down = loss_at();
      theta.v[k] = keep;
      double fd = (up - down) / (2.0 * h);
      double a = analytic[i].v[k];
      double rel = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-3});
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

CheckpointData make_train_checkpoint(Parameters& params, AdamState& opt,
                                     std::uint64_t vocab_fingerprint) {
  params.round_to_f32();
  opt.round_to_f32();
  CheckpointData data;
  data.config = params.config();
  data.vocab_fingerprint = vocab_fingerprint;
  data.step = opt.step;
  for (std::size_t i = 0; i < params.count(); ++i)
    data.tensors.emplace_back(params.name_at(i), params.at(i));
  for (std::size_t i = 0; i < params.count(); ++i)
    data.tensors.emplace_back("opt.m." + params.name_at(i), opt.m[i]);
  for (std::size_t i = 0; i < params.count(); ++i)
    data.tensors.emplace_back("opt.v." + params.name_at(i), opt.v[i]);
  return data;
}

AdamState restore_train_checkpoint(const CheckpointData& data, Parameters& params,
                                   std::uint64_t expect_fingerprint) {
  restore_parameters(data, params, expect_fingerprint);
  AdamState opt = AdamState::fresh(params);
  opt.step = data.step;
  bool any = false;
  for (std::size_t i = 0; i < params.count(); ++i) {
    const Tensor* m = data.find("opt.m." + params.name_at(i));
    const Tensor* v = data.find("opt.v." + params.name_at(i));
    if (!m && !v) continue;
    if (!m || !v || !m->same_shape(params.at(i)) || !v->same_shape(params.at(i)))
      throw Error(ErrorCategory::Config,
                  "checkpoint optimizer state is incomplete for " + params.name_at(i));
    opt.m[i] = *m;
    opt.v[i] = *v;
    any = true;
  }
  if (!any && data.step != 0)
    throw Error(ErrorCategory::Config, "checkpoint lacks optimizer state but has steps");
  return opt;
}

}  // namespace dictdis
