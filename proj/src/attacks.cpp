#include "witch/attacks.hpp"

#include <cassert>
#include <cmath>

namespace witch {

void validate_budget(const PerturbationBudget& budget) {
  require(budget.epsilon >= 0.0f, "budget epsilon must be non-negative");
  require(budget.pixel_min < budget.pixel_max, "budget pixel range is empty");
  require(budget.x.size() > 0, "budget anchor is empty");
  for (std::int64_t i = 0; i < budget.x.size(); ++i)
    require(budget.x[i] >= budget.pixel_min && budget.x[i] <= budget.pixel_max,
            "budget anchor has pixels outside the valid range");
}

bool in_budget(const Tensor& delta, const PerturbationBudget& budget, float slack) {
  if (!delta.same_shape(budget.x)) return false;
  for (std::int64_t i = 0; i < delta.size(); ++i) {
    float d = delta[i];
    if (d > budget.epsilon || d < -budget.epsilon) return false;
    float v = budget.x[i] + d;
    if (v < budget.pixel_min - slack || v > budget.pixel_max + slack) return false;
  }
  return true;
}

const char* family_name(AttackFamily f) {
  switch (f) {
    case AttackFamily::Fgsm: return "fgsm";
    case AttackFamily::Pgd: return "pgd";
    case AttackFamily::PgdRestarts: return "pgd-restarts";
    case AttackFamily::Witchcraft: return "witchcraft";
    case AttackFamily::MultiTargeted: return "multi-targeted";
  }
  return "?";
}

std::optional<AttackFamily> family_from_name(const std::string& name) {
  if (name == "fgsm") return AttackFamily::Fgsm;
  if (name == "pgd") return AttackFamily::Pgd;
  if (name == "pgd-restarts") return AttackFamily::PgdRestarts;
  if (name == "witchcraft") return AttackFamily::Witchcraft;
  if (name == "multi-targeted") return AttackFamily::MultiTargeted;
  return std::nullopt;
}

namespace {

inline void project_inplace(Tensor& delta, const PerturbationBudget& budget) {
  const float eps = budget.epsilon;
  for (std::int64_t i = 0; i < delta.size(); ++i) {
    float d = delta[i];
    d = d > eps ? eps : (d < -eps ? -eps : d);
    float lo = budget.pixel_min - budget.x[i];
    float hi = budget.pixel_max - budget.x[i];
    d = d > hi ? hi : (d < lo ? lo : d);
    delta[i] = d;
  }
}

inline float xent_from_logits(const Tensor& logits, int y) {
  return kern::softmax_xent(logits.data.data(), y, static_cast<int>(logits.size()),
                            static_cast<float*>(nullptr));
}

struct LoopSpec {
  int loss_label = 0;   // label whose loss drives the update
  int true_label = 0;   // misclassifying this label counts as success
  float direction = 1;  // +1 ascend driving loss, -1 descend
  int steps = 1;
  bool early_stop = true;
  bool randomized_field = false;  // fresh U(0, 2a) field per step
  bool zero_variance = false;
  float step_param = 0;  // fixed step, or expected step when randomized
};

// Shared iteration core. Visits iterates delta_0 .. delta_n, evaluating each
// exactly once; the forward pass that checks an iterate is also the forward
// pass of the next gradient evaluation, so a full run costs n backward and
// n+1 forward passes.
AttackResult run_loop(const Model& model, const Tensor& x, const PerturbationBudget& budget,
                      Tensor delta, RngStream rng, const LoopSpec& sp,
                      const StepObserver& observer) {
  validate_budget(budget);
  require(delta.same_shape(x), "delta shape does not match input");
  require(x.shape == model.input_shape, "input shape does not match model");
  require(sp.true_label >= 0 && sp.true_label < model.class_count, "label out of range");

  AttackResult res;
  res.loss_trace.reserve(static_cast<std::size_t>(sp.steps));
  Tensor witness;
  float witness_loss = 0.0f;

  if (observer) observer(0, delta);
  assert(in_budget(delta, budget));

  Tensor perturbed = add(x, delta);
  Tensor field;

  for (int t = 0; t <= sp.steps; ++t) {
    ForwardTrace trace;
    Tensor logits = forward(model, perturbed, &trace);
    if (!res.success && predict_logits(logits) != sp.true_label) {
      res.success = true;
      res.first_success_step = t;
      witness = delta;
      witness_loss = xent_from_logits(logits, sp.true_label);
    }
    if (res.success && sp.early_stop) {
      res.delta = std::move(witness);
      res.final_loss = witness_loss;
      return res;
    }
    if (t == sp.steps) {
      res.delta = std::move(delta);
      res.final_loss = xent_from_logits(logits, sp.true_label);
      return res;
    }

    Tensor dlogits(logits.shape);
    float drive_loss = kern::softmax_xent(logits.data.data(), sp.loss_label, model.class_count,
                                          dlogits.data.data());
    Tensor grad = backward(model, trace, dlogits);
    grad_eval_counter().fetch_add(1, std::memory_order_relaxed);
    res.grad_evals += 1;
    res.loss_trace.push_back(drive_loss);

    const float* steps_at = nullptr;
    if (sp.randomized_field) {
      if (sp.zero_variance)
        field = Tensor::full(x.shape, sp.step_param);
      else
        field = sample_step_field(sp.step_param, x.shape, rng);
      steps_at = field.data.data();
    }
    for (std::int64_t i = 0; i < delta.size(); ++i) {
      float g = grad[i];
      float sg = g > 0.0f ? 1.0f : (g < 0.0f ? -1.0f : 0.0f);
      float st = steps_at ? steps_at[i] : sp.step_param;
      delta[i] += sp.direction * st * sg;
    }
    project_inplace(delta, budget);
    perturbed = add(x, delta);
    if (observer) observer(t + 1, delta);
    assert(in_budget(delta, budget));
  }
  return res;  // unreachable
}

}  // namespace

Tensor project(const Tensor& delta, const PerturbationBudget& budget) {
  validate_budget(budget);
  require(delta.same_shape(budget.x), "project shape mismatch: " + shape_str(delta.shape) +
                                          " vs " + shape_str(budget.x.shape));
  Tensor out = delta;
  project_inplace(out, budget);
  return out;
}

Tensor sample_init(const PerturbationBudget& budget, RngStream& rng) {
  validate_budget(budget);
  Tensor delta(budget.x.shape);
  const float eps = budget.epsilon;
  for (std::int64_t i = 0; i < delta.size(); ++i) {
    float lo = std::max(-eps, budget.pixel_min - budget.x[i]);
    float hi = std::min(eps, budget.pixel_max - budget.x[i]);
    delta[i] = static_cast<float>(rng.uniform(lo, hi));
  }
  return delta;
}

Tensor sample_step_field(float expected_step, const std::vector<int>& shape, RngStream& rng) {
  require(expected_step >= 0.0f, "expected step size must be non-negative");
  Tensor field(shape);
  for (std::int64_t i = 0; i < field.size(); ++i)
    field[i] = static_cast<float>(rng.uniform(0.0, 2.0 * expected_step));
  return field;
}

AttackResult fgsm(const Model& model, const Tensor& x, int y, const PerturbationBudget& budget) {
  LoopSpec sp;
  sp.loss_label = y;
  sp.true_label = y;
  sp.direction = 1.0f;
  sp.steps = 1;
  sp.early_stop = false;
  sp.step_param = budget.epsilon;
  return run_loop(model, x, budget, Tensor::zeros(x.shape), RngStream::seeded(0), sp, {});
}

AttackResult pgd(const Model& model, const Tensor& x, int y, const PerturbationBudget& budget,
                 float step_size, int steps, bool early_stop, bool random_init, RngStream rng,
                 const StepObserver& observer) {
  require(step_size > 0.0f, "pgd step size must be positive");
  require(steps >= 1, "pgd needs at least one step");
  validate_budget(budget);
  Tensor delta = random_init ? sample_init(budget, rng) : Tensor::zeros(x.shape);
  LoopSpec sp;
  sp.loss_label = y;
  sp.true_label = y;
  sp.direction = 1.0f;
  sp.steps = steps;
  sp.early_stop = early_stop;
  sp.step_param = step_size;
  return run_loop(model, x, budget, std::move(delta), rng, sp, observer);
}

AttackResult pgd_restarts(const Model& model, const Tensor& x, int y,
                          const PerturbationBudget& budget, float step_size, int steps,
                          int restarts, RngStream rng, const StepObserver& observer) {
  require(restarts >= 1, "restart count must be at least 1");
  AttackResult best;
  std::uint64_t total_evals = 0;
  for (int r = 0; r < restarts; ++r) {
    RngStream sub = RngStream::derive(rng.state, static_cast<std::uint64_t>(r), 0);
    AttackResult run = pgd(model, x, y, budget, step_size, steps, /*early_stop=*/true,
                           /*random_init=*/true, sub, observer);
    total_evals += run.grad_evals;
    if (run.success) {
      run.grad_evals = total_evals;
      return run;
    }
    if (r == 0 || run.final_loss > best.final_loss) best = std::move(run);
  }
  best.grad_evals = total_evals;
  return best;
}

AttackResult witchcraft(const Model& model, const Tensor& x, int y,
                        const PerturbationBudget& budget, float expected_step, int steps,
                        RngStream rng, bool early_stop, bool zero_variance,
                        const StepObserver& observer) {
  require(expected_step > 0.0f, "expected step size must be positive");
  require(steps >= 1, "witchcraft needs at least one step");
  validate_budget(budget);
  Tensor delta = sample_init(budget, rng);
  LoopSpec sp;
  sp.loss_label = y;
  sp.true_label = y;
  sp.direction = 1.0f;
  sp.steps = steps;
  sp.early_stop = early_stop;
  sp.randomized_field = true;
  sp.zero_variance = zero_variance;
  sp.step_param = expected_step;
  return run_loop(model, x, budget, std::move(delta), rng, sp, observer);
}

Tensor targeted_step(const Model& model, const Tensor& x, int y_true, int target,
                     const PerturbationBudget& budget, const Tensor& delta,
                     const Tensor& step_field) {
  require(target != y_true, "targeted step requires a label other than the true one");
  require(target >= 0 && target < model.class_count, "target label out of range");
  require(step_field.same_shape(x), "step field shape does not match input");
  require(delta.same_shape(x), "delta shape does not match input");
  Tensor grad = grad_input(model, add(x, delta), target);
  Tensor next = delta;
  for (std::int64_t i = 0; i < next.size(); ++i) {
    float g = grad[i];
    float sg = g > 0.0f ? 1.0f : (g < 0.0f ? -1.0f : 0.0f);
    next[i] -= step_field[i] * sg;
  }
  project_inplace(next, budget);
  return next;
}

AttackResult multi_targeted(const Model& model, const Tensor& x, int y,
                            const PerturbationBudget& budget, const AttackConfig& cfg,
                            RngStream rng) {
  require(model.class_count >= 2, "multi-targeted attack needs at least 2 classes");
  require(y >= 0 && y < model.class_count, "label out of range");
  require(cfg.step > 0.0f, "step size must be positive");
  require(cfg.steps >= 1, "step count must be at least 1");

  AttackResult best;
  bool have_any = false;
  bool have_success = false;
  std::uint64_t total_evals = 0;
  for (int target = 0; target < model.class_count; ++target) {
    if (target == y) continue;
    RngStream sub = RngStream::derive(rng.state, static_cast<std::uint64_t>(target), 1);
    Tensor delta = cfg.random_init ? sample_init(budget, sub) : Tensor::zeros(x.shape);
    LoopSpec sp;
    sp.loss_label = target;
    sp.true_label = y;
    sp.direction = -1.0f;  // descend the target-label loss
    sp.steps = cfg.steps;
    sp.early_stop = cfg.early_stop;
    sp.step_param = cfg.step;
    AttackResult run = run_loop(model, x, budget, std::move(delta), sub, sp, {});
    total_evals += run.grad_evals;
    // Keep the success with the highest true-label loss; without any
    // success, the run whose final point has the highest true-label loss.
    bool better;
    if (run.success)
      better = !have_success || run.final_loss > best.final_loss;
    else
      better = !have_success && (!have_any || run.final_loss > best.final_loss);
    if (better) {
      best = std::move(run);
      have_success = best.success;
    }
    have_any = true;
  }
  best.grad_evals = total_evals;
  return best;
}

AttackResult run_attack(const Model& model, const Tensor& x, int y,
                        const PerturbationBudget& budget, const AttackConfig& cfg,
                        std::uint64_t example_index, const StepObserver& observer) {
  RngStream base = RngStream::derive(cfg.seed, example_index);
  // pgd, witchcraft and restart 0 of pgd-restarts share the same substream,
  // so matched-seed comparisons start from the identical initialization.
  RngStream run_stream = RngStream::derive(base.state, 0, 0);
  switch (cfg.family) {
    case AttackFamily::Fgsm:
      return fgsm(model, x, y, budget);
    case AttackFamily::Pgd:
      return pgd(model, x, y, budget, cfg.step, cfg.steps, cfg.early_stop, cfg.random_init,
                 run_stream, observer);
    case AttackFamily::PgdRestarts:
      return pgd_restarts(model, x, y, budget, cfg.step, cfg.steps, cfg.restarts, base,
                          observer);
    case AttackFamily::Witchcraft:
      return witchcraft(model, x, y, budget, cfg.step, cfg.steps, run_stream, cfg.early_stop,
                        cfg.zero_variance, observer);
    case AttackFamily::MultiTargeted:
      return multi_targeted(model, x, y, budget, cfg, base);
  }
  contract_violation("unknown attack family");
}

}  // namespace witch
