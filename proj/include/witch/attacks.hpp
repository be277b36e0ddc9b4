#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "witch/model.hpp"
#include "witch/rng.hpp"
#include "witch/tensor.hpp"

namespace witch {

// The permissible set S: the l-inf ball of radius epsilon around the clean
// input x, intersected with the valid pixel range.
struct PerturbationBudget {
  float epsilon = 0.3f;
  float pixel_min = 0.0f;
  float pixel_max = 1.0f;
  Tensor x;
};

void validate_budget(const PerturbationBudget& budget);

// Membership test for S. The radius check is exact; the pixel-range check
// allows `slack` of float rounding because x + delta is re-formed after
// projection.
bool in_budget(const Tensor& delta, const PerturbationBudget& budget, float slack = 1e-6f);

enum class AttackFamily { Fgsm, Pgd, PgdRestarts, Witchcraft, MultiTargeted };

const char* family_name(AttackFamily f);
std::optional<AttackFamily> family_from_name(const std::string& name);

struct AttackConfig {
  AttackFamily family = AttackFamily::Pgd;
  // Fixed step size for pgd/pgd-restarts/multi-targeted; expected step size
  // for witchcraft (per-coordinate steps are drawn from U(0, 2*step)).
  float step = 0.01f;
  int steps = 40;
  int restarts = 1;
  bool early_stop = true;
  bool random_init = true;
  // Ablation switch: force the witchcraft step field to the constant
  // expected value, which collapses the update to fixed-step pgd.
  bool zero_variance = false;
  std::uint64_t seed = 0;
};

// Outcome of one attack run. An example counts as successfully attacked if
// ANY visited iterate (including the initialization and the final point)
// misclassifies; this rule is applied uniformly to every family so that
// comparisons measure the algorithm, not the bookkeeping. `delta` is what
// the attack returns: the first misclassifying iterate when early stopping
// fires, otherwise the final iterate.
struct AttackResult {
  Tensor delta;
  bool success = false;
  std::optional<int> first_success_step;  // iterate index; 0 = initialization
  std::vector<float> loss_trace;          // driving loss, one entry per executed step
  float final_loss = 0.0f;                // true-label loss at the returned delta
  std::uint64_t grad_evals = 0;           // backward passes consumed
};

// Observer invoked at every visited iterate: (iterate index, delta).
// Used by feasibility tests; ignored when empty.
using StepObserver = std::function<void(int, const Tensor&)>;

// Clamp delta to [-eps, eps], then clamp x + delta to the pixel range.
// Implemented as a per-coordinate interval clamp, which is the same map and
// keeps |delta_i| <= eps exact in float arithmetic. Idempotent.
Tensor project(const Tensor& delta, const PerturbationBudget& budget);

// Uniform draw from S: coordinate i is uniform on
// [max(-eps, pixel_min - x_i), min(eps, pixel_max - x_i)].
Tensor sample_init(const PerturbationBudget& budget, RngStream& rng);

// I.i.d. per-coordinate step sizes, uniform on [0, 2a]; mean a.
Tensor sample_step_field(float expected_step, const std::vector<int>& shape, RngStream& rng);

// Single signed-gradient step at the clean input with step size eps.
AttackResult fgsm(const Model& model, const Tensor& x, int y, const PerturbationBudget& budget);

// Iterated signed-gradient ascent with scalar step size and projection.
AttackResult pgd(const Model& model, const Tensor& x, int y, const PerturbationBudget& budget,
                 float step_size, int steps, bool early_stop, bool random_init, RngStream rng,
                 const StepObserver& observer = {});

// R independent pgd runs from fresh random initializations (substreams
// derive(rng.state, r)); returns the first success, else the run with the
// highest final loss.
AttackResult pgd_restarts(const Model& model, const Tensor& x, int y,
                          const PerturbationBudget& budget, float step_size, int steps,
                          int restarts, RngStream rng, const StepObserver& observer = {});

// Random init from U(S); each step draws a fresh per-coordinate step field
// from U(0, 2a) and applies it to the gradient sign via Hadamard product,
// then projects; breaks as soon as the classifier is fooled.
AttackResult witchcraft(const Model& model, const Tensor& x, int y,
                        const PerturbationBudget& budget, float expected_step, int steps,
                        RngStream rng, bool early_stop = true, bool zero_variance = false,
                        const StepObserver& observer = {});

// One projected step descending the loss on `target`; returns the updated
// delta. The step field is applied coordinate-wise.
Tensor targeted_step(const Model& model, const Tensor& x, int y_true, int target,
                     const PerturbationBudget& budget, const Tensor& delta,
                     const Tensor& step_field);

// Targeted attack toward every incorrect class (cfg.steps each, fixed
// cfg.step); among successful runs returns the one with the highest
// true-label loss, else the run with the highest final true-label loss.
AttackResult multi_targeted(const Model& model, const Tensor& x, int y,
                            const PerturbationBudget& budget, const AttackConfig& cfg,
                            RngStream rng);

// Family dispatch used by the bench harness. Per-example substreams are
// derived from (cfg.seed, example_index), so results do not depend on batch
// order or worker count.
AttackResult run_attack(const Model& model, const Tensor& x, int y,
                        const PerturbationBudget& budget, const AttackConfig& cfg,
                        std::uint64_t example_index = 0, const StepObserver& observer = {});

}  // namespace witch
