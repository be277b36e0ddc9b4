#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "witch/attacks.hpp"
#include "witch/data_io.hpp"
#include "witch/model.hpp"

namespace witch {

struct TrialOutcome {
  std::uint64_t seed = 0;
  double robust_accuracy = 0.0;
  std::uint64_t grad_evals = 0;
};

// Robust accuracy of one attack configuration on one model. An example is
// robust iff it is cleanly correct and no visited attack iterate
// misclassifies it.
struct RobustAccuracyReport {
  AttackConfig config;
  float epsilon = 0.0f;
  int examples = 0;
  double clean_accuracy = 0.0;
  std::vector<TrialOutcome> trials;

  double mean_robust_accuracy() const;
};

struct SweepResult {
  std::string parameter;     // "step_param" or "steps"
  std::vector<double> grid;  // strictly increasing
  // reports[g][f]: grid point g, family f; families are fixed to
  // {pgd, witchcraft} with matched seeds, steps and budget.
  std::vector<std::vector<RobustAccuracyReport>> reports;
};

struct EvalOptions {
  int max_examples = 1000;  // evaluates the first N examples
  float epsilon = 0.3f;
  float pixel_min = 0.0f;
  float pixel_max = 1.0f;
};

// One trial (cfg.seed). Examples run in parallel; per-example substreams
// make the outcome independent of worker count. The gradient-evaluation
// total is cross-checked against the instrumented counter.
RobustAccuracyReport eval_robust_accuracy(const Model& model, const LabeledDataset& data,
                                          const AttackConfig& cfg, const EvalOptions& opts);

// Multiple trials of the same configuration, one per master seed.
RobustAccuracyReport eval_trials(const Model& model, const LabeledDataset& data,
                                 AttackConfig cfg, const EvalOptions& opts,
                                 const std::vector<std::uint64_t>& seeds);

// Fixed-step pgd (tau = a) vs witchcraft (expected step a) across a grid of
// step sizes, matched seeds and step counts.
SweepResult sweep_expected_step(const Model& model, const LabeledDataset& data,
                                const std::vector<double>& grid, int steps, int trials,
                                const EvalOptions& opts, std::uint64_t master_seed);

// Same comparison across a grid of step counts at a fixed expected step.
SweepResult sweep_steps(const Model& model, const LabeledDataset& data,
                        const std::vector<int>& grid, float expected_step, int trials,
                        const EvalOptions& opts, std::uint64_t master_seed);

// CSV with one row per trial:
// attack,steps,step_param,restarts,epsilon,seed,examples,clean_acc,robust_acc,grad_evals
std::string report_csv(const RobustAccuracyReport& report);
std::string sweep_rows_csv(const SweepResult& sweep);
// Plot data: swept value, one mean-accuracy column per attack family.
std::string sweep_plot_csv(const SweepResult& sweep);

void emit_report(const RobustAccuracyReport& report, const std::string& path);
void emit_sweep(const SweepResult& sweep, const std::string& rows_path,
                const std::string& plot_path);

}  // namespace witch
