#include "witch/bench.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace witch {

double RobustAccuracyReport::mean_robust_accuracy() const {
  if (trials.empty()) return 0.0;
  double s = 0.0;
  for (const auto& t : trials) s += t.robust_accuracy;
  return s / static_cast<double>(trials.size());
}

RobustAccuracyReport eval_robust_accuracy(const Model& model, const LabeledDataset& data,
                                          const AttackConfig& cfg, const EvalOptions& opts) {
  require(data.count() >= 1, "evaluation dataset is empty");
  require(data.class_count == model.class_count, "dataset classes do not match model");
  require(data.image_shape() == model.input_shape, "dataset images do not match model input");
  require(opts.max_examples >= 1, "need at least one evaluation example");
  require(cfg.steps >= 1 && cfg.restarts >= 1, "attack config needs steps >= 1, restarts >= 1");

  const int n = std::min(opts.max_examples, data.count());
  std::vector<std::uint8_t> robust(static_cast<std::size_t>(n), 0);
  std::vector<std::uint8_t> clean(static_cast<std::size_t>(n), 0);
  std::vector<std::uint64_t> evals(static_cast<std::size_t>(n), 0);

  const std::uint64_t counter_before = grad_eval_counter().load();

#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    Tensor x = data.image(i);
    int y = data.label(i);
    if (predict(model, x) != y) continue;  // cleanly wrong: attacked for free
    clean[i] = 1;
    PerturbationBudget budget{opts.epsilon, opts.pixel_min, opts.pixel_max, x};
    AttackResult res = run_attack(model, x, y, budget, cfg, static_cast<std::uint64_t>(i));
    robust[i] = res.success ? 0 : 1;
    evals[i] = res.grad_evals;
  }

  std::uint64_t total_evals = 0;
  std::int64_t clean_correct = 0, robust_count = 0;
  for (int i = 0; i < n; ++i) {
    total_evals += evals[i];
    clean_correct += clean[i];
    robust_count += robust[i];
  }

  const std::uint64_t counter_after = grad_eval_counter().load();
  if (counter_after - counter_before != total_evals)
    throw std::logic_error("gradient-evaluation accounting mismatch: counter saw " +
                           std::to_string(counter_after - counter_before) + ", results sum to " +
                           std::to_string(total_evals));

  RobustAccuracyReport report;
  report.config = cfg;
  report.epsilon = opts.epsilon;
  report.examples = n;
  report.clean_accuracy = static_cast<double>(clean_correct) / n;
  report.trials.push_back(
      {cfg.seed, static_cast<double>(robust_count) / n, total_evals});
  if (report.trials[0].robust_accuracy > report.clean_accuracy)
    throw std::logic_error("robust accuracy exceeds clean accuracy");
  return report;
}

RobustAccuracyReport eval_trials(const Model& model, const LabeledDataset& data,
                                 AttackConfig cfg, const EvalOptions& opts,
                                 const std::vector<std::uint64_t>& seeds) {
  require(!seeds.empty(), "need at least one trial seed");
  RobustAccuracyReport merged;
  for (std::size_t t = 0; t < seeds.size(); ++t) {
    cfg.seed = seeds[t];
    RobustAccuracyReport one = eval_robust_accuracy(model, data, cfg, opts);
    if (t == 0) merged = one;
    else merged.trials.push_back(one.trials[0]);
  }
  return merged;
}

namespace {

std::vector<std::uint64_t> trial_seeds(std::uint64_t master, int trials) {
  std::vector<std::uint64_t> seeds;
  seeds.reserve(static_cast<std::size_t>(trials));
  for (int t = 0; t < trials; ++t) seeds.push_back(master + static_cast<std::uint64_t>(t));
  return seeds;
}

void require_increasing(const std::vector<double>& grid) {
  require(!grid.empty(), "sweep grid is empty");
  for (std::size_t i = 1; i < grid.size(); ++i)
    require(grid[i] > grid[i - 1], "sweep grid must be strictly increasing");
}

}  // namespace

SweepResult sweep_expected_step(const Model& model, const LabeledDataset& data,
                                const std::vector<double>& grid, int steps, int trials,
                                const EvalOptions& opts, std::uint64_t master_seed) {
  require_increasing(grid);
  require(trials >= 1, "need at least one trial");
  SweepResult sweep;
  sweep.parameter = "step_param";
  sweep.grid = grid;
  auto seeds = trial_seeds(master_seed, trials);
  for (double a : grid) {
    AttackConfig pgd_cfg;
    pgd_cfg.family = AttackFamily::Pgd;
    pgd_cfg.step = static_cast<float>(a);
    pgd_cfg.steps = steps;
    AttackConfig witch_cfg = pgd_cfg;
    witch_cfg.family = AttackFamily::Witchcraft;
    sweep.reports.push_back({eval_trials(model, data, pgd_cfg, opts, seeds),
                             eval_trials(model, data, witch_cfg, opts, seeds)});
  }
  return sweep;
}

SweepResult sweep_steps(const Model& model, const LabeledDataset& data,
                        const std::vector<int>& grid, float expected_step, int trials,
                        const EvalOptions& opts, std::uint64_t master_seed) {
  std::vector<double> as_double(grid.begin(), grid.end());
  require_increasing(as_double);
  require(trials >= 1, "need at least one trial");
  SweepResult sweep;
  sweep.parameter = "steps";
  sweep.grid = as_double;
  auto seeds = trial_seeds(master_seed, trials);
  for (int n : grid) {
    AttackConfig pgd_cfg;
    pgd_cfg.family = AttackFamily::Pgd;
    pgd_cfg.step = expected_step;
    pgd_cfg.steps = n;
    AttackConfig witch_cfg = pgd_cfg;
    witch_cfg.family = AttackFamily::Witchcraft;
    sweep.reports.push_back({eval_trials(model, data, pgd_cfg, opts, seeds),
                             eval_trials(model, data, witch_cfg, opts, seeds)});
  }
  return sweep;
}

namespace {

constexpr char kHeader[] =
    "attack,steps,step_param,restarts,epsilon,seed,examples,clean_acc,robust_acc,grad_evals\n";

void append_rows(std::string& out, const RobustAccuracyReport& r) {
  char line[256];
  for (const TrialOutcome& t : r.trials) {
    std::snprintf(line, sizeof(line), "%s,%d,%.6g,%d,%.6g,%llu,%d,%.6f,%.6f,%llu\n",
                  family_name(r.config.family), r.config.steps,
                  static_cast<double>(r.config.step), r.config.restarts,
                  static_cast<double>(r.epsilon),
                  static_cast<unsigned long long>(t.seed), r.examples, r.clean_accuracy,
                  t.robust_accuracy, static_cast<unsigned long long>(t.grad_evals));
    out += line;
  }
}

void write_text(const std::string& text, const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) throw std::runtime_error("write failure on '" + path + "'");
}

}  // namespace

std::string report_csv(const RobustAccuracyReport& report) {
  std::string out = kHeader;
  append_rows(out, report);
  return out;
}

std::string sweep_rows_csv(const SweepResult& sweep) {
  std::string out = kHeader;
  for (const auto& point : sweep.reports)
    for (const auto& report : point) append_rows(out, report);
  return out;
}

std::string sweep_plot_csv(const SweepResult& sweep) {
  std::string out = sweep.parameter;
  if (!sweep.reports.empty())
    for (const auto& report : sweep.reports[0]) {
      out += ",";
      out += family_name(report.config.family);
    }
  out += "\n";
  char buf[64];
  for (std::size_t g = 0; g < sweep.grid.size(); ++g) {
    std::snprintf(buf, sizeof(buf), "%.6g", sweep.grid[g]);
    out += buf;
    for (const auto& report : sweep.reports[g]) {
      std::snprintf(buf, sizeof(buf), ",%.6f", report.mean_robust_accuracy());
      out += buf;
    }
    out += "\n";
  }
  return out;
}

void emit_report(const RobustAccuracyReport& report, const std::string& path) {
  write_text(report_csv(report), path);
}

void emit_sweep(const SweepResult& sweep, const std::string& rows_path,
                const std::string& plot_path) {
  write_text(sweep_rows_csv(sweep), rows_path);
  write_text(sweep_plot_csv(sweep), plot_path);
}

}  // namespace witch
