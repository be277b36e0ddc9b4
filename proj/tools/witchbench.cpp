// witchbench: train small classifiers, attack them, and reproduce the
// step-size / step-count comparisons between fixed-step pgd and the
// randomized-step witchcraft attack. All runs are deterministic under
// --seed; CSV outputs are byte-stable across reruns and thread counts.

#include <omp.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "witch/attacks.hpp"
#include "witch/bench.hpp"
#include "witch/data_io.hpp"
#include "witch/model.hpp"
#include "witch/stats.hpp"
#include "witch/train.hpp"
#include "witch/weights_io.hpp"

namespace {

struct DataOptions {
  std::string images_path;
  std::string labels_path;
  int synthetic_digits = 0;
  std::string synthetic_blobs;  // "classes,dims,count"
  std::uint64_t data_seed = 1;
};

void add_data_options(CLI::App* cmd, DataOptions& opts) {
  cmd->add_option("--images", opts.images_path, "IDX image file (optionally gzipped)");
  cmd->add_option("--labels", opts.labels_path, "IDX label file (optionally gzipped)");
  cmd->add_option("--synthetic-digits", opts.synthetic_digits,
                  "generate N synthetic 28x28 digit examples instead of loading files");
  cmd->add_option("--synthetic-blobs", opts.synthetic_blobs,
                  "generate Gaussian blobs, format classes,dims,count");
  cmd->add_option("--data-seed", opts.data_seed, "seed for synthetic data");
}

witch::LabeledDataset load_data(const DataOptions& opts) {
  if (!opts.images_path.empty() || !opts.labels_path.empty()) {
    if (opts.images_path.empty() || opts.labels_path.empty())
      throw CLI::ValidationError("--images and --labels must be given together");
    return witch::load_idx_dataset(opts.images_path, opts.labels_path);
  }
  if (opts.synthetic_digits > 0)
    return witch::synthetic_digits(opts.synthetic_digits, opts.data_seed);
  if (!opts.synthetic_blobs.empty()) {
    int classes = 0, dims = 0, count = 0;
    if (std::sscanf(opts.synthetic_blobs.c_str(), "%d,%d,%d", &classes, &dims, &count) != 3)
      throw CLI::ValidationError("--synthetic-blobs expects classes,dims,count");
    return witch::synthetic_blobs(classes, dims, count, opts.data_seed);
  }
  throw CLI::ValidationError(
      "no data source: give --images/--labels or a --synthetic-* option");
}

std::vector<double> parse_grid(const std::string& spec) {
  std::vector<double> grid;
  std::stringstream ss(spec);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) grid.push_back(std::stod(tok));
  }
  if (grid.empty()) throw CLI::ValidationError("empty grid '" + spec + "'");
  return grid;
}

int run_selftest();

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"attack benchmark harness (pgd / witchcraft and friends)"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags like --threads may follow the subcommand
  app.set_config("--config", "",
                 "key=value file; prefix keys with the subcommand "
                 "(attack.steps=40) or use an [attack] section. Flags win.");

  int threads = 0;
  app.add_option("--threads", threads, "OpenMP thread count (0 = runtime default)");

  // ---- train ----
  auto* train_cmd = app.add_subcommand("train", "train a model and save its weights");
  DataOptions train_data;
  add_data_options(train_cmd, train_data);
  std::string arch_name = "cnn-2conv";
  int epochs = 5, batch = 32;
  double lr = 0.1;
  std::uint64_t train_seed = 0;
  bool adversarial = false, adv_witchcraft = false;
  double adv_eps = 0.3, adv_step_size = 0.1;
  int adv_steps = 7;
  std::string weights_out;
  train_cmd->add_option("--arch", arch_name, "mlp-small or cnn-2conv")
      ->check(CLI::IsMember({"mlp-small", "cnn-2conv"}));
  train_cmd->add_option("--epochs", epochs);
  train_cmd->add_option("--batch", batch);
  train_cmd->add_option("--lr", lr);
  train_cmd->add_option("--seed", train_seed);
  train_cmd->add_flag("--adversarial", adversarial, "train on attacked minibatches");
  train_cmd->add_option("--eps", adv_eps, "adversarial training radius");
  train_cmd->add_option("--adv-steps", adv_steps, "inner attack steps (default 7)");
  train_cmd->add_option("--adv-step-size", adv_step_size, "inner attack step size");
  train_cmd->add_flag("--adv-witchcraft", adv_witchcraft,
                      "use the randomized-step attack inside training");
  train_cmd->add_option("--weights-out", weights_out, "output weight file")->required();

  // ---- attack ----
  auto* attack_cmd = app.add_subcommand("attack", "evaluate robust accuracy under one attack");
  DataOptions attack_data;
  add_data_options(attack_cmd, attack_data);
  std::string weights_in, family_name = "pgd", csv_out;
  double eps = 0.3, step_param = 0.01;
  int steps = 40, restarts = 1, examples = 1000, trials = 1;
  std::uint64_t attack_seed = 0;
  bool no_early_stop = false, no_random_init = false, zero_variance = false;
  attack_cmd->add_option("--weights-in", weights_in)->required();
  attack_cmd->add_option("--family", family_name,
                         "fgsm, pgd, pgd-restarts, witchcraft or multi-targeted");
  attack_cmd->add_option("--eps", eps, "l-inf radius");
  attack_cmd->add_option("--steps", steps);
  attack_cmd->add_option("--step", step_param, "fixed step (pgd) / expected step (witchcraft)");
  attack_cmd->add_option("--restarts", restarts);
  attack_cmd->add_option("--seed", attack_seed);
  attack_cmd->add_option("--examples", examples, "evaluate the first N examples");
  attack_cmd->add_option("--trials", trials, "repeat with seeds seed..seed+T-1");
  attack_cmd->add_flag("--no-early-stop", no_early_stop);
  attack_cmd->add_flag("--no-random-init", no_random_init);
  attack_cmd->add_flag("--zero-variance", zero_variance,
                       "witchcraft ablation: constant step field");
  attack_cmd->add_option("--csv-out", csv_out, "write the report CSV here");

  // ---- sweeps ----
  auto* sweep_a_cmd =
      app.add_subcommand("sweep-step-size", "pgd vs witchcraft across step sizes");
  auto* sweep_n_cmd = app.add_subcommand("sweep-steps", "pgd vs witchcraft across step counts");
  DataOptions sweep_a_data, sweep_n_data;
  add_data_options(sweep_a_cmd, sweep_a_data);
  add_data_options(sweep_n_cmd, sweep_n_data);
  std::string sweep_a_weights, sweep_n_weights;
  std::string grid_a = "0.01,0.02,0.03", grid_n = "10,40,100";
  std::string sweep_a_csv = "sweep_step_size.csv", sweep_a_plot = "sweep_step_size_plot.csv";
  std::string sweep_n_csv = "sweep_steps.csv", sweep_n_plot = "sweep_steps_plot.csv";
  double sweep_a_eps = 0.3, sweep_n_eps = 0.3, sweep_n_step = 0.01;
  int sweep_a_steps = 40, sweep_a_trials = 5, sweep_n_trials = 5;
  int sweep_a_examples = 1000, sweep_n_examples = 1000;
  std::uint64_t sweep_a_seed = 0, sweep_n_seed = 0;
  sweep_a_cmd->add_option("--weights-in", sweep_a_weights)->required();
  sweep_a_cmd->add_option("--grid", grid_a, "comma-separated step sizes");
  sweep_a_cmd->add_option("--steps", sweep_a_steps);
  sweep_a_cmd->add_option("--trials", sweep_a_trials);
  sweep_a_cmd->add_option("--eps", sweep_a_eps);
  sweep_a_cmd->add_option("--examples", sweep_a_examples);
  sweep_a_cmd->add_option("--seed", sweep_a_seed);
  sweep_a_cmd->add_option("--csv-out", sweep_a_csv);
  sweep_a_cmd->add_option("--plot-out", sweep_a_plot);
  sweep_n_cmd->add_option("--weights-in", sweep_n_weights)->required();
  sweep_n_cmd->add_option("--grid", grid_n, "comma-separated step counts");
  sweep_n_cmd->add_option("--step", sweep_n_step, "expected / fixed step size");
  sweep_n_cmd->add_option("--trials", sweep_n_trials);
  sweep_n_cmd->add_option("--eps", sweep_n_eps);
  sweep_n_cmd->add_option("--examples", sweep_n_examples);
  sweep_n_cmd->add_option("--seed", sweep_n_seed);
  sweep_n_cmd->add_option("--csv-out", sweep_n_csv);
  sweep_n_cmd->add_option("--plot-out", sweep_n_plot);

  auto* selftest_cmd = app.add_subcommand("selftest", "run the built-in oracle checks");

  CLI11_PARSE(app, argc, argv);

  if (threads > 0) omp_set_num_threads(threads);

  try {
    if (*train_cmd) {
      witch::LabeledDataset data = load_data(train_data);
      witch::ArchSpec arch;
      arch.name = arch_name;
      arch.input_shape = data.image_shape();
      arch.classes = data.class_count;
      if (arch_name == "mlp-small") arch.mlp_hidden = 100;
      witch::Model model = witch::build_model<float>(arch, train_seed);

      witch::TrainConfig cfg;
      cfg.epochs = epochs;
      cfg.batch_size = batch;
      cfg.learning_rate = static_cast<float>(lr);
      cfg.seed = train_seed;
      witch::TrainStats stats;
      if (adversarial) {
        cfg.adversarial = witch::AdvTrainConfig{static_cast<float>(adv_eps), adv_steps,
                                                static_cast<float>(adv_step_size),
                                                adv_witchcraft};
        model = witch::adversarial_train(std::move(model), data, cfg, &stats);
      } else {
        model = witch::train_sgd(std::move(model), data, cfg, &stats);
      }
      for (std::size_t e = 0; e < stats.epoch_loss.size(); ++e)
        std::printf("epoch %zu  loss %.4f  acc %.4f\n", e + 1, stats.epoch_loss[e],
                    stats.epoch_accuracy[e]);
      witch::save_weights(model, weights_out);
      std::printf("saved %s\n", weights_out.c_str());
      return 0;
    }

    if (*attack_cmd) {
      witch::Model model = witch::load_weights(weights_in);
      witch::LabeledDataset data = load_data(attack_data);
      auto family = witch::family_from_name(family_name);
      if (!family) throw CLI::ValidationError("unknown family '" + family_name + "'");

      witch::AttackConfig cfg;
      cfg.family = *family;
      cfg.step = static_cast<float>(step_param);
      cfg.steps = steps;
      cfg.restarts = restarts;
      cfg.early_stop = !no_early_stop;
      cfg.random_init = !no_random_init;
      cfg.zero_variance = zero_variance;
      cfg.seed = attack_seed;

      witch::EvalOptions opts;
      opts.max_examples = examples;
      opts.epsilon = static_cast<float>(eps);

      std::vector<std::uint64_t> seeds;
      for (int t = 0; t < trials; ++t) seeds.push_back(attack_seed + t);
      witch::RobustAccuracyReport report = witch::eval_trials(model, data, cfg, opts, seeds);

      std::printf("clean accuracy  %.4f over %d examples\n", report.clean_accuracy,
                  report.examples);
      for (const auto& t : report.trials)
        std::printf("%s seed %llu  robust accuracy %.4f  grad evals %llu\n",
                    witch::family_name(cfg.family), (unsigned long long)t.seed,
                    t.robust_accuracy, (unsigned long long)t.grad_evals);
      if (trials > 1)
        std::printf("mean robust accuracy %.4f\n", report.mean_robust_accuracy());
      if (!csv_out.empty()) {
        witch::emit_report(report, csv_out);
        std::printf("wrote %s\n", csv_out.c_str());
      } else {
        std::fputs(witch::report_csv(report).c_str(), stdout);
      }
      return 0;
    }

    if (*sweep_a_cmd) {
      witch::Model model = witch::load_weights(sweep_a_weights);
      witch::LabeledDataset data = load_data(sweep_a_data);
      witch::EvalOptions opts;
      opts.max_examples = sweep_a_examples;
      opts.epsilon = static_cast<float>(sweep_a_eps);
      witch::SweepResult sweep = witch::sweep_expected_step(
          model, data, parse_grid(grid_a), sweep_a_steps, sweep_a_trials, opts, sweep_a_seed);
      witch::emit_sweep(sweep, sweep_a_csv, sweep_a_plot);
      std::fputs(witch::sweep_plot_csv(sweep).c_str(), stdout);
      std::printf("wrote %s and %s\n", sweep_a_csv.c_str(), sweep_a_plot.c_str());
      return 0;
    }

    if (*sweep_n_cmd) {
      witch::Model model = witch::load_weights(sweep_n_weights);
      witch::LabeledDataset data = load_data(sweep_n_data);
      witch::EvalOptions opts;
      opts.max_examples = sweep_n_examples;
      opts.epsilon = static_cast<float>(sweep_n_eps);
      std::vector<double> grid = parse_grid(grid_n);
      std::vector<int> grid_int(grid.begin(), grid.end());
      witch::SweepResult sweep =
          witch::sweep_steps(model, data, grid_int, static_cast<float>(sweep_n_step),
                             sweep_n_trials, opts, sweep_n_seed);
      witch::emit_sweep(sweep, sweep_n_csv, sweep_n_plot);
      std::fputs(witch::sweep_plot_csv(sweep).c_str(), stdout);
      std::printf("wrote %s and %s\n", sweep_n_csv.c_str(), sweep_n_plot.c_str());
      return 0;
    }

    if (*selftest_cmd) return run_selftest();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

namespace {

#define SELFTEST(name, cond)                                  \
  do {                                                        \
    bool ok = (cond);                                         \
    std::printf("%-52s %s\n", name, ok ? "ok" : "FAILED");    \
    if (!ok) failures++;                                      \
  } while (0)

int run_selftest() {
  int failures = 0;

  // Gradient vs central finite differences, in double.
  {
    witch::ArchSpec arch{"mlp-small", {5}, 3, 8};
    auto m = witch::build_model<double>(arch, 42);
    witch::TensorT<double> x({5});
    witch::RngStream rng = witch::RngStream::seeded(7);
    for (std::int64_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(-1, 1);
    auto analytic = witch::grad_input(m, x, 1);
    witch::TensorT<double> numeric(x.shape);
    double h = 1e-4;
    auto probe = x;
    for (std::int64_t i = 0; i < x.size(); ++i) {
      probe[i] = x[i] + h;
      double up = witch::loss_at(m, probe, 1);
      probe[i] = x[i] - h;
      double dn = witch::loss_at(m, probe, 1);
      probe[i] = x[i];
      numeric[i] = (up - dn) / (2 * h);
    }
    double num = 0, den = 0;
    for (std::int64_t i = 0; i < x.size(); ++i) {
      num += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
      den += numeric[i] * numeric[i];
    }
    SELFTEST("gradient matches finite differences", std::sqrt(num / std::max(den, 1e-12)) < 1e-4);
  }

  // Projection idempotence and feasibility.
  {
    witch::RngStream rng = witch::RngStream::seeded(8);
    witch::Tensor x({6});
    for (std::int64_t i = 0; i < x.size(); ++i) x[i] = (float)rng.uniform(0, 1);
    witch::PerturbationBudget budget{0.3f, 0.0f, 1.0f, x};
    witch::Tensor d({6});
    for (std::int64_t i = 0; i < d.size(); ++i) d[i] = (float)rng.uniform(-1, 1);
    auto p1 = witch::project(d, budget);
    auto p2 = witch::project(p1, budget);
    SELFTEST("projection is idempotent and feasible",
             p1.data == p2.data && witch::in_budget(p1, budget));
  }

  // Degenerate-randomness equivalence on a small model.
  {
    witch::ArchSpec arch{"mlp-small", {4}, 3, 6};
    auto m = witch::build_model<float>(arch, 3);
    witch::Tensor x({4}, {0.4f, 0.6f, 0.5f, 0.3f});
    witch::PerturbationBudget budget{0.1f, 0.0f, 1.0f, x};
    witch::AttackConfig pgd_cfg;
    pgd_cfg.family = witch::AttackFamily::Pgd;
    pgd_cfg.step = 0.02f;
    pgd_cfg.steps = 10;
    pgd_cfg.early_stop = false;
    witch::AttackConfig witch_cfg = pgd_cfg;
    witch_cfg.family = witch::AttackFamily::Witchcraft;
    witch_cfg.zero_variance = true;
    auto a = witch::run_attack(m, x, 0, budget, pgd_cfg, 0);
    auto b = witch::run_attack(m, x, 0, budget, witch_cfg, 0);
    SELFTEST("zero-variance witchcraft equals fixed-step pgd", a.delta.data == b.delta.data);
  }

  // Linear corner oracle.
  {
    witch::Model m;
    m.input_shape = {3};
    m.class_count = 2;
    witch::Layer dense;
    dense.kind = witch::LayerKind::Dense;
    dense.weights = witch::Tensor({2, 3}, {1.0f, -2.0f, 0.5f, 0.0f, 0.0f, 0.0f});
    dense.bias = witch::Tensor({2});
    witch::detail::resolve_layer_shapes(dense, m.input_shape);
    m.layers.push_back(dense);
    witch::Tensor x({3}, {0.5f, 0.5f, 0.5f});
    witch::PerturbationBudget budget{0.1f, 0.0f, 1.0f, x};
    double best = -1e30;
    witch::Tensor corner({3});
    for (int mask = 0; mask < 8; ++mask) {
      for (int i = 0; i < 3; ++i) corner[i] = (mask >> i) & 1 ? 0.1f : -0.1f;
      best = std::max(best, (double)witch::loss_at(m, witch::add(x, corner), 0));
    }
    auto res = witch::pgd(m, x, 0, budget, 0.1f, 5, false, false, witch::RngStream::seeded(1));
    SELFTEST("pgd reaches the brute-force corner optimum",
             std::abs(res.final_loss - best) < 1e-6);
  }

  // IDX round-trip from an in-memory fixture.
  {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "witch_selftest";
    fs::create_directories(dir);
    fs::path img = dir / "img.idx";
    const unsigned char bytes[] = {0, 0, 8, 3, 0, 0, 0, 1, 0, 0, 0, 1,
                                   0, 0, 0, 2, 0, 255};
    {
      std::ofstream f(img, std::ios::binary);
      f.write(reinterpret_cast<const char*>(bytes), sizeof(bytes));
    }
    auto raw = witch::load_idx_images(img.string());
    SELFTEST("idx image fixture parses to constructed bytes",
             raw.count == 1 && raw.rows == 1 && raw.cols == 2 && raw.pixels[0] == 0 &&
                 raw.pixels[1] == 255);
    fs::remove_all(dir);
  }

  if (failures == 0)
    std::printf("selftest: all checks passed\n");
  else
    std::printf("selftest: %d check(s) FAILED\n", failures);
  return failures == 0 ? 0 : 1;
}

}  // namespace
