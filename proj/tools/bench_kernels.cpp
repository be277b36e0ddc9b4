// Times the OpenMP kernels against their serial reference implementations
// and verifies on the fly that both produce bit-identical outputs. Sizes
// mirror the cnn-2conv layers on 28x28 inputs plus a couple of larger
// shapes where threading has more room.

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "witch/attacks.hpp"
#include "witch/kernels.hpp"
#include "witch/model.hpp"
#include "witch/rng.hpp"

namespace kern = witch::kern;

namespace {

std::vector<float> rand_vec(std::size_t n, witch::RngStream& rng) {
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.uniform(-1.0, 1.0));
  return v;
}

// Min over repetitions; robust against thread-pool wake latency after the
// long serial stretches between timed sections.
double time_ms(const std::function<void()>& fn, int reps) {
  fn();  // warm up
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    auto t0 = std::chrono::steady_clock::now();
    fn();
    auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

struct Row {
  std::string name;
  double serial_ms;
  double parallel_ms;
  bool identical;
};

void print_rows(const std::vector<Row>& rows) {
  std::printf("%-34s %12s %12s %9s %10s\n", "kernel", "serial ms", "parallel ms", "speedup",
              "identical");
  for (const Row& r : rows)
    std::printf("%-34s %12.3f %12.3f %8.2fx %10s\n", r.name.c_str(), r.serial_ms,
                r.parallel_ms, r.serial_ms / r.parallel_ms, r.identical ? "yes" : "NO");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"serial vs OpenMP kernel comparison"};
  int reps = 20;
  int threads = 0;
  app.add_option("--reps", reps, "timed repetitions per kernel");
  app.add_option("--threads", threads, "OpenMP thread count (0 = runtime default)");
  CLI11_PARSE(app, argc, argv);
  if (threads > 0) omp_set_num_threads(threads);
  std::printf("threads: %d\n\n", omp_get_max_threads());

  witch::RngStream rng = witch::RngStream::seeded(99);
  std::vector<Row> rows;

  struct ConvCase {
    const char* name;
    int H, W, C, K, R, S, pad;
  };
  for (const ConvCase& c : {ConvCase{"conv2d fwd 28x28x1 -> 16", 28, 28, 1, 16, 5, 5, 0},
                            ConvCase{"conv2d fwd 12x12x16 -> 32", 12, 12, 16, 32, 5, 5, 0},
                            ConvCase{"conv2d fwd 64x64x8 -> 16", 64, 64, 8, 16, 5, 5, 2}}) {
    int Ho = c.H + 2 * c.pad - c.R + 1, Wo = c.W + 2 * c.pad - c.S + 1;
    auto in = rand_vec(std::size_t(c.H) * c.W * c.C, rng);
    auto w = rand_vec(std::size_t(c.K) * c.R * c.S * c.C, rng);
    auto b = rand_vec(c.K, rng);
    std::vector<float> out_s(std::size_t(Ho) * Wo * c.K), out_p(out_s.size());
    double ts = time_ms(
        [&] {
          kern::serial::conv2d_forward(in.data(), w.data(), b.data(), out_s.data(), c.H, c.W,
                                       c.C, c.K, c.R, c.S, c.pad, Ho, Wo);
        },
        reps);
    double tp = time_ms(
        [&] {
          kern::conv2d_forward(in.data(), w.data(), b.data(), out_p.data(), c.H, c.W, c.C,
                               c.K, c.R, c.S, c.pad, Ho, Wo);
        },
        reps);
    rows.push_back({c.name, ts, tp, out_s == out_p});

    auto dout = rand_vec(out_s.size(), rng);
    std::vector<float> din_s(in.size()), din_p(in.size());
    std::string bwd_name = std::string(c.name);
    bwd_name.replace(bwd_name.find("fwd"), 3, "bwd");
    ts = time_ms(
        [&] {
          kern::serial::conv2d_backward_input(dout.data(), w.data(), din_s.data(), c.H, c.W,
                                              c.C, c.K, c.R, c.S, c.pad, Ho, Wo);
        },
        reps);
    tp = time_ms(
        [&] {
          kern::conv2d_backward_input(dout.data(), w.data(), din_p.data(), c.H, c.W, c.C, c.K,
                                      c.R, c.S, c.pad, Ho, Wo);
        },
        reps);
    rows.push_back({bwd_name, ts, tp, din_s == din_p});
  }

  struct DenseCase {
    const char* name;
    int in_n, out_n;
  };
  for (const DenseCase& c :
       {DenseCase{"dense fwd 512 -> 10", 512, 10}, DenseCase{"dense fwd 4096 -> 256", 4096, 256}}) {
    auto x = rand_vec(c.in_n, rng);
    auto w = rand_vec(std::size_t(c.in_n) * c.out_n, rng);
    auto b = rand_vec(c.out_n, rng);
    std::vector<float> out_s(c.out_n), out_p(c.out_n);
    double ts = time_ms(
        [&] {
          kern::serial::dense_forward(x.data(), w.data(), b.data(), out_s.data(), c.in_n,
                                      c.out_n);
        },
        reps);
    double tp = time_ms(
        [&] { kern::dense_forward(x.data(), w.data(), b.data(), out_p.data(), c.in_n, c.out_n); },
        reps);
    rows.push_back({c.name, ts, tp, out_s == out_p});
  }

  // End-to-end: one attack gradient evaluation on the 28x28 cnn, and a
  // full 40-step pgd run, comparing example-level throughput.
  {
    witch::ArchSpec arch{"cnn-2conv", {28, 28, 1}, 10, 32, 16, 32};
    auto model = witch::build_model<float>(arch, 5);
    witch::Tensor x({28, 28, 1});
    for (std::int64_t i = 0; i < x.size(); ++i) x[i] = (float)rng.uniform(0.0, 1.0);
    double tg = time_ms([&] { (void)witch::grad_input(model, x, 3); }, reps);
    std::printf("\ninput-gradient evaluation on cnn-2conv(28x28): %.3f ms\n", tg);

    witch::PerturbationBudget budget{0.3f, 0.0f, 1.0f, x};
    auto t0 = std::chrono::steady_clock::now();
    auto res = witch::pgd(model, x, 3, budget, 0.01f, 40, false, true,
                          witch::RngStream::seeded(1));
    auto t1 = std::chrono::steady_clock::now();
    std::printf("40-step pgd on cnn-2conv(28x28): %.1f ms (%llu grad evals)\n",
                std::chrono::duration<double, std::milli>(t1 - t0).count(),
                (unsigned long long)res.grad_evals);
  }

  std::printf("\n");
  print_rows(rows);
  bool all_identical = true;
  for (const Row& r : rows) all_identical = all_identical && r.identical;
  return all_identical ? 0 : 1;
}
