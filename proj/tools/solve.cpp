// solve: run one experiment and write trace.csv, rate_report.json, summary.json.
//
//   solve --config run.json
//   solve --experiment lasso --solver ada --rho 5 --c 5 --out runs/lasso
//
// Flags override values from --config. Exit status: 0 converged,
// 2 stopped at max_iters, 1 error.

#include "ada/bench.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Augmented decomposition benchmark runner"};

  std::string config_path;
  std::string experiment, solver, stop_mode, criterion, inner, out, libsvm;
  double rho = 0, c = 0, gamma = 0, eps0 = 0, stop_eps = 0, beta = 0;
  std::uint64_t seed = 0;
  std::size_t max_iters = 0;
  long long n = 0, d = 0, K = 0, p = 0, N = 0;
  unsigned threads = 0;
  bool reference = false;
  bool print_config = false;

  app.add_option("--config", config_path, "JSON experiment config")->check(CLI::ExistingFile);
  auto* o_exp = app.add_option("--experiment", experiment, "lasso | exchange | logreg");
  auto* o_solver = app.add_option("--solver", solver, "ada | iada | vsadmm | proxjadmm | admm2");
  auto* o_rho = app.add_option("--rho", rho);
  auto* o_c = app.add_option("--c", c);
  auto* o_gamma = app.add_option("--gamma", gamma, "inexactness decay exponent");
  auto* o_eps0 = app.add_option("--eps0", eps0);
  auto* o_seed = app.add_option("--seed", seed);
  auto* o_max = app.add_option("--max-iters", max_iters);
  auto* o_stop = app.add_option("--stop-eps", stop_eps);
  auto* o_mode = app.add_option("--stop-mode", stop_mode, "x_change | feasibility | both | max_iters | consensus");
  auto* o_out = app.add_option("--out", out, "output directory");
  auto* o_crit = app.add_option("--criterion", criterion, "A | B | exact (iada)");
  auto* o_inner = app.add_option("--inner", inner, "iterative | closed_form (iada)");
  auto* o_beta = app.add_option("--beta", beta, "baseline penalty");
  auto* o_n = app.add_option("--n", n);
  auto* o_d = app.add_option("--d", d);
  auto* o_K = app.add_option("--K", K);
  auto* o_p = app.add_option("--p", p);
  auto* o_N = app.add_option("--N", N);
  auto* o_libsvm = app.add_option("--libsvm", libsvm, "LIBSVM data file (logreg)");
  auto* o_threads = app.add_option("--threads", threads);
  app.add_flag("--reference", reference, "compute a reference point for Fejer/ergodic/tail checks");
  app.add_flag("--print-config", print_config, "print the resolved config and exit");

  CLI11_PARSE(app, argc, argv);

  try {
    ada::ExperimentConfig cfg;
    if (!config_path.empty()) cfg = ada::load_config(config_path);
    if (*o_exp) cfg.experiment = ada::parse_experiment(experiment);
    if (*o_solver) cfg.solver = ada::parse_solver(solver);
    if (*o_rho) cfg.rho = rho;
    if (*o_c) cfg.c = c;
    if (*o_gamma) cfg.gamma = gamma;
    if (*o_eps0) cfg.eps0 = eps0;
    if (*o_seed) cfg.seed = seed;
    if (*o_max) cfg.max_iters = max_iters;
    if (*o_stop) cfg.stop_eps = stop_eps;
    if (*o_mode) cfg.stop_mode = stop_mode;
    if (*o_out) cfg.out = out;
    if (*o_crit) cfg.criterion = ada::parse_criterion(criterion);
    if (*o_inner) cfg.inner = inner;
    if (*o_beta) cfg.beta = beta;
    if (*o_n) cfg.n = n;
    if (*o_d) cfg.d = d;
    if (*o_K) cfg.K = static_cast<std::size_t>(K);
    if (*o_p) cfg.p = p;
    if (*o_N) cfg.N = static_cast<std::size_t>(N);
    if (*o_libsvm) cfg.libsvm = libsvm;
    if (*o_threads) cfg.threads = threads;
    if (reference) cfg.reference = true;
    cfg.validate();

    if (print_config) {
      std::cout << ada::to_json(cfg) << '\n';
      return 0;
    }

    const auto res = ada::run_experiment(cfg);
    const auto& tr = res.outcome.trace;
    std::cout << ada::to_string(cfg.experiment) << '/' << ada::to_string(cfg.solver) << ": "
              << (res.exit_code == 0 ? "converged" : "non-converged") << " after " << tr.size()
              << " iterations";
    if (!tr.empty()) {
      std::cout << ", objective " << ada::format_double(tr.back().objective) << ", residual "
                << ada::format_double(tr.back().constraint_residual_norm);
    }
    std::cout << " (" << res.wall_seconds << " s)\n";
    return res.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
