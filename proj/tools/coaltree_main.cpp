#include <string>

#include <CLI11.hpp>

#include "coaltree/cli.hpp"
#include "coaltree/errors.hpp"

int main(int argc, char** argv) {
  CLI::App app{"coalescent dendrogram inference: generate / fit / eval / bench"};
  app.require_subcommand(1);

  coaltree::RunConfig cfg;
  std::string kernel_name = "squared_exponential";
  std::string weight_mode = "exact";
  double ell = 1.0, ell_x = 1.0, ell_y = 1.0, sigma2 = 1e-9;
  double fix_sigma2_value = 1e-9;

  const std::vector<std::string> kernel_names = {"squared_exponential", "se", "matern32_grid",
                                                 "matern32", "diagonal"};

  auto* gen = app.add_subcommand("generate", "sample synthetic datasets from the prior");
  gen->add_option("--preset", cfg.preset, "named dataset family: d1, d2, d3");
  gen->add_option("--n", cfg.synth.n, "items per replicate");
  gen->add_option("--d", cfg.synth.d, "feature dimension");
  gen->add_option("--replicates", cfg.synth.replicates, "replicate count");
  gen->add_option("--kernel", kernel_name, "feature covariance kind")
      ->check(CLI::IsMember(kernel_names));
  gen->add_option("--ell", ell, "squared-exponential scale");
  gen->add_option("--ell-x", ell_x, "grid kernel x scale");
  gen->add_option("--ell-y", ell_y, "grid kernel y scale");
  gen->add_option("--sigma2", sigma2, "observation noise variance");
  gen->add_option("--seed", cfg.seed, "master seed");
  gen->add_option("--out", cfg.out_dir, "output directory")->required();

  auto* fit = app.add_subcommand("fit", "infer dendrograms for a dataset");
  fit->add_option("--data", cfg.data_path, "data.csv file or directory holding one")
      ->required();
  fit->add_option("--labels", cfg.labels_path, "optional labels.csv");
  fit->add_option("--coords", cfg.coords_path, "optional coords.json");
  fit->add_option("--algorithm", cfg.algorithm_name, "mpost1|mpost2|postpost|greedy|mgreedy|hc")
      ->check(CLI::IsMember({"mpost1", "mpost2", "postpost", "greedy", "mgreedy", "hc"}));
  fit->add_option("--particles", cfg.sampler.particles, "particle count");
  fit->add_option("--iterations", cfg.iterations,
                  "alternating tree/hyperparameter iterations (0 = single pass)");
  fit->add_option("--burn-in", cfg.burn_in, "alternating iterations to discard");
  fit->add_option("--kernel", kernel_name, "feature covariance kind")
      ->check(CLI::IsMember(kernel_names));
  fit->add_option("--ell", ell, "squared-exponential scale");
  fit->add_option("--ell-x", ell_x, "grid kernel x scale");
  fit->add_option("--ell-y", ell_y, "grid kernel y scale");
  fit->add_option("--sigma2", sigma2, "observation noise variance");
  fit->add_option("--theta-json", cfg.theta_json_path,
                  "initialize kernel and theta from a theta.json");
  auto* fix = fit->add_option("--fix-sigma2", fix_sigma2_value,
                              "pin the noise variance to this value");
  fit->add_option("--delta0", cfg.sampler.window_factor, "slice window scale");
  fit->add_option("--weight-mode", weight_mode, "pair weight form: exact|laplace")
      ->check(CLI::IsMember({"exact", "laplace"}));
  fit->add_flag("--exact-correction", cfg.sampler.exact_correction,
                "reweight cached-core increments by the exact weight at the chosen pair");
  fit->add_flag("--truncated-weights", cfg.sampler.truncated_weights,
                "renormalize pair weights over holding times above the floor");
  fit->add_flag("--textbook-greedy", cfg.sampler.greedy_textbook_mode,
                "use the density-mode merge time in greedy search");
  fit->add_option("--resample-threshold", cfg.sampler.resample_threshold,
                  "resample when ESS falls below this fraction of the particle count");
  fit->add_option("--threads", cfg.sampler.threads, "worker threads (0 = auto)");
  fit->add_option("--seed", cfg.seed, "master seed (required)");
  fit->add_option("--out", cfg.out_dir, "output directory")->required();

  auto* eval = app.add_subcommand("eval", "score fit output against ground truth");
  eval->add_option("--fit", cfg.fit_path, "fit output directory (or parent of rep*/)")
      ->required();
  eval->add_option("--truth", cfg.truth_path, "generate output directory");
  eval->add_option("--labels", cfg.labels_path, "labels.csv for class metrics");
  eval->add_option("--out", cfg.out_dir, "output directory")->required();

  auto* bench = app.add_subcommand("bench", "wall-clock scaling across dataset sizes");
  bench->add_option("--sizes", cfg.bench_sizes, "dataset sizes to time");
  bench->add_option("--algorithms", cfg.bench_algorithms, "algorithms to time");
  bench->add_option("--d", cfg.bench_dim, "feature dimension");
  bench->add_option("--reps", cfg.bench_reps, "repetitions per size");
  bench->add_option("--particles", cfg.sampler.particles, "particle count");
  bench->add_option("--postpost-cap", cfg.postpost_cap,
                    "skip the cubic reference above this size");
  bench->add_option("--threads", cfg.sampler.threads, "worker threads (0 = auto)");
  bench->add_option("--seed", cfg.seed, "master seed (required)");
  bench->add_option("--out", cfg.out_dir, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    const coaltree::CovarianceKind kind = coaltree::covariance_kind_from_string(kernel_name);
    const coaltree::Theta theta{ell, ell_x, ell_y, sigma2, {}};
    if (gen->parsed()) {
      cfg.command = coaltree::RunConfig::Command::generate;
      cfg.synth.kind = kind;
      cfg.synth.theta = theta;
      cfg.seed_given = gen->count("--seed") > 0;
    } else if (fit->parsed()) {
      cfg.command = coaltree::RunConfig::Command::fit;
      cfg.kernel_kind = kind;
      cfg.theta = theta;
      cfg.fix_sigma2 = fix->count() > 0;
      cfg.sigma2_value = fix_sigma2_value;
      cfg.sampler.weight_mode = weight_mode == "laplace"
                                    ? coaltree::WeightMode::laplace_limit
                                    : coaltree::WeightMode::exact_bessel;
      cfg.seed_given = fit->count("--seed") > 0;
    } else if (eval->parsed()) {
      cfg.command = coaltree::RunConfig::Command::eval;
      cfg.seed_given = true;
    } else {
      cfg.command = coaltree::RunConfig::Command::bench;
      cfg.seed_given = bench->count("--seed") > 0;
    }
  } catch (const coaltree::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }
  return coaltree::run_command(cfg);
}
