#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "coaltree/kernels.hpp"
#include "coaltree/samplers.hpp"
#include "coaltree/synthetic.hpp"

namespace coaltree {

struct RunConfig {
  enum class Command { generate, fit, eval, bench } command = Command::fit;

  // paths
  std::string data_path;    // fit: directory with data.csv (or a bare csv file)
  std::string labels_path;  // optional explicit labels.csv
  std::string coords_path;  // optional explicit coords.json
  std::string fit_path;     // eval: fit output directory (or parent of rep*/)
  std::string truth_path;   // eval: generate output directory
  std::string out_dir;

  // generate
  SyntheticSpec synth;
  std::string preset;  // d1 | d2 | d3, empty for explicit sizes

  // fit / bench
  SamplerConfig sampler;
  std::string algorithm_name = "mpost1";  // sampler algorithms plus "hc"
  CovarianceKind kernel_kind = CovarianceKind::squared_exponential;
  Theta theta;
  std::string theta_json_path;  // initialize theta from a generate theta.json
  bool fix_sigma2 = false;
  double sigma2_value = 1e-9;
  int iterations = 0;  // > 0 switches fit to the alternating sampler
  int burn_in = 0;

  // bench
  std::vector<int> bench_sizes = {16, 32, 64, 128};
  std::vector<std::string> bench_algorithms = {"mpost1", "mpost2", "postpost"};
  int bench_dim = 8;
  int bench_reps = 3;
  int postpost_cap = 128;

  std::uint64_t seed = 0;
  bool seed_given = false;
};

int cmd_generate(const RunConfig& config);
int cmd_fit(const RunConfig& config);
int cmd_eval(const RunConfig& config);
int cmd_bench(const RunConfig& config);

// Maps exceptions to exit codes: 0 ok, 2 config, 3 data, 4 numerical.
int run_command(const RunConfig& config);

}  // namespace coaltree
