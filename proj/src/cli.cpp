#include "coaltree/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <thread>

#include <json.hpp>

#include "coaltree/baseline_hc.hpp"
#include "coaltree/errors.hpp"
#include "coaltree/metrics.hpp"

namespace coaltree {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out << text;
  if (!out) throw DataError("write failed: " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open: " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return text;
}

void write_json(const fs::path& path, const ordered_json& j) {
  write_text(path, j.dump(2) + "\n");
}

ordered_json load_json(const fs::path& path) {
  try {
    return ordered_json::parse(read_text(path));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("invalid JSON in " + path.string() + ": " + e.what());
  }
}

std::string rep_name(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "rep%03d", i);
  return buf;
}

ordered_json theta_to_json(CovarianceKind kind, const Theta& theta) {
  ordered_json j;
  j["kernel"] = to_string(kind);
  j["ell"] = theta.ell;
  j["ell_x"] = theta.ell_x;
  j["ell_y"] = theta.ell_y;
  j["sigma2"] = theta.sigma2;
  if (!theta.diag.empty()) j["diag"] = theta.diag;
  return j;
}

Theta theta_from_json(const ordered_json& j, CovarianceKind* kind) {
  Theta t;
  try {
    if (j.contains("kernel") && kind != nullptr)
      *kind = covariance_kind_from_string(j.at("kernel").get<std::string>());
    if (j.contains("ell")) t.ell = j.at("ell").get<double>();
    if (j.contains("ell_x")) t.ell_x = j.at("ell_x").get<double>();
    if (j.contains("ell_y")) t.ell_y = j.at("ell_y").get<double>();
    if (j.contains("sigma2")) t.sigma2 = j.at("sigma2").get<double>();
    if (j.contains("diag")) t.diag = j.at("diag").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("invalid theta JSON: ") + e.what());
  }
  return t;
}

Dataset load_dataset(const RunConfig& config) {
  Dataset data;
  fs::path base = config.data_path;
  if (config.data_path.empty()) throw ConfigError("fit requires --data");
  fs::path csv = base;
  fs::path labels, coords;
  if (fs::is_directory(base)) {
    csv = base / "data.csv";
    if (fs::exists(base / "labels.csv")) labels = base / "labels.csv";
    if (fs::exists(base / "coords.json")) coords = base / "coords.json";
  }
  if (!config.labels_path.empty()) labels = config.labels_path;
  if (!config.coords_path.empty()) coords = config.coords_path;
  data.x = read_matrix_csv(csv.string());
  if (!labels.empty()) data.labels = read_labels(labels.string());
  if (!coords.empty()) data.coords = read_coords(coords.string());
  return data;
}

std::vector<double> merge_times(const Dendrogram& tree) {
  std::vector<double> t;
  t.reserve(tree.merges.size());
  for (const Merge& m : tree.merges) t.push_back(m.time);
  return t;
}

// Entrywise weighted average of log cophenetic distances across particles
// (diagonal pinned at zero, zero-weight particles skipped).
Eigen::MatrixXd weighted_log_distance(const SmcResult& res) {
  const int n = res.particles.front().tree.n_leaves;
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t p = 0; p < res.particles.size(); ++p) {
    const double w = res.norm_weights[p];
    if (w <= 0.0) continue;
    const Eigen::MatrixXd dist = tree_distance_matrix(res.particles[p].tree);
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        const double term = w * std::log(dist(i, j));
        acc(i, j) += term;
        acc(j, i) += term;
      }
  }
  return acc;
}

std::vector<double> weighted_log_times(const SmcResult& res) {
  const std::size_t stages = res.particles.front().tree.merges.size();
  std::vector<double> acc(stages, 0.0);
  for (std::size_t p = 0; p < res.particles.size(); ++p) {
    const double w = res.norm_weights[p];
    if (w <= 0.0) continue;
    const std::vector<double> t = merge_times(res.particles[p].tree);
    for (std::size_t k = 0; k < stages; ++k) acc[k] += w * std::log(t[k]);
  }
  return acc;
}

struct FitOutput {
  std::string algorithm;
  CovarianceKind kind = CovarianceKind::squared_exponential;
  Theta theta;
  int dims = 0;
  int particles = 1;
  SmcResult smc;           // empty particle set for single-tree algorithms
  Dendrogram single_tree;  // used when smc.particles is empty
  std::vector<Theta> theta_trace;
  Theta theta_mean;
  bool has_trace = false;
  double runtime_seconds = 0.0;
};

void write_fit_output(const RunConfig& config, const FitOutput& fit) {
  const fs::path out = config.out_dir;
  fs::create_directories(out / "trees");

  const bool ensemble = !fit.smc.particles.empty();
  ordered_json j;
  j["algorithm"] = fit.algorithm;
  const Dendrogram& best =
      ensemble ? fit.smc.particles[fit.smc.max_weight_index].tree : fit.single_tree;
  j["n"] = best.n_leaves;
  j["d"] = fit.dims;
  j["kernel"] = to_string(fit.kind);
  j["theta"] = theta_to_json(fit.kind, fit.theta);
  j["particles"] = ensemble ? static_cast<int>(fit.smc.particles.size()) : 1;
  j["seed"] = config.seed;
  j["iterations"] = config.iterations;
  j["burn_in"] = config.burn_in;

  Eigen::MatrixXd log_dist;
  std::vector<double> t_log;
  if (ensemble) {
    std::vector<double> lw;
    for (const Particle& p : fit.smc.particles) lw.push_back(p.log_weight);
    j["log_weights"] = lw;
    j["weights"] = fit.smc.norm_weights;
    j["ess_trace"] = fit.smc.ess_trace;
    j["resample_stages"] = fit.smc.resample_stages;
    j["max_weight_index"] = fit.smc.max_weight_index;
    log_dist = weighted_log_distance(fit.smc);
    t_log = weighted_log_times(fit.smc);
  } else {
    j["log_weights"] = std::vector<double>{0.0};
    j["weights"] = std::vector<double>{1.0};
    j["ess_trace"] = std::vector<double>{};
    j["resample_stages"] = std::vector<int>{};
    j["max_weight_index"] = 0;
    const Eigen::MatrixXd dist = tree_distance_matrix(fit.single_tree);
    log_dist = dist.array().max(0.0).log().matrix();
    log_dist.diagonal().setZero();
    for (double t : merge_times(fit.single_tree)) t_log.push_back(std::log(t));
  }
  j["t_log_mean"] = t_log;
  j["max_weight_tree"] = ordered_json::parse(dendrogram_to_json(best));
  if (fit.has_trace) {
    ordered_json trace = ordered_json::array();
    for (const Theta& t : fit.theta_trace) trace.push_back(theta_to_json(fit.kind, t));
    j["theta_trace"] = trace;
    j["theta_mean"] = theta_to_json(fit.kind, fit.theta_mean);
  }
  j["runtime_seconds"] = fit.runtime_seconds;
  write_json(out / "result.json", j);

  Eigen::MatrixXd dist_out = log_dist.array().exp().matrix();
  dist_out.diagonal().setZero();
  write_matrix_csv((out / "distance_matrix.csv").string(), dist_out);
  if (ensemble) {
    for (std::size_t p = 0; p < fit.smc.particles.size(); ++p) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "particle_%04zu.newick", p);
      write_text(out / "trees" / buf, to_newick(fit.smc.particles[p].tree) + "\n");
    }
  } else {
    write_text(out / "trees" / "tree.newick", to_newick(fit.single_tree) + "\n");
  }
}

double sample_std(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double acc = 0.0;
  for (double x : v) acc += (x - mean) * (x - mean);
  return std::sqrt(acc / (static_cast<double>(v.size()) - 1.0));
}

double mean_of(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc / static_cast<double>(v.size());
}

// Single-directory eval; returns the metrics JSON it wrote.
ordered_json eval_one(const fs::path& fit_dir, const fs::path& truth_dir,
                      const fs::path& labels_file, const fs::path& out_dir) {
  const ordered_json result = load_json(fit_dir / "result.json");
  const std::string algorithm = result.at("algorithm").get<std::string>();
  const Dendrogram best = dendrogram_from_json(result.at("max_weight_tree").dump());

  ordered_json m;
  m["algorithm"] = algorithm;
  m["n"] = best.n_leaves;

  const bool has_truth = !truth_dir.empty();
  if (has_truth && algorithm != "hc") {
    const Dendrogram truth = load_dendrogram((truth_dir / "truth.json").string());
    const std::vector<double> truth_t = merge_times(truth);
    const Eigen::MatrixXd truth_dist = tree_distance_matrix(truth);

    const std::vector<double> t_log = result.at("t_log_mean").get<std::vector<double>>();
    const ErrorTriple et = error_triple_from_log(t_log, truth_t);
    m["mse_t"] = et.mse;
    m["mae_t"] = et.mae;
    m["mab_t"] = et.mab;

    const Eigen::MatrixXd est_dist =
        read_matrix_csv((fit_dir / "distance_matrix.csv").string());
    const ErrorTriple ep = error_triple(est_dist, truth_dist);
    m["mse_pi"] = ep.mse;
    m["mae_pi"] = ep.mae;
    m["mab_pi"] = ep.mab;

    const ErrorTriple bt = error_triple(merge_times(best), truth_t);
    const ErrorTriple bp = error_triple(tree_distance_matrix(best), truth_dist);
    ordered_json mw;
    mw["mse_t"] = bt.mse;
    mw["mae_t"] = bt.mae;
    mw["mab_t"] = bt.mab;
    mw["mse_pi"] = bp.mse;
    mw["mae_pi"] = bp.mae;
    mw["mab_pi"] = bp.mab;
    m["max_weight"] = mw;
  }

  fs::path labels_path = labels_file;
  if (labels_path.empty() && has_truth && fs::exists(truth_dir / "labels.csv"))
    labels_path = truth_dir / "labels.csv";
  if (!labels_path.empty()) {
    const std::vector<int> labels = read_labels(labels_path.string());
    m["subtree_score"] = subtree_score(best, labels);
    const AriCurve curve = ari_curve_auc(best, labels);
    m["ari_auc"] = curve.auc;
    std::string csv;
    for (const auto& [nc, ari] : curve.points)
      csv += std::to_string(nc) + "," + format_double(ari) + "\n";
    write_text(out_dir / "ari_curve.csv", csv);
  }

  // Pinned so that repeated eval runs of the same fit are byte-identical;
  // wall-clock time lives in result.json and bench.json.
  m["runtime_seconds"] = 0.0;
  write_json(out_dir / "metrics.json", m);
  return m;
}

std::vector<std::string> replicate_names(const fs::path& dir) {
  std::vector<std::string> names;
  if (!fs::is_directory(dir)) return names;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_directory()) continue;
    const std::string name = entry.path().filename().string();
    if (name.size() >= 4 && name.rfind("rep", 0) == 0 &&
        name.find_first_not_of("0123456789", 3) == std::string::npos)
      names.push_back(name);
  }
  std::sort(names.begin(), names.end());
  return names;
}

void flatten_metrics(const ordered_json& m, const std::string& prefix,
                     std::map<std::string, std::vector<double>>& acc) {
  for (const auto& [key, value] : m.items()) {
    if (key == "runtime_seconds") continue;
    if (value.is_object())
      flatten_metrics(value, prefix + key + ".", acc);
    else if (value.is_number())
      acc[prefix + key].push_back(value.get<double>());
  }
}

}  // namespace

int cmd_generate(const RunConfig& config) {
  SyntheticSpec spec = config.synth;
  if (!config.preset.empty()) spec = preset_spec(config.preset);
  spec.seed = config.seed;
  spec.validate();
  if (config.out_dir.empty()) throw ConfigError("generate requires --out");

  const fs::path out = config.out_dir;
  fs::create_directories(out);

  ordered_json manifest;
  manifest["command"] = "generate";
  if (!config.preset.empty()) manifest["preset"] = config.preset;
  manifest["n"] = spec.n;
  manifest["d"] = spec.d;
  manifest["kernel"] = to_string(spec.kind);
  manifest["theta"] = theta_to_json(spec.kind, spec.theta);
  manifest["seed"] = spec.seed;
  manifest["replicates"] = spec.replicates;
  write_json(out / "manifest.json", manifest);

  for (int rep = 0; rep < spec.replicates; ++rep) {
    SyntheticSpec sub = spec;
    sub.replicates = 1;
    sub.seed = derive_seed(spec.seed, stream::replicate, static_cast<std::uint64_t>(rep));
    const SyntheticInstance inst = generate(sub);
    const fs::path dir = out / rep_name(rep);
    fs::create_directories(dir);
    write_matrix_csv((dir / "data.csv").string(), inst.data.x);
    write_text(dir / "truth.newick", to_newick(inst.tree) + "\n");
    save_dendrogram((dir / "truth.json").string(), inst.tree);
    write_json(dir / "theta.json", theta_to_json(spec.kind, inst.theta));
    if (inst.data.coords.kind != Coords::Kind::none)
      write_coords((dir / "coords.json").string(), inst.data.coords);
  }
  return 0;
}

int cmd_fit(const RunConfig& config) {
  if (!config.seed_given) throw ConfigError("fit requires --seed");
  if (config.out_dir.empty()) throw ConfigError("fit requires --out");
  const Dataset data = load_dataset(config);

  FitOutput fit;
  fit.kind = config.kernel_kind;
  fit.theta = config.theta;
  if (!config.theta_json_path.empty())
    fit.theta = theta_from_json(load_json(config.theta_json_path), &fit.kind);
  if (config.fix_sigma2) fit.theta.sigma2 = config.sigma2_value;
  fit.algorithm = config.algorithm_name;
  fit.dims = data.d();

  const auto t0 = std::chrono::steady_clock::now();
  if (config.algorithm_name == "hc") {
    fit.single_tree = average_link(data);
  } else {
    SamplerConfig sampler = config.sampler;
    sampler.algorithm = algorithm_from_string(config.algorithm_name);
    sampler.seed = config.seed;
    HyperOptions hyper;
    hyper.fix_sigma2 = config.fix_sigma2;
    hyper.sigma2_value = config.sigma2_value;
    const bool greedy = sampler.algorithm == Algorithm::greedy ||
                        sampler.algorithm == Algorithm::mgreedy;
    if (config.iterations > 0) {
      const AlternatingResult alt = run_alternating(data, fit.kind, fit.theta, sampler,
                                                    config.iterations, config.burn_in, hyper);
      fit.theta_trace = alt.theta_trace;
      fit.theta_mean = alt.theta_mean;
      fit.theta = alt.theta_trace.back();
      fit.has_trace = true;
      if (greedy)
        fit.single_tree = alt.max_weight_trees.back();
      else
        fit.smc = alt.smc;
    } else {
      const CovarianceModel cov(fit.kind, fit.theta, data.coords, data.d());
      if (greedy) {
        const GreedyVariant variant = sampler.algorithm == Algorithm::mgreedy
                                          ? GreedyVariant::corrected
                                          : GreedyVariant::original;
        fit.single_tree = run_greedy(data, cov, variant, sampler.greedy_textbook_mode);
      } else {
        fit.smc = run_smc(data, cov, sampler);
      }
    }
  }
  fit.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_fit_output(config, fit);
  return 0;
}

int cmd_eval(const RunConfig& config) {
  if (config.fit_path.empty()) throw ConfigError("eval requires --fit");
  if (config.out_dir.empty()) throw ConfigError("eval requires --out");
  const fs::path fit_dir = config.fit_path;
  const fs::path truth_dir = config.truth_path;
  const fs::path labels = config.labels_path;
  const fs::path out = config.out_dir;
  fs::create_directories(out);

  const std::vector<std::string> reps = replicate_names(fit_dir);
  if (reps.empty()) {
    eval_one(fit_dir, truth_dir, labels, out);
    return 0;
  }

  std::map<std::string, std::vector<double>> metric_values;
  std::vector<double> runtimes;
  for (const std::string& name : reps) {
    const fs::path rep_fit = fit_dir / name;
    fs::path rep_truth;
    if (!truth_dir.empty()) {
      rep_truth = truth_dir / name;
      if (!fs::exists(rep_truth / "truth.json"))
        throw DataError("missing truth replicate: " + rep_truth.string());
    }
    const fs::path rep_out = out / name;
    fs::create_directories(rep_out);
    const ordered_json m = eval_one(rep_fit, rep_truth, labels, rep_out);
    flatten_metrics(m, "", metric_values);
    const ordered_json result = load_json(rep_fit / "result.json");
    runtimes.push_back(result.at("runtime_seconds").get<double>());
  }

  ordered_json agg;
  agg["replicates"] = static_cast<int>(reps.size());
  ordered_json metrics;
  for (const auto& [key, values] : metric_values) {
    const double mean = mean_of(values);
    ordered_json entry;
    entry["mean"] = mean;
    entry["std"] = sample_std(values, mean);
    entry["count"] = static_cast<int>(values.size());
    metrics[key] = entry;
  }
  agg["metrics"] = metrics;
  const double rt_mean = mean_of(runtimes);
  ordered_json rt;
  rt["mean"] = rt_mean;
  rt["std"] = sample_std(runtimes, rt_mean);
  agg["runtime_seconds"] = rt;
  write_json(out / "aggregate.json", agg);
  return 0;
}

int cmd_bench(const RunConfig& config) {
  if (!config.seed_given) throw ConfigError("bench requires --seed");
  if (config.out_dir.empty()) throw ConfigError("bench requires --out");
  const fs::path out = config.out_dir;
  fs::create_directories(out);

  std::vector<int> sizes = config.bench_sizes;
  std::sort(sizes.begin(), sizes.end());
  std::string csv = "algorithm,n,rep,seconds\n";

  ordered_json algorithms;
  for (const std::string& name : config.bench_algorithms) {
    std::vector<int> used_sizes;
    std::vector<double> means, stds;
    for (int n : sizes) {
      if (name == "postpost" && n > config.postpost_cap) continue;
      SyntheticSpec spec;
      spec.n = n;
      spec.d = config.bench_dim;
      spec.theta.ell = config.bench_dim / 4.0;
      spec.theta.sigma2 = 1e-9;
      spec.seed = derive_seed(config.seed, stream::replicate, static_cast<std::uint64_t>(n));
      const SyntheticInstance inst = generate(spec);
      const CovarianceModel cov(spec.kind, spec.theta, inst.data.coords, spec.d);

      std::vector<double> secs;
      for (int rep = 0; rep < config.bench_reps; ++rep) {
        const std::uint64_t run_seed = derive_seed(
            derive_seed(config.seed, stream::alternate, static_cast<std::uint64_t>(n)),
            stream::replicate, static_cast<std::uint64_t>(rep));
        double seconds = 0.0;
        if (name == "hc") {
          const auto t0 = std::chrono::steady_clock::now();
          average_link(inst.data);
          seconds =
              std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        } else {
          const Algorithm alg = algorithm_from_string(name);
          if (alg == Algorithm::greedy || alg == Algorithm::mgreedy) {
            const auto t0 = std::chrono::steady_clock::now();
            run_greedy(inst.data, cov,
                       alg == Algorithm::mgreedy ? GreedyVariant::corrected
                                                 : GreedyVariant::original);
            seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                          .count();
          } else {
            SamplerConfig sampler = config.sampler;
            sampler.algorithm = alg;
            sampler.seed = run_seed;
            seconds = run_smc(inst.data, cov, sampler).runtime_seconds;
          }
        }
        secs.push_back(seconds);
        csv += name + "," + std::to_string(n) + "," + std::to_string(rep) + "," +
               format_double(seconds) + "\n";
      }
      const double mean = mean_of(secs);
      used_sizes.push_back(n);
      means.push_back(mean);
      stds.push_back(sample_std(secs, mean));
    }
    // log-log OLS slope: the empirical cost exponent.
    double exponent = 0.0;
    if (used_sizes.size() >= 2) {
      double sx = 0, sy = 0, sxx = 0, sxy = 0;
      const double count = static_cast<double>(used_sizes.size());
      for (std::size_t i = 0; i < used_sizes.size(); ++i) {
        const double x = std::log(static_cast<double>(used_sizes[i]));
        const double y = std::log(std::max(means[i], 1e-12));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
      }
      exponent = (count * sxy - sx * sy) / (count * sxx - sx * sx);
    }
    ordered_json entry;
    entry["sizes"] = used_sizes;
    entry["mean_seconds"] = means;
    entry["std_seconds"] = stds;
    entry["cost_exponent"] = exponent;
    algorithms[name] = entry;
  }

  ordered_json j;
  j["command"] = "bench";
  j["seed"] = config.seed;
  j["d"] = config.bench_dim;
  j["particles"] = config.sampler.particles;
  j["reps"] = config.bench_reps;
  j["postpost_cap"] = config.postpost_cap;
  ordered_json machine;
  machine["hardware_threads"] = std::thread::hardware_concurrency();
  machine["pointer_bits"] = static_cast<int>(sizeof(void*) * 8);
  j["machine"] = machine;
  j["sizes"] = sizes;
  j["algorithms"] = algorithms;
  write_json(out / "bench.json", j);
  write_text(out / "bench.csv", csv);
  return 0;
}

int run_command(const RunConfig& config) {
  try {
    switch (config.command) {
      case RunConfig::Command::generate: return cmd_generate(config);
      case RunConfig::Command::fit: return cmd_fit(config);
      case RunConfig::Command::eval: return cmd_eval(config);
      case RunConfig::Command::bench: return cmd_bench(config);
    }
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
}

}  // namespace coaltree
