// mrn: command line front end for the experiments.
//
//   mrn gradcheck      [--config F] [--set k=v]... [--out DIR]
//   mrn verify-theory  ...
//   mrn toy            ... [--arch a,b] [--seeds 0,1] [--workers N]
//   mrn train          ... [--arch a,b] [--seeds 100,200] [--workers N]
//   mrn eval           ... --set eval.checkpoint=PATH [--arch a]
//
// Exit status: 0 success, 1 a check failed or a run aborted, 2 bad
// configuration or input.

#include <malloc.h>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "mrn/config.hpp"
#include "mrn/csv.hpp"
#include "mrn/gcrl.hpp"
#include "mrn/summary.hpp"
#include "mrn/toyworld.hpp"
#include "mrn/verification.hpp"

namespace fs = std::filesystem;
using namespace mrn;

namespace {

constexpr int kOk = 0;
constexpr int kCheckFailed = 1;
constexpr int kBadInput = 2;

struct CommonOptions {
  std::vector<std::string> configs;
  std::vector<std::string> sets;
  std::string out;
  std::string seeds;
  std::string arch;
  int workers = 0;
};

void add_common(CLI::App* cmd, CommonOptions& o, bool grid) {
  cmd->add_option("--config", o.configs, "config file (repeatable, later files win)")->check(CLI::ExistingFile);
  cmd->add_option("--set", o.sets, "override, section.key=value (repeatable)");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--workers", o.workers, "parallel runs")->check(CLI::PositiveNumber);
  cmd->add_option("--arch", o.arch, grid ? "comma separated critic variants" : "critic variant");
  if (grid) cmd->add_option("--seeds", o.seeds, "comma separated seeds");
}

ExperimentConfig resolve(const std::string& section, const CommonOptions& o) {
  ExperimentConfig config;
  for (const auto& f : o.configs) config.merge_file(f);
  for (const auto& s : o.sets) config.set(s);
  if (!o.out.empty()) config.set("", "output_dir", o.out);
  if (o.workers > 0) config.set("", "workers", std::to_string(o.workers));
  if (!o.arch.empty()) config.set(section, "arch", o.arch);
  if (!o.seeds.empty()) config.set(section, "seeds", o.seeds);
  return config;
}

fs::path output_dir(const ExperimentConfig& config) {
  fs::path dir = config.get("", "output_dir");
  const char* root = std::getenv("MRN_OUTPUT_ROOT");
  if (root != nullptr && *root != '\0' && dir.is_relative()) dir = fs::path(root) / dir;
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

int workers_of(const ExperimentConfig& config) {
  const long long w = config.get_int("", "workers");
  if (w <= 0) throw ConfigError("'workers' must be positive");
  return static_cast<int>(w);
}

// Runs job(0..n-1) on a pool. Errors are kept per job so that finished
// results are still written in job order.
std::vector<std::string> run_jobs(std::size_t n, int workers, const std::function<void(std::size_t)>& job) {
  std::vector<std::string> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        job(i);
      } catch (const std::exception& e) {
        errors[i] = e.what();
        if (errors[i].empty()) errors[i] = "unknown error";
      }
    }
  };
  std::vector<std::thread> pool;
  const std::size_t count = std::min<std::size_t>(n, static_cast<std::size_t>(workers));
  for (std::size_t t = 1; t < count; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return errors;
}

std::mutex log_mutex;

void log_line(const std::string& line) {
  std::lock_guard<std::mutex> lock(log_mutex);
  std::cout << line << std::endl;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

int cmd_gradcheck(const ExperimentConfig& config, const fs::path& dir) {
  GradientSuiteOptions opt;
  opt.trials = static_cast<int>(config.get_int("gradcheck", "trials"));
  opt.seed = config.get_seeds("gradcheck", "seed").at(0);
  opt.check.step = config.get_double("gradcheck", "step");
  opt.check.tol = config.get_double("gradcheck", "tol");
  if (opt.trials <= 0) throw ConfigError("'gradcheck.trials' must be positive");
  const auto rows = run_gradient_suite(opt);
  write_text(dir / "gradcheck.csv", gradient_suite_csv(rows));
  bool ok = true;
  for (const auto& r : rows) {
    ok = ok && r.failures == 0;
    std::cout << r.target << ": " << r.trials << " trials, " << r.failures << " failures, max rel error "
              << format_double(r.max_rel_error) << "\n";
  }
  std::cout << (ok ? "gradcheck passed" : "gradcheck FAILED") << std::endl;
  return ok ? kOk : kCheckFailed;
}

int cmd_verify_theory(const ExperimentConfig& config, const fs::path& dir) {
  TheorySuiteOptions opt;
  opt.corpus_seed = config.get_seeds("verify-theory", "corpus_seed").at(0);
  opt.mdps = static_cast<int>(config.get_int("verify-theory", "mdps"));
  opt.aggregated_mdps = static_cast<int>(config.get_int("verify-theory", "aggregated_mdps"));
  opt.max_states = static_cast<int>(config.get_int("verify-theory", "max_states"));
  opt.max_actions = static_cast<int>(config.get_int("verify-theory", "max_actions"));
  opt.vi_tol = config.get_double("verify-theory", "vi_tol");
  opt.slack = config.get_double("verify-theory", "slack");
  if (opt.mdps < 0 || opt.aggregated_mdps < 0 || opt.max_states < 1 || opt.max_actions < 1) {
    throw ConfigError("verify-theory: corpus sizes must be non-negative and state/action limits positive");
  }
  const auto report = run_theory_suite(opt);
  write_text(dir / "theory.csv", theory_csv(report));
  std::cout << "triangle violations: " << report.triangle_violations() << "\n"
            << "closed lift axiom violations: " << report.closed_lift_violations() << "\n"
            << "literal lift axiom violations: " << report.literal_lift_violations() << " (reported only)\n"
            << "embedding exact: " << (report.embeddings_exact() ? "yes" : "no") << "\n"
            << "sup identity: max discrepancy " << format_double(report.max_sup_discrepancy())
            << " (reported only), max excess " << format_double(report.max_sup_excess()) << "\n"
            << (report.passed() ? "verify-theory passed" : "verify-theory FAILED") << std::endl;
  return report.passed() ? kOk : kCheckFailed;
}

template <typename Scalar>
int cmd_toy(const ExperimentConfig& config, const fs::path& dir) {
  const auto archs = config.get_list("toy", "arch");
  const auto etas = config.get_doubles("toy", "eta");
  const auto seeds = config.get_seeds("toy", "seeds");
  const int grid = static_cast<int>(config.get_int("toy", "grid_n"));
  ToyDatasetOptions data_opt;
  data_opt.n_train = static_cast<int>(config.get_int("toy", "n_train"));
  data_opt.n_eval = static_cast<int>(config.get_int("toy", "n_eval"));
  for (const auto& a : archs) make_toy_regression(config, a, 0);

  struct Job {
    std::size_t arch;
    std::size_t eta;
    std::size_t seed;
  };
  std::vector<Job> jobs;
  for (std::size_t a = 0; a < archs.size(); ++a)
    for (std::size_t e = 0; e < etas.size(); ++e)
      for (std::size_t s = 0; s < seeds.size(); ++s) jobs.push_back({a, e, s});

  std::map<std::pair<std::size_t, std::size_t>, ToyDataset> datasets;
  for (std::size_t e = 0; e < etas.size(); ++e) {
    const ToyWorld world(etas[e], grid);
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      data_opt.seed = seeds[s];
      datasets[{e, s}] = make_toy_dataset(world, data_opt);
    }
  }

  std::vector<RegressionResult> results(jobs.size());
  const auto errors = run_jobs(jobs.size(), workers_of(config), [&](std::size_t i) {
    const Job& j = jobs[i];
    const auto start = std::chrono::steady_clock::now();
    results[i] =
        fit_regression<Scalar>(datasets.at({j.eta, j.seed}), make_toy_regression(config, archs[j.arch], seeds[j.seed]));
    log_line("toy " + archs[j.arch] + " eta=" + format_double(etas[j.eta]) + " seed=" + std::to_string(seeds[j.seed]) +
             ": min gen mse " + format_double(results[i].min_gen_mse) + " (" + format_double(seconds_since(start)) +
             " s)");
  });

  const auto asym_dim = static_cast<Index>(config.get_int("toy", "asym_dim"));
  std::string curves = toy_csv_header();
  std::string summary = "arch,eta,seed,min_gen_mse,min_gen_iteration,min_train_mse\n";
  int status = kOk;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const Job& j = jobs[i];
    if (!errors[i].empty()) {
      std::cerr << "toy " << archs[j.arch] << " eta=" << etas[j.eta] << " seed=" << seeds[j.seed]
                << " aborted: " << errors[i] << "\n";
      status = kCheckFailed;
      continue;
    }
    const Index k = parse_critic_kind(archs[j.arch]) == CriticKind::MrnSymOnly ? 0 : asym_dim;
    curves += toy_csv_rows(archs[j.arch], etas[j.eta], k, seeds[j.seed], results[i]);
    summary += csv_row({archs[j.arch], format_double(etas[j.eta]), std::to_string(seeds[j.seed]),
                        format_double(results[i].min_gen_mse), std::to_string(results[i].min_gen_iteration),
                        format_double(results[i].min_train_mse)});
  }
  write_text(dir / "toy_curves.csv", curves);
  write_text(dir / "toy_summary.csv", summary);

  const auto k_values = config.get_doubles("toy", "k_values");
  if (!k_values.empty()) {
    ToyDatasetOptions k_opt;
    k_opt.n_train = static_cast<int>(config.get_int("toy", "k_train"));
    k_opt.n_eval = 1;
    k_opt.seed = config.get_seeds("toy", "k_dataset_seed").at(0);
    k_opt.with_reversed = config.get_bool("toy", "k_reversed");
    const auto k_data = make_toy_dataset(ToyWorld(config.get_double("toy", "k_eta"), grid), k_opt);
    RegressionConfig base = make_toy_regression(config, "mrn", 0);
    base.iterations = static_cast<int>(config.get_int("toy", "k_iterations"));
    base.eval_every = base.iterations;

    std::vector<std::pair<Index, std::uint64_t>> k_jobs;
    for (double k : k_values) {
      if (k < 0 || k != static_cast<double>(static_cast<Index>(k))) {
        throw ConfigError("'toy.k_values' must be non-negative integers");
      }
      for (auto s : seeds) k_jobs.emplace_back(static_cast<Index>(k), s);
    }
    std::vector<KStudyRow> rows(k_jobs.size());
    const auto k_errors = run_jobs(k_jobs.size(), workers_of(config), [&](std::size_t i) {
      rows[i] = approximation_vs_k<Scalar>(k_data, {k_jobs[i].first}, {k_jobs[i].second}, base).at(0);
      log_line("toy K=" + std::to_string(rows[i].k) + " seed=" + std::to_string(rows[i].seed) + ": min train mse " +
               format_double(rows[i].min_train_mse));
    });
    std::string csv = "K,seed,min_train_mse\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (!k_errors[i].empty()) {
        std::cerr << "toy K=" << k_jobs[i].first << " seed=" << k_jobs[i].second << " aborted: " << k_errors[i]
                  << "\n";
        status = kCheckFailed;
        continue;
      }
      csv += csv_row({std::to_string(rows[i].k), std::to_string(rows[i].seed), format_double(rows[i].min_train_mse)});
    }
    write_text(dir / "k_study.csv", csv);
  }
  return status;
}

template <typename Scalar>
int cmd_train(const ExperimentConfig& config, const fs::path& dir) {
  const auto archs = config.get_list("train", "arch");
  const auto seeds = config.get_seeds("train", "seeds");
  const bool checkpoint = config.get_bool("train", "checkpoint");
  std::vector<TrainConfig> runs;
  for (const auto& a : archs)
    for (auto s : seeds) runs.push_back(make_train_config(config, a, s));

  std::vector<TrainResult> results(runs.size());
  const auto errors = run_jobs(runs.size(), workers_of(config), [&](std::size_t i) {
    const TrainConfig& run = runs[i];
    const auto start = std::chrono::steady_clock::now();
    std::unique_ptr<DdpgAgent<Scalar>> agent;
    results[i] = train<Scalar>(run, checkpoint ? &agent : nullptr);
    const std::string stem = run.arch_label + "_seed" + std::to_string(run.seed);
    write_text(dir / ("curve_" + stem + ".csv"), curve_csv_header() + curve_csv_rows(results[i]));
    if (agent) agent->save((dir / ("agent_" + stem + ".params")).string());
    log_line("train " + run.arch_label + " seed=" + std::to_string(run.seed) + ": final success " +
             format_double(results[i].final_success()) + ", epochs to 0.9 " +
             std::to_string(results[i].epochs_to(0.9)) + " (" + format_double(seconds_since(start)) + " s)");
  });

  int status = kOk;
  std::vector<RunRecord> records;
  const std::string id = train_config_id(config);
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (!errors[i].empty()) {
      std::cerr << "train " << runs[i].arch_label << " seed=" << runs[i].seed << " aborted: " << errors[i] << "\n";
      status = kCheckFailed;
      continue;
    }
    records.push_back({id, results[i]});
  }
  if (!records.empty()) {
    const auto rows = summarize_runs(records);
    write_text(dir / "summary.csv", summary_csv(rows));
    write_text(dir / "plot_data.tsv", summary_plot_data(rows));
  }
  return status;
}

template <typename Scalar>
int cmd_eval(const ExperimentConfig& config, const fs::path& dir) {
  const std::string path = config.get("eval", "checkpoint");
  if (path.empty()) throw ConfigError("'eval.checkpoint' is required");
  if (!fs::exists(path)) throw ConfigError("checkpoint not found: " + path);
  const std::string arch = config.get("eval", "arch");
  const TrainConfig run = make_train_config(config, arch, 0);
  const long long rollouts = config.get_int("eval", "rollouts");
  if (rollouts <= 0) throw ConfigError("'eval.rollouts' must be positive");
  const std::uint64_t seed = config.get_seeds("eval", "seed").at(0);

  DdpgAgent<Scalar> agent(run.agent, run.env, 0);
  try {
    agent.load(path);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("cannot load checkpoint: ") + e.what());
  }
  const PointMassEnv env(run.env);
  Rng rng(seed);
  const double success = evaluate(env, agent.policy(), static_cast<int>(rollouts), rng);
  write_text(dir / "eval.csv", "checkpoint,arch,rollouts,seed,success_rate\n" +
                                   csv_row({path, arch, std::to_string(rollouts), std::to_string(seed),
                                            format_double(success)}));
  std::cout << "success rate " << format_double(success) << std::endl;
  return kOk;
}

int dispatch(const std::string& name, const CommonOptions& opt) {
  const ExperimentConfig config = resolve(name, opt);
  workers_of(config);
  const fs::path dir = output_dir(config);
  write_text(dir / (name + ".resolved.cfg"), config.to_text({name, name == "eval" ? "train" : name}));
  if (name == "gradcheck") return cmd_gradcheck(config, dir);
  if (name == "verify-theory") return cmd_verify_theory(config, dir);
  if (name == "toy") return uses_double(config, "toy") ? cmd_toy<double>(config, dir) : cmd_toy<float>(config, dir);
  if (name == "train") {
    return uses_double(config, "train") ? cmd_train<double>(config, dir) : cmd_train<float>(config, dir);
  }
  return uses_double(config, "train") ? cmd_eval<double>(config, dir) : cmd_eval<float>(config, dir);
}

}  // namespace

int main(int argc, char** argv) {
  // Keep freed tape buffers in the heap instead of returning them to the
  // kernel on every update.
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 512 << 20);

  CLI::App app{"Metric residual network experiments"};
  app.require_subcommand(1);
  std::map<std::string, CommonOptions> options;
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"gradcheck", "finite difference check of every critic and the actor loss"},
      {"verify-theory", "exact checks on random deterministic MDPs"},
      {"toy", "distance regression in the toy world"},
      {"train", "goal-conditioned training on the point mass"},
      {"eval", "evaluate a saved agent"},
  };
  for (const auto& [name, help] : commands) {
    add_common(app.add_subcommand(name, help), options[name], name == "toy" || name == "train");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kBadInput;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    return dispatch(name, options[name]);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kBadInput;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid setting: " << e.what() << "\n";
    return kBadInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kCheckFailed;
  }
}
