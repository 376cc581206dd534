// Acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance [--expect-fail 2,3,4] [--only 1,5]
//
// Exits 0 iff the set of failing criteria equals the expected set.

#include <malloc.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <limits>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mrn/config.hpp"
#include "mrn/critics.hpp"
#include "mrn/csv.hpp"
#include "mrn/exact_solver.hpp"
#include "mrn/gcrl.hpp"
#include "mrn/quasimetric.hpp"
#include "mrn/toyworld.hpp"
#include "mrn/verification.hpp"

using namespace mrn;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v) { return format_double(v); }

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::set<int> parse_set(const std::string& text) {
  std::set<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.insert(std::stoi(item));
  }
  return out;
}

// Same corpus as the verify-theory defaults.
constexpr std::uint64_t kCorpusSeed = 7;
constexpr int kPairMdps = 50;
constexpr int kAggregatedMdps = 20;
constexpr double kSlack = 1e-9;
constexpr double kViTol = 1e-10;

std::vector<DiscreteGcMdp> corpus(bool aggregated) {
  std::mt19937_64 rng(kCorpusSeed);
  RandomMdpOptions opt;
  std::vector<DiscreteGcMdp> out;
  for (int i = 0; i < kPairMdps + kAggregatedMdps; ++i) {
    opt.aggregated_goals = i >= kPairMdps;
    auto mdp = random_mdp(rng, opt);
    if (opt.aggregated_goals == aggregated) out.push_back(std::move(mdp));
  }
  return out;
}

Outcome criterion1() {
  const auto t0 = Clock::now();
  std::size_t triples = 0, violations = 0;
  double worst = -kInf;
  bool bounds = true;
  for (const auto& mdp : corpus(false)) {
    bounds = bounds && mdp.n_states <= 6 && mdp.n_actions <= 3 && (mdp.gamma == 0.9 || mdp.gamma == 0.98);
    const auto report = verify_triangle(mdp, kViTol);
    triples += report.triples;
    violations += report.violations;
    worst = std::max(worst, report.worst_margin);
  }
  const double secs = seconds_since(t0);
  return {violations == 0 && bounds && secs < 60.0,
          std::to_string(kPairMdps) + " MDPs, " + std::to_string(triples) + " triples, " +
              std::to_string(violations) + " violations at slack 1e-9 (worst margin " + fmt(worst) + "), " +
              fmt(secs) + " s"};
}

std::size_t axiom_violations(const ViolationReport& r) {
  return r.non_negativity.count + r.identity.count + r.triangle.count;
}

Outcome criterion2() {
  AxiomCheckOptions opt;
  opt.tol = kSlack;
  opt.exhaustive_limit = 64;
  std::size_t literal = 0, closed = 0, mdps_failing = 0;
  bool embedding = true;
  std::string witness;
  for (const auto& mdp : corpus(false)) {
    const Eigen::MatrixXd q = solve_goals(mdp, kViTol);
    const auto lit = check_axioms(lift_qstar(q, LiftRule::Literal).negated(), opt);
    const auto clo = lift_qstar(q, LiftRule::Closed);
    literal += axiom_violations(lit);
    closed += axiom_violations(check_axioms(clo.negated(), opt));
    mdps_failing += lit.passed() ? 0 : 1;
    if (witness.empty() && !lit.passed()) {
      const auto [a, b, c] = lit.triangle.witness;
      witness = "first witness: triangle (" + std::to_string(a) + "," + std::to_string(b) + "," + std::to_string(c) +
                ") on a " + std::to_string(q.rows()) + "-pair MDP, margin " + fmt(lit.triangle.worst_margin);
    }
    for (Index x = 0; x < q.rows(); ++x)
      for (Index y = 0; y < q.rows(); ++y) embedding = embedding && clo(x, clo.embed(x, y)) == q(x, y);
  }
  return {literal == 0 && embedding,
          "literal lift: " + std::to_string(literal) + " axiom violations on " + std::to_string(mdps_failing) +
              " of " + std::to_string(kPairMdps) + " MDPs (" + witness + "); closed lift: " + std::to_string(closed) +
              " violations; embedding exact: " + (embedding ? "yes" : "no")};
}

Outcome criterion3() {
  double discrepancy = 0.0, excess = -kInf;
  int failing = 0, n = 0;
  std::string witness;
  for (const auto& mdp : corpus(true)) {
    ++n;
    const auto r = verify_sup_identity(mdp, kViTol);
    excess = std::max(excess, r.max_excess);
    if (r.max_discrepancy > kSlack) {
      ++failing;
      if (witness.empty()) {
        witness = "first witness: pair " + std::to_string(r.witness_pair) + ", goal " +
                  std::to_string(r.witness_goal) + ", discrepancy " + fmt(r.max_discrepancy);
      }
    }
    discrepancy = std::max(discrepancy, r.max_discrepancy);
  }
  return {n >= 20 && discrepancy <= kSlack,
          std::to_string(n) + " aggregated MDPs, max discrepancy " + fmt(discrepancy) + " on " +
              std::to_string(failing) + " MDPs (" + witness + "); one-sided bound max excess " + fmt(excess) +
              " <= 1e-9: " + (excess <= kSlack ? "holds" : "violated")};
}

struct HeadStats {
  int heads_failing = 0;
  double max_identity = 0.0;
  double min_distance = kInf;
  double worst_triangle = -kInf;
};

HeadStats random_heads(SymReduction reduction, int heads, Index triples) {
  HeadStats stats;
  for (int h = 0; h < heads; ++h) {
    Rng init(1000 + static_cast<std::uint64_t>(h));
    CriticConfig c = default_sizing(CriticKind::Mrn);
    c.sym_reduction = reduction;
    Critic<double> critic(c, 2, 2, 2, init);
    std::mt19937_64 rng(static_cast<std::uint64_t>(h));
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    const auto sample = [&] {
      Matrix<double> m(triples, critic.latent_dim());
      for (Index k = 0; k < m.size(); ++k) m.data()[k] = u(rng);
      return m;
    };
    const Matrix<double> a = sample(), b = sample(), c3 = sample();
    Tape<double> tape(true);
    const auto A = tape.constant(a), B = tape.constant(b), C = tape.constant(c3);
    const auto d = [&](const Tensor<double>& x, const Tensor<double>& y) -> Matrix<double> {
      return critic.latent_distance(tape, x, y, false).total.value();
    };
    const Matrix<double> daa = d(A, A), dab = d(A, B), dbc = d(B, C), dac = d(A, C);
    const double identity = daa.cwiseAbs().maxCoeff();
    const double lowest = std::min({dab.minCoeff(), dbc.minCoeff(), dac.minCoeff()});
    const double triangle = (dac - dab - dbc).maxCoeff();
    stats.max_identity = std::max(stats.max_identity, identity);
    stats.min_distance = std::min(stats.min_distance, lowest);
    stats.worst_triangle = std::max(stats.worst_triangle, triangle);
    stats.heads_failing += (identity != 0.0 || lowest < 0.0 || triangle > kSlack) ? 1 : 0;
  }
  return stats;
}

// A small-margin violation injected into the distance table of a metric
// head must be reported with a witness reproducing the margin.
int injected_faults_missed(int trials) {
  int missed = 0;
  CriticConfig c = default_sizing(CriticKind::Mrn);
  c.sym_reduction = SymReduction::Norm;
  for (int t = 0; t < trials; ++t) {
    Rng init(5000 + static_cast<std::uint64_t>(t));
    Critic<double> critic(c, 2, 2, 2, init);
    std::mt19937_64 rng(static_cast<std::uint64_t>(t));
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    const Index n = 24;
    Matrix<double> z(n, critic.latent_dim());
    for (Index k = 0; k < z.size(); ++k) z.data()[k] = u(rng);
    Eigen::MatrixXd table(n, n);
    for (Index i = 0; i < n; ++i) {
      Tape<double> tape(true);
      const auto x = tape.constant(Matrix<double>(z.row(i).replicate(n, 1)));
      table.row(i) = critic.latent_distance(tape, x, tape.constant(z), false).total.value().transpose();
    }
    DistanceTable d(table);
    AxiomCheckOptions opt;
    opt.tol = kSlack;
    if (!check_axioms(d, opt).passed()) {
      ++missed;
      continue;
    }
    std::uniform_int_distribution<Index> pick(0, n - 1);
    Index i = pick(rng), j = pick(rng), k = pick(rng);
    while (j == i) j = pick(rng);
    while (k == i || k == j) k = pick(rng);
    const double bump = 1e-6;
    d(i, k) = d(i, j) + d(j, k) + bump;
    const auto r = check_axioms(d, opt);
    const auto [wi, wj, wk] = r.triangle.witness;
    const bool caught = r.triangle.count > 0 && r.triangle.worst_margin >= bump * 0.5 &&
                        std::abs(d(wi, wk) - d(wi, wj) - d(wj, wk) - r.triangle.worst_margin) <= 1e-12;
    missed += caught ? 0 : 1;
  }
  return missed;
}

Outcome criterion4() {
  constexpr int kHeads = 100;
  constexpr Index kTriples = 10000;
  const auto mean = random_heads(SymReduction::Mean, kHeads, kTriples);
  const auto norm = random_heads(SymReduction::Norm, kHeads, kTriples);
  const int missed = injected_faults_missed(100);
  const auto describe = [](const HeadStats& s) {
    return std::to_string(s.heads_failing) + " of 100 heads fail (max |d(x,x)| " + fmt(s.max_identity) +
           ", min d " + fmt(s.min_distance) + ", worst triangle margin " + fmt(s.worst_triangle) + ")";
  };
  return {mean.heads_failing == 0 && missed == 0,
          "mean-of-squares head: " + describe(mean) + "; L2 head: " + describe(norm) + "; injected faults missed " +
              std::to_string(missed) + " of 100"};
}

Outcome criterion5() {
  GradientSuiteOptions opt;
  opt.trials = 100;
  opt.check.tol = 1e-4;
  const auto rows = run_gradient_suite(opt);
  int failures = 0;
  double worst = 0.0;
  std::string worst_target;
  for (const auto& r : rows) {
    failures += r.failures;
    if (r.max_rel_error >= worst) {
      worst = r.max_rel_error;
      worst_target = r.target;
    }
  }
  return {failures == 0 && worst < 1e-4,
          std::to_string(rows.size()) + " targets x 100 parameterizations, " + std::to_string(failures) +
              " failures, max relative error " + fmt(worst) + " (" + worst_target + ")"};
}

// Exact comparison of path lengths s + sqrt(2) d from integer step counts.
bool length_le(PathSteps x, PathSteps y) {
  const long long a = y.straight - x.straight;
  const long long b = y.diagonal - x.diagonal;
  if (a >= 0 && b >= 0) return true;
  if (a <= 0 && b <= 0) return false;
  return a > 0 ? a * a >= 2 * b * b : 2 * b * b >= a * a;
}

PathSteps add(PathSteps x, PathSteps y) { return {x.straight + y.straight, x.diagonal + y.diagonal}; }

bool same_path_length(PathSteps x, PathSteps y) { return x.straight == y.straight && x.diagonal == y.diagonal; }

struct OracleCheck {
  std::size_t triples = 0;
  std::size_t violations = 0;
  std::size_t asymmetric = 0;
  bool finite = true;
  bool identity = true;
  bool float_lengths_match = true;
  Index wa = -1, wb = -1;
};

OracleCheck check_oracle(const ToyWorld& world, std::size_t sampled) {
  const Index n = world.node_count();
  std::vector<PathSteps> steps(static_cast<std::size_t>(n * n));
  OracleCheck out;
  for (int u = 0; u < n; ++u) {
    const auto row = world.step_counts_from(u);
    const auto dist = world.distances_from(u);
    for (int v = 0; v < n; ++v) {
      const PathSteps p = row[static_cast<std::size_t>(v)];
      steps[static_cast<std::size_t>(u * n + v)] = p;
      out.finite = out.finite && p.straight >= 0 && p.diagonal >= 0;
      out.float_lengths_match = out.float_lengths_match && dist[static_cast<std::size_t>(v)] == world.path_length(p);
    }
    out.identity = out.identity && same_path_length(row[static_cast<std::size_t>(u)], {0, 0});
  }
  const auto d = [&](Index a, Index b) { return steps[static_cast<std::size_t>(a * n + b)]; };
  const auto triple = [&](Index a, Index b, Index c) {
    ++out.triples;
    out.violations += length_le(d(a, c), add(d(a, b), d(b, c))) ? 0 : 1;
  };
  if (sampled == 0) {
    for (Index a = 0; a < n; ++a)
      for (Index b = 0; b < n; ++b)
        for (Index c = 0; c < n; ++c) triple(a, b, c);
  } else {
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<Index> pick(0, n - 1);
    for (std::size_t t = 0; t < sampled; ++t) {
      const Index a = pick(rng), b = pick(rng), c = pick(rng);
      triple(a, b, c);
    }
  }
  for (Index a = 0; a < n; ++a)
    for (Index b = a + 1; b < n; ++b)
      if (!same_path_length(d(a, b), d(b, a)) && out.asymmetric++ == 0) {
        out.wa = a;
        out.wb = b;
      }
  return out;
}

Outcome criterion6() {
  const auto t0 = Clock::now();
  std::string detail;
  bool ok = true;
  // Exhaustive over all triples on a coarse grid, sampled on the full one.
  // Step counts make every comparison exact.
  for (int grid : {16, 64}) {
    for (double eta : {0.05, 0.1, 0.2, 0.25, 0.5, 1.0}) {
      const ToyWorld world(eta, grid);
      const auto r = check_oracle(world, grid == 16 ? 0 : 1000000);
      const bool shape_ok = eta == 1.0 ? r.asymmetric == 0 : (eta > 0.2 || r.asymmetric > 0);
      const bool axioms = r.finite && r.identity && r.violations == 0 && r.float_lengths_match;
      ok = ok && axioms && shape_ok;
      if (grid == 64 && (eta == 0.1 || eta == 0.2 || eta == 1.0)) {
        detail += "grid 64 eta " + fmt(eta) + ": " + std::to_string(r.asymmetric) + " asymmetric pairs";
        if (r.wa >= 0) {
          detail += " (e.g. nodes " + std::to_string(r.wa) + ", " + std::to_string(r.wb) + ": " +
                    fmt(world.oracle_distance(world.position(static_cast<int>(r.wa)),
                                              world.position(static_cast<int>(r.wb)))) +
                    " vs " +
                    fmt(world.oracle_distance(world.position(static_cast<int>(r.wb)),
                                              world.position(static_cast<int>(r.wa)))) +
                    ")";
        }
        detail += "; ";
      }
      if (!axioms || !shape_ok) {
        detail += "grid " + std::to_string(grid) + " eta " + fmt(eta) + ": " + std::to_string(r.violations) +
                  " triangle violations, finite " + (r.finite ? "yes" : "no") + ", identity " +
                  (r.identity ? "yes" : "no") + "; ";
      }
    }
  }
  return {ok, detail + "exact axioms for eta in {0.05, 0.1, 0.2, 0.25, 0.5, 1} (all triples at grid 16, 1e6 at grid 64), " +
                  fmt(seconds_since(t0)) + " s"};
}

// Toy settings: full-batch float regression, five seeds per cell.
const std::vector<std::uint64_t> kToySeeds{1, 2, 3, 4, 5};

Outcome criterion7() {
  const auto t0 = Clock::now();
  ExperimentConfig config;
  const auto fit = [&](const std::string& arch, const ToyDataset& data, std::uint64_t seed) {
    return fit_regression<float>(data, make_toy_regression(config, arch, seed));
  };

  std::vector<double> mrn_median, sym_at_01;
  const std::vector<double> etas{0.1, 0.25, 0.5, 1.0};
  std::string detail = "(a) MRN median min gen error by eta:";
  for (double eta : etas) {
    const ToyWorld world(eta, 64);
    std::vector<double> errs;
    for (auto seed : kToySeeds) {
      ToyDatasetOptions opt;
      opt.seed = seed;
      const auto data = make_toy_dataset(world, opt);
      errs.push_back(fit("mrn", data, seed).min_gen_mse);
      if (eta == 0.1) sym_at_01.push_back(fit("mrn-sym-only", data, seed).min_gen_mse);
    }
    mrn_median.push_back(median(errs));
    detail += " " + fmt(mrn_median.back());
  }
  bool a = true;
  for (std::size_t i = 1; i < mrn_median.size(); ++i) a = a && mrn_median[i] <= 1.1 * mrn_median[i - 1];
  const bool b = mrn_median[0] < median(sym_at_01);
  detail += std::string(a ? " ok" : " NOT monotone") + "; (b) eta 0.1 MRN " + fmt(mrn_median[0]) + " vs sym-only " +
            fmt(median(sym_at_01)) + (b ? " ok" : " NOT better");

  ToyDatasetOptions k_opt;
  k_opt.n_train = static_cast<int>(config.get_int("toy", "k_train"));
  k_opt.n_eval = 1;
  k_opt.seed = 0;
  k_opt.with_reversed = true;
  const auto k_data = make_toy_dataset(ToyWorld(0.1, 64), k_opt);
  RegressionConfig base = make_toy_regression(config, "mrn", 0);
  base.eval_every = base.iterations;
  const std::vector<Index> ks{0, 1, 8, 64, 176};
  const auto rows = approximation_vs_k<float>(k_data, ks, kToySeeds, base);
  std::vector<double> k_median;
  for (Index k : ks) {
    std::vector<double> v;
    for (const auto& r : rows)
      if (r.k == k) v.push_back(r.min_train_mse);
    k_median.push_back(median(v));
  }
  bool c = true;
  detail += "; (c) median train error by K:";
  for (std::size_t i = 0; i < ks.size(); ++i) {
    detail += " " + fmt(k_median[i]);
    if (i > 0) c = c && k_median[i] <= 1.1 * k_median[i - 1];
  }
  const double secs = seconds_since(t0);
  detail += std::string(c ? " ok" : " NOT monotone") + "; " + fmt(secs) + " s";
  return {a && b && c && secs < 600.0, detail};
}

// Point-mass settings shared by criteria 8 and 9.
constexpr int kEpochs = 10;
constexpr int kStabilityEpochs = 5;
const std::vector<std::uint64_t> kTrainSeeds{100, 200, 300, 400, 500};

struct RunSet {
  std::vector<TrainResult> runs;
  double max_seconds = 0.0;
  bool finite = true;
  std::string error;
};

bool curve_finite(const TrainResult& r) {
  for (const auto& row : r.curve) {
    if (!std::isfinite(row.success_rate) || !std::isfinite(row.critic_loss) || !std::isfinite(row.actor_loss)) {
      return false;
    }
  }
  return true;
}

RunSet train_set(const std::string& arch, double lr, const std::vector<std::uint64_t>& seeds, int epochs) {
  ExperimentConfig config;
  config.set("train", "lr", fmt(lr));
  config.set("train", "epochs", std::to_string(epochs));
  RunSet set;
  for (auto seed : seeds) {
    const auto t0 = Clock::now();
    try {
      set.runs.push_back(train<float>(make_train_config(config, arch, seed)));
      set.finite = set.finite && curve_finite(set.runs.back());
    } catch (const NumericError& e) {
      set.finite = false;
      set.error = e.what();
    }
    set.max_seconds = std::max(set.max_seconds, seconds_since(t0));
    std::cerr << "  " << arch << " lr " << lr << " seed " << seed << ": "
              << (set.runs.empty() ? std::string("-") : fmt(set.runs.back().final_success())) << " ("
              << fmt(seconds_since(t0)) << " s)" << std::endl;
  }
  return set;
}

double median_epochs_to(const RunSet& set, double threshold) {
  std::vector<double> v;
  for (const auto& r : set.runs) {
    const int e = r.epochs_to(threshold);
    v.push_back(e < 0 ? kInf : e);
  }
  return median(v);
}

double median_final(const RunSet& set) {
  std::vector<double> v;
  for (const auto& r : set.runs) v.push_back(r.final_success());
  return median(v);
}

std::string epochs_list(const RunSet& set) {
  std::string out;
  for (const auto& r : set.runs) out += (out.empty() ? "" : " ") + std::to_string(r.epochs_to(0.9));
  return out;
}

RunSet mrn_runs;  // shared by criteria 8 and 9

Outcome criterion8() {
  mrn_runs = train_set("mrn", 1e-3, kTrainSeeds, kEpochs);
  const RunSet mono = train_set("monolithic", 1e-3, kTrainSeeds, kEpochs);
  const double mrn_e = median_epochs_to(mrn_runs, 0.9);
  const double mono_e = median_epochs_to(mono, 0.9);
  const double mrn_final = median_final(mrn_runs);
  const double wall = std::max(mrn_runs.max_seconds, mono.max_seconds);
  return {mrn_runs.finite && mono.finite && mrn_e <= mono_e && mrn_final >= 0.9 && wall < 900.0,
          "median epochs to 0.9: MRN " + fmt(mrn_e) + " [" + epochs_list(mrn_runs) + "] vs monolithic " +
              fmt(mono_e) + " [" + epochs_list(mono) + "] (-1: not within " + std::to_string(kEpochs) +
              " epochs); MRN median final success " + fmt(mrn_final) + "; slowest run " + fmt(wall) + " s"};
}

// Success rates are estimated from 100 rollouts per epoch; a gap within
// this margin is treated as noise.
constexpr double kSuccessNoise = 0.1;

Outcome criterion9() {
  if (mrn_runs.runs.empty()) mrn_runs = train_set("mrn", 1e-3, kTrainSeeds, kEpochs);
  const double mrn_final = median_final(mrn_runs);
  bool ok = true;
  std::string detail = "MRN median final " + fmt(mrn_final) + ";";
  for (const std::string arch : {"mrn-sym-only", "mrn-asym-only"}) {
    const auto set = train_set(arch, 1e-3, kTrainSeeds, kEpochs);
    const double final = median_final(set);
    const bool beaten = final > mrn_final + kSuccessNoise;
    ok = ok && set.finite && !beaten;
    detail += " " + arch + " " + fmt(final) + (set.finite ? "" : " NON-FINITE " + set.error) + ";";
  }
  const std::vector<std::uint64_t> stability_seeds{100, 200};
  for (const auto& [arch, lr] : std::vector<std::pair<std::string, double>>{
           {"mrn-sag", 1e-3}, {"mrn-sym-only", 2e-3}, {"mrn-asym-only", 2e-3}, {"mrn-sag", 2e-3}}) {
    const auto set = train_set(arch, lr, stability_seeds, kStabilityEpochs);
    ok = ok && set.finite && set.runs.size() == stability_seeds.size();
    detail += " " + arch + " lr " + fmt(lr) + (set.finite ? " finite" : " NON-FINITE " + set.error) + ";";
  }
  return {ok, detail};
}

Outcome criterion10() {
  bool same = true;
  ExperimentConfig config;
  config.set("train", "epochs", "2");
  config.set("train", "cycles_per_epoch", "3");
  std::string detail;
  for (const std::string arch : {"mrn", "monolithic", "bvn"}) {
    const auto csv = [&] { return curve_csv_rows(train<float>(make_train_config(config, arch, 100))); };
    same = same && csv() == csv();
  }
  detail += "train curves (mrn, monolithic, bvn): " + std::string(same ? "identical" : "DIFFER");

  const ToyWorld world(0.1, 64);
  ToyDatasetOptions opt;
  opt.seed = 3;
  opt.n_eval = 2000;
  const auto data = make_toy_dataset(world, opt);
  RegressionConfig rc = make_toy_regression(config, "mrn", 3);
  rc.iterations = 300;
  const auto toy_csv = [&] { return toy_csv_rows("mrn", 0.1, 16, 3, fit_regression<float>(data, rc)); };
  const bool toy_same = toy_csv() == toy_csv();
  detail += "; toy curves: " + std::string(toy_same ? "identical" : "DIFFER");

  GradientSuiteOptions g;
  g.trials = 5;
  const bool grad_same = gradient_suite_csv(run_gradient_suite(g)) == gradient_suite_csv(run_gradient_suite(g));
  TheorySuiteOptions t;
  t.mdps = 10;
  t.aggregated_mdps = 5;
  const bool theory_same = theory_csv(run_theory_suite(t)) == theory_csv(run_theory_suite(t));
  detail += "; gradcheck and theory tables: " + std::string(grad_same && theory_same ? "identical" : "DIFFER");
  return {same && toy_same && grad_same && theory_same, detail};
}

}  // namespace

int main(int argc, char** argv) {
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 512 << 20);

  std::set<int> expected_failures, only;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--expect-fail" && i + 1 < argc) {
      expected_failures = parse_set(argv[++i]);
    } else if (arg == "--only" && i + 1 < argc) {
      only = parse_set(argv[++i]);
    } else {
      std::cerr << "usage: acceptance [--expect-fail 2,3,4] [--only 1,5]\n";
      return 2;
    }
  }

  const std::vector<std::pair<int, std::function<Outcome()>>> criteria = {
      {1, criterion1}, {2, criterion2}, {3, criterion3}, {4, criterion4},  {5, criterion5},
      {6, criterion6}, {7, criterion7}, {8, criterion8}, {9, criterion9}, {10, criterion10},
  };
  std::set<int> failed;
  for (const auto& [id, run] : criteria) {
    if (!only.empty() && only.count(id) == 0) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) failed.insert(id);
    std::cout << "criterion " << id << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << "  ["
              << fmt(seconds_since(t0)) << " s]" << std::endl;
  }

  std::set<int> expected;
  for (int id : expected_failures)
    if (only.empty() || only.count(id) > 0) expected.insert(id);
  if (failed != expected) {
    std::cout << "outcome differs from the expected failure set" << std::endl;
    return 1;
  }
  std::cout << "outcome matches the expected failure set (" << expected.size() << " expected failures)" << std::endl;
  return 0;
}
