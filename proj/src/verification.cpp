#include "mrn/verification.hpp"

#include <algorithm>
#include <random>
#include <sstream>

#include "mrn/csv.hpp"
#include "mrn/exact_solver.hpp"
#include "mrn/quasimetric.hpp"

namespace mrn {

namespace {

const std::vector<CriticKind>& all_kinds() {
  static const std::vector<CriticKind> kinds{CriticKind::Monolithic, CriticKind::Bvn,         CriticKind::Mrn,
                                             CriticKind::MrnSymOnly, CriticKind::MrnAsymOnly, CriticKind::MrnSag};
  return kinds;
}

Matrix<double> uniform_matrix(Index rows, Index cols, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix<double> m(rows, cols);
  for (Index k = 0; k < m.size(); ++k) m.data()[k] = u(rng);
  return m;
}

void record(GradientSuiteRow& row, const GradCheckReport& report) {
  ++row.trials;
  row.failures += report.passed ? 0 : 1;
  row.max_rel_error = std::max(row.max_rel_error, report.max_rel_error);
  row.checked += report.checked;
  row.kinks_skipped += report.kinks_skipped;
}

}  // namespace

std::vector<GradientSuiteRow> run_gradient_suite(const GradientSuiteOptions& opt) {
  if (opt.trials <= 0) throw std::invalid_argument("run_gradient_suite: trials must be positive");
  std::vector<GradientSuiteRow> q_rows, actor_rows;
  for (auto kind : all_kinds()) {
    q_rows.push_back({critic_kind_name(kind)});
    actor_rows.push_back({std::string("actor-loss/") + critic_kind_name(kind)});
  }
  for (int trial = 0; trial < opt.trials; ++trial) {
    std::mt19937_64 rng(opt.seed + static_cast<std::uint64_t>(trial));
    std::uniform_int_distribution<Index> width(3, 7);
    std::uniform_int_distribution<Index> batch(2, 5);
    const Index n = batch(rng);
    const Matrix<double> s = uniform_matrix(n, 2, rng);
    const Matrix<double> a = uniform_matrix(n, 2, rng);
    const Matrix<double> g = uniform_matrix(n, 2, rng);
    for (std::size_t k = 0; k < all_kinds().size(); ++k) {
      CriticConfig c;
      c.kind = all_kinds()[k];
      c.mono_hidden = width(rng);
      c.mono_layers = 2;
      c.bvn_hidden = width(rng);
      c.bvn_layers = 2;
      c.encoder_hidden = width(rng);
      c.head_hidden = width(rng);
      c.embed_dim = width(rng);
      c.asym_dim = width(rng);
      Rng init(rng());
      Critic<double> critic(c, 2, 2, 2, init);
      const RowVector<double> one = RowVector<double>::Ones(2);
      Actor<double> actor(ActorConfig{width(rng), 2}, 2, 2, -one, one, init);

      record(q_rows[k], grad_check_parameters(
                            [&](Tape<double>& tape) {
                              return mean(critic.forward(tape, tape.constant(s), tape.constant(a), tape.constant(g)));
                            },
                            critic.parameters(), opt.check));
      record(actor_rows[k], grad_check_parameters(
                                [&](Tape<double>& tape) {
                                  const auto st = tape.constant(s);
                                  const auto gt = tape.constant(g);
                                  return -mean(critic.forward(tape, st, actor.forward(tape, st, gt), gt, false));
                                },
                                actor.parameters(), opt.check));
    }
  }
  q_rows.insert(q_rows.end(), actor_rows.begin(), actor_rows.end());
  return q_rows;
}

std::string gradient_suite_csv(const std::vector<GradientSuiteRow>& rows) {
  std::ostringstream os;
  os << "target,trials,failures,max_rel_error,checked,kinks_skipped\n";
  for (const auto& r : rows) {
    os << csv_row({r.target, std::to_string(r.trials), std::to_string(r.failures), format_double(r.max_rel_error),
                   std::to_string(r.checked), std::to_string(r.kinks_skipped)});
  }
  return os.str();
}

std::size_t TheoryReport::triangle_violations() const {
  std::size_t n = 0;
  for (const auto& r : rows) n += r.triangle_violations;
  return n;
}

std::size_t TheoryReport::closed_lift_violations() const {
  std::size_t n = 0;
  for (const auto& r : rows) n += r.lift_closed_violations;
  return n;
}

std::size_t TheoryReport::literal_lift_violations() const {
  std::size_t n = 0;
  for (const auto& r : rows) n += r.lift_literal_violations;
  return n;
}

bool TheoryReport::embeddings_exact() const {
  return std::all_of(rows.begin(), rows.end(), [](const TheoryRow& r) { return r.embedding_exact; });
}

double TheoryReport::max_sup_discrepancy() const {
  double m = 0.0;
  for (const auto& r : rows) m = std::max(m, r.sup_discrepancy);
  return m;
}

double TheoryReport::max_sup_excess() const {
  double m = -kInf;
  for (const auto& r : rows)
    if (r.goals == "aggregated") m = std::max(m, r.sup_excess);
  return m;
}

bool TheoryReport::passed() const {
  return triangle_violations() == 0 && closed_lift_violations() == 0 && embeddings_exact() &&
         max_sup_excess() <= slack;
}

TheoryReport run_theory_suite(const TheorySuiteOptions& opt) {
  if (opt.mdps < 0 || opt.aggregated_mdps < 0) throw std::invalid_argument("run_theory_suite: negative corpus size");
  std::mt19937_64 rng(opt.corpus_seed);
  RandomMdpOptions gen;
  gen.max_states = opt.max_states;
  gen.max_actions = opt.max_actions;
  AxiomCheckOptions axioms;
  axioms.tol = opt.slack;
  axioms.exhaustive_limit = 2 * opt.max_states * opt.max_actions;

  TheoryReport report;
  report.slack = opt.slack;
  const auto violations = [](const ViolationReport& r) {
    return r.non_negativity.count + r.identity.count + r.triangle.count;
  };
  for (int i = 0; i < opt.mdps + opt.aggregated_mdps; ++i) {
    gen.aggregated_goals = i >= opt.mdps;
    const auto mdp = random_mdp(rng, gen);
    TheoryRow row;
    row.index = i;
    row.goals = gen.aggregated_goals ? "aggregated" : "pairs";
    row.n_states = mdp.n_states;
    row.n_actions = mdp.n_actions;
    row.gamma = mdp.gamma;
    if (!gen.aggregated_goals) {
      const Eigen::MatrixXd q = solve_goals(mdp, opt.vi_tol);
      const auto tri = check_value_triangle(q, opt.slack);
      row.triangle_triples = tri.triples;
      row.triangle_violations = tri.violations;
      row.triangle_worst = tri.worst_margin;
      const auto closed = lift_qstar(q, LiftRule::Closed);
      row.lift_closed_violations = violations(check_axioms(closed.negated(), axioms));
      row.lift_literal_violations = violations(check_axioms(lift_qstar(q, LiftRule::Literal).negated(), axioms));
      for (Index x = 0; x < q.rows(); ++x)
        for (Index y = 0; y < q.rows(); ++y) row.embedding_exact = row.embedding_exact && closed(x, closed.embed(x, y)) == q(x, y);
    } else {
      const auto sup = verify_sup_identity(mdp, opt.vi_tol);
      row.sup_discrepancy = sup.max_discrepancy;
      row.sup_excess = sup.max_excess;
    }
    report.rows.push_back(row);
  }
  return report;
}

std::string theory_csv(const TheoryReport& report) {
  std::ostringstream os;
  os << "mdp,goals,states,actions,gamma,triangle_triples,triangle_violations,triangle_worst,"
        "closed_lift_violations,literal_lift_violations,embedding_exact,sup_discrepancy,sup_excess\n";
  for (const auto& r : report.rows) {
    const bool pairs = r.goals == "pairs";
    os << csv_row({std::to_string(r.index), r.goals, std::to_string(r.n_states), std::to_string(r.n_actions),
                   format_double(r.gamma), pairs ? std::to_string(r.triangle_triples) : "",
                   pairs ? std::to_string(r.triangle_violations) : "", pairs ? format_double(r.triangle_worst) : "",
                   pairs ? std::to_string(r.lift_closed_violations) : "",
                   pairs ? std::to_string(r.lift_literal_violations) : "", pairs ? (r.embedding_exact ? "1" : "0") : "",
                   pairs ? "" : format_double(r.sup_discrepancy), pairs ? "" : format_double(r.sup_excess)});
  }
  return os.str();
}

}  // namespace mrn
