#include "mrn/exact_solver.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "mrn/params_io.hpp"

namespace mrn {

bool DiscreteGcMdp::goal_map_onto() const {
  std::vector<bool> hit(static_cast<std::size_t>(n_goals), false);
  for (int g : goal_map) {
    if (g >= 0 && g < n_goals) hit[static_cast<std::size_t>(g)] = true;
  }
  return std::all_of(hit.begin(), hit.end(), [](bool b) { return b; });
}

bool DiscreteGcMdp::goal_map_is_identity() const {
  if (n_goals != n_pairs()) return false;
  for (int x = 0; x < n_pairs(); ++x) {
    if (goal_of(x) != x) return false;
  }
  return true;
}

void DiscreteGcMdp::validate() const {
  if (n_states <= 0 || n_actions <= 0 || n_goals <= 0) throw std::invalid_argument("mdp: sizes must be positive");
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("mdp: gamma must lie in (0, 1)");
  const auto np = static_cast<std::size_t>(n_pairs());
  if (next.size() != np || goal_map.size() != np) throw std::invalid_argument("mdp: tables must have n_pairs entries");
  for (int s : next) {
    if (s < 0 || s >= n_states) throw std::invalid_argument("mdp: next-state out of range");
  }
  for (int g : goal_map) {
    if (g < 0 || g >= n_goals) throw std::invalid_argument("mdp: goal index out of range");
  }
}

DiscreteGcMdp DiscreteGcMdp::with_pair_goals(int n_states, int n_actions, std::vector<int> next, double gamma) {
  DiscreteGcMdp mdp;
  mdp.n_states = n_states;
  mdp.n_actions = n_actions;
  mdp.n_goals = n_states * n_actions;
  mdp.next = std::move(next);
  mdp.goal_map.resize(static_cast<std::size_t>(mdp.n_goals));
  for (int x = 0; x < mdp.n_goals; ++x) mdp.goal_map[static_cast<std::size_t>(x)] = x;
  mdp.gamma = gamma;
  mdp.validate();
  return mdp;
}

int value_iteration_cap(double gamma, double tol, int margin) {
  return static_cast<int>(std::ceil(std::log(tol * (1.0 - gamma)) / std::log(gamma))) + margin;
}

namespace {

// Q(s, a) <- r(s, a) + gamma * max_a' Q(next(s, a), a'), from Q = 0. Stops
// once the sweep change is <= tol (1 - gamma), so |Q - Q*| <= gamma tol.
ValueIterationResult iterate(const DiscreteGcMdp& mdp, const std::vector<double>& reward, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("value_iteration: tol must be > 0");
  mdp.validate();
  const int cap = value_iteration_cap(mdp.gamma, tol);
  const double stop = tol * (1.0 - mdp.gamma);
  ValueIterationResult res;
  res.q = Eigen::MatrixXd::Zero(mdp.n_states, mdp.n_actions);
  Eigen::VectorXd best(mdp.n_states);
  Eigen::MatrixXd updated(mdp.n_states, mdp.n_actions);
  for (int it = 1; it <= cap; ++it) {
    best = res.q.rowwise().maxCoeff();
    for (int s = 0; s < mdp.n_states; ++s) {
      for (int a = 0; a < mdp.n_actions; ++a) {
        const int x = mdp.pair(s, a);
        updated(s, a) = reward[static_cast<std::size_t>(x)] + mdp.gamma * best(mdp.next_state(x));
      }
    }
    const double change = (updated - res.q).cwiseAbs().maxCoeff();
    res.q.swap(updated);
    res.residuals.push_back(change);
    res.residual = change;
    res.iterations = it;
    if (change <= stop) return res;
  }
  throw std::runtime_error("value_iteration: no convergence within " + std::to_string(cap) + " sweeps");
}

}  // namespace

ValueIterationResult value_iteration(const DiscreteGcMdp& mdp, int goal, double tol) {
  if (goal < 0 || goal >= mdp.n_goals) throw std::invalid_argument("value_iteration: goal out of range");
  std::vector<double> reward(static_cast<std::size_t>(mdp.n_pairs()));
  for (int x = 0; x < mdp.n_pairs(); ++x) reward[static_cast<std::size_t>(x)] = mdp.goal_of(x) == goal ? 0.0 : -1.0;
  return iterate(mdp, reward, tol);
}

ValueIterationResult value_iteration_pair(const DiscreteGcMdp& mdp, int target_pair, double tol) {
  if (target_pair < 0 || target_pair >= mdp.n_pairs()) throw std::invalid_argument("value_iteration_pair: bad pair");
  std::vector<double> reward(static_cast<std::size_t>(mdp.n_pairs()), -1.0);
  reward[static_cast<std::size_t>(target_pair)] = 0.0;
  return iterate(mdp, reward, tol);
}

namespace {

Eigen::VectorXd flatten(const Eigen::MatrixXd& q) {
  Eigen::VectorXd out(q.size());
  for (Eigen::Index s = 0; s < q.rows(); ++s)
    for (Eigen::Index a = 0; a < q.cols(); ++a) out(s * q.cols() + a) = q(s, a);
  return out;
}

}  // namespace

Eigen::MatrixXd solve_goals(const DiscreteGcMdp& mdp, double tol) {
  Eigen::MatrixXd table(mdp.n_pairs(), mdp.n_goals);
  for (int g = 0; g < mdp.n_goals; ++g) table.col(g) = flatten(value_iteration(mdp, g, tol).q);
  return table;
}

Eigen::MatrixXd solve_pairs(const DiscreteGcMdp& mdp, double tol) {
  Eigen::MatrixXd table(mdp.n_pairs(), mdp.n_pairs());
  for (int x = 0; x < mdp.n_pairs(); ++x) table.col(x) = flatten(value_iteration_pair(mdp, x, tol).q);
  return table;
}

TriangleReport check_value_triangle(const Eigen::MatrixXd& q, double slack) {
  if (q.rows() != q.cols()) throw std::invalid_argument("check_value_triangle: table must be square");
  TriangleReport rep;
  rep.slack = slack;
  rep.worst_margin = -std::numeric_limits<double>::infinity();
  const auto n = static_cast<int>(q.rows());
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      for (int k = 0; k < n; ++k) {
        const double margin = q(i, j) + q(j, k) - q(i, k);
        ++rep.triples;
        if (margin > slack) ++rep.violations;
        if (margin > rep.worst_margin) {
          rep.worst_margin = margin;
          rep.witness[0] = i;
          rep.witness[1] = j;
          rep.witness[2] = k;
        }
      }
    }
  }
  return rep;
}

TriangleReport verify_triangle(const DiscreteGcMdp& mdp, double tol) {
  if (!mdp.goal_map_is_identity()) throw std::invalid_argument("verify_triangle: goal space must be S x A");
  return check_value_triangle(solve_goals(mdp, tol), 10.0 * tol);
}

SupIdentityReport verify_sup_identity(const DiscreteGcMdp& mdp, double tol) {
  mdp.validate();
  if (!mdp.goal_map_onto()) throw std::invalid_argument("verify_sup_identity: goal map is not onto");
  const Eigen::MatrixXd by_goal = solve_goals(mdp, tol);
  const Eigen::MatrixXd by_pair = solve_pairs(mdp, tol);
  SupIdentityReport rep;
  rep.slack = 10.0 * tol;
  rep.max_excess = -std::numeric_limits<double>::infinity();
  for (int x = 0; x < mdp.n_pairs(); ++x) {
    for (int g = 0; g < mdp.n_goals; ++g) {
      double best = -std::numeric_limits<double>::infinity();
      for (int xp = 0; xp < mdp.n_pairs(); ++xp) {
        if (mdp.goal_of(xp) == g) best = std::max(best, by_pair(x, xp));
      }
      rep.max_excess = std::max(rep.max_excess, best - by_goal(x, g));
      const double gap = std::abs(by_goal(x, g) - best);
      if (gap > rep.max_discrepancy || rep.witness_pair < 0) {
        rep.max_discrepancy = gap;
        rep.witness_pair = x;
        rep.witness_goal = g;
      }
    }
  }
  return rep;
}

DiscreteGcMdp random_mdp(std::mt19937_64& rng, const RandomMdpOptions& opt) {
  std::uniform_int_distribution<int> states(opt.min_states, opt.max_states);
  std::uniform_int_distribution<int> actions(opt.min_actions, opt.max_actions);
  std::uniform_int_distribution<std::size_t> gamma_pick(0, opt.gammas.size() - 1);
  DiscreteGcMdp mdp;
  mdp.n_states = states(rng);
  mdp.n_actions = actions(rng);
  if (opt.aggregated_goals) {
    // A non-injective onto map needs at least two pairs.
    if (opt.max_states * opt.max_actions < 2) throw std::invalid_argument("random_mdp: sizes too small");
    while (mdp.n_pairs() < 2) {
      mdp.n_states = states(rng);
      mdp.n_actions = actions(rng);
    }
  }
  mdp.gamma = opt.gammas[gamma_pick(rng)];
  std::uniform_int_distribution<int> next(0, mdp.n_states - 1);
  mdp.next.resize(static_cast<std::size_t>(mdp.n_pairs()));
  for (auto& s : mdp.next) s = next(rng);
  if (!opt.aggregated_goals) {
    mdp.n_goals = mdp.n_pairs();
    mdp.goal_map.resize(mdp.next.size());
    for (int x = 0; x < mdp.n_pairs(); ++x) mdp.goal_map[static_cast<std::size_t>(x)] = x;
    return mdp;
  }
  mdp.n_goals = std::max(1, mdp.n_pairs() / 2);
  std::uniform_int_distribution<int> goal(0, mdp.n_goals - 1);
  mdp.goal_map.resize(mdp.next.size());
  do {
    for (auto& g : mdp.goal_map) g = goal(rng);
  } while (!mdp.goal_map_onto());
  return mdp;
}

void write_mdp(std::ostream& os, const DiscreteGcMdp& mdp) {
  os << "gc-mdp 1\n";
  os << "states " << mdp.n_states << " actions " << mdp.n_actions << " goals " << mdp.n_goals << "\n";
  os << "gamma " << format_real(mdp.gamma) << "\n";
  const auto table = [&](const char* name, const std::vector<int>& v) {
    os << name << "\n";
    for (int s = 0; s < mdp.n_states; ++s) {
      for (int a = 0; a < mdp.n_actions; ++a) os << (a > 0 ? " " : "") << v[static_cast<std::size_t>(mdp.pair(s, a))];
      os << "\n";
    }
  };
  table("next", mdp.next);
  table("goal_map", mdp.goal_map);
}

DiscreteGcMdp read_mdp(std::istream& is) {
  const auto expect = [&](const std::string& want) {
    std::string got;
    if (!(is >> got) || got != want) throw FormatError("mdp file: expected '" + want + "', got '" + got + "'");
  };
  DiscreteGcMdp mdp;
  int version = 0;
  expect("gc-mdp");
  if (!(is >> version) || version != 1) throw FormatError("mdp file: unsupported version");
  expect("states");
  is >> mdp.n_states;
  expect("actions");
  is >> mdp.n_actions;
  expect("goals");
  is >> mdp.n_goals;
  expect("gamma");
  is >> mdp.gamma;
  if (!is || mdp.n_states <= 0 || mdp.n_actions <= 0) throw FormatError("mdp file: bad header");
  const auto table = [&](const char* name, std::vector<int>& v) {
    expect(name);
    v.resize(static_cast<std::size_t>(mdp.n_pairs()));
    for (auto& e : v) {
      if (!(is >> e)) throw FormatError(std::string("mdp file: truncated table '") + name + "'");
    }
  };
  table("next", mdp.next);
  table("goal_map", mdp.goal_map);
  mdp.validate();
  return mdp;
}

}  // namespace mrn
