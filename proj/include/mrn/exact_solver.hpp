#pragma once

// Exact optimal values of tiny deterministic goal-conditioned MDPs.
//
// A state-action pair x = (s, a) is indexed as s * n_actions + a. Reward is
// 0 when the pair achieves the goal and -1 otherwise; episodes never end.

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

namespace mrn {

struct DiscreteGcMdp {
  int n_states = 0;
  int n_actions = 0;
  int n_goals = 0;
  std::vector<int> next;      // (s, a) -> s'
  std::vector<int> goal_map;  // (s, a) -> goal in [0, n_goals)
  double gamma = 0.9;

  int n_pairs() const { return n_states * n_actions; }
  int pair(int s, int a) const { return s * n_actions + a; }
  int next_state(int x) const { return next[static_cast<std::size_t>(x)]; }
  int goal_of(int x) const { return goal_map[static_cast<std::size_t>(x)]; }

  bool goal_map_onto() const;
  bool goal_map_is_identity() const;
  /// Throws std::invalid_argument on malformed tables or gamma outside (0, 1).
  void validate() const;

  /// Goal space S x A with the identity goal map.
  static DiscreteGcMdp with_pair_goals(int n_states, int n_actions, std::vector<int> next, double gamma);
};

struct ValueIterationResult {
  Eigen::MatrixXd q;  // (n_states, n_actions)
  double residual = 0.0;
  int iterations = 0;
  std::vector<double> residuals;  // sup-norm change per sweep
};

/// Iteration cap ceil(log(tol (1 - gamma)) / log(gamma)) + margin.
int value_iteration_cap(double gamma, double tol, int margin = 16);

/// Q*(., g) for reward 0 iff goal_map(s, a) == goal.
ValueIterationResult value_iteration(const DiscreteGcMdp& mdp, int goal, double tol = 1e-10);

/// Q*(., x_target) for reward 0 iff (s, a) == x_target.
ValueIterationResult value_iteration_pair(const DiscreteGcMdp& mdp, int target_pair, double tol = 1e-10);

/// Q*(x, g) for all pairs and goals: (n_pairs, n_goals).
Eigen::MatrixXd solve_goals(const DiscreteGcMdp& mdp, double tol = 1e-10);

/// Q*(x, x') with exact-pair reward for all pairs: (n_pairs, n_pairs).
Eigen::MatrixXd solve_pairs(const DiscreteGcMdp& mdp, double tol = 1e-10);

struct TriangleReport {
  std::size_t triples = 0;
  std::size_t violations = 0;
  double worst_margin = 0.0;  // max of Q(x1,x2) + Q(x2,x3) - Q(x1,x3)
  int witness[3] = {-1, -1, -1};
  double slack = 0.0;
  bool passed() const { return violations == 0; }
};

/// Q(x1,x2) + Q(x2,x3) <= Q(x1,x3) + slack over all triples of a square table.
TriangleReport check_value_triangle(const Eigen::MatrixXd& q, double slack);

/// Value-iterates every goal of an MDP whose goal space is S x A, then
/// checks the triangle inequality exhaustively with slack 10 * tol.
TriangleReport verify_triangle(const DiscreteGcMdp& mdp, double tol = 1e-10);

struct SupIdentityReport {
  double max_discrepancy = 0.0;  // max |goal side - pair side|
  int witness_pair = -1;
  int witness_goal = -1;
  // max of (pair side - goal side). A pair reward is never larger than the
  // goal-set reward, so this stays <= slack even when equality fails.
  double max_excess = 0.0;
  double slack = 0.0;
  bool passed() const { return max_discrepancy <= slack; }
};

/// Compares Q*(x, g) under the goal-set reward with max_{x': M(x') = g}
/// Q*(x, x') under exact-pair rewards, over all (x, g). The two can differ
/// when an optimal goal-set policy alternates between several preimages of
/// g; max_discrepancy and its witness report such instances.
SupIdentityReport verify_sup_identity(const DiscreteGcMdp& mdp, double tol = 1e-10);

struct RandomMdpOptions {
  int min_states = 2;
  int max_states = 6;
  int min_actions = 1;
  int max_actions = 3;
  std::vector<double> gammas{0.9, 0.98};
  // false: identity goal map over S x A. true: onto, non-injective map onto
  // roughly half as many goals as pairs.
  bool aggregated_goals = false;
};

/// Uniform next-state table; goal maps are resampled until onto.
DiscreteGcMdp random_mdp(std::mt19937_64& rng, const RandomMdpOptions& opt = {});

/// Text format:
///   gc-mdp 1
///   states <n> actions <n> goals <n>
///   gamma <g>
///   next        followed by n_states rows of n_actions ints
///   goal_map    followed by n_states rows of n_actions ints
void write_mdp(std::ostream& os, const DiscreteGcMdp& mdp);
DiscreteGcMdp read_mdp(std::istream& is);

}  // namespace mrn
