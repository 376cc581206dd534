#pragma once

// Goal-conditioned RL on a 2-D point mass: environment, HER replay and a
// DDPG agent whose critic is any of the critic variants.
//
// Rewards follow the sparse convention: 0 when the achieved goal is within
// eps_goal of the desired goal, -1 otherwise. Episodes are truncated after
// `horizon` steps and never terminate early.

#include <Eigen/Dense>

#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mrn/critics.hpp"

namespace mrn {

struct EnvConfig {
  double a_max = 0.05;
  double eps_goal = 0.03;
  int horizon = 50;
  // Harder variant: a vertical wall at x = 0.5 covering y < 0.7. Steps
  // that would cross it leave the mass where it was.
  bool wall = false;
};

class PointMassEnv {
 public:
  explicit PointMassEnv(const EnvConfig& config = {});

  const EnvConfig& config() const { return config_; }

  /// Post-action position: clip(s + clip(a, box)) to the unit square.
  Eigen::Vector2d step(const Eigen::Vector2d& s, const Eigen::Vector2d& a) const;
  /// The achieved goal M(s, a); equal to the post-action position.
  Eigen::Vector2d achieved_goal(const Eigen::Vector2d& s, const Eigen::Vector2d& a) const { return step(s, a); }
  bool reached(const Eigen::Vector2d& achieved, const Eigen::Vector2d& goal) const;
  double reward(const Eigen::Vector2d& achieved, const Eigen::Vector2d& goal) const {
    return reached(achieved, goal) ? 0.0 : -1.0;
  }
  /// Uniform position on the square (off the wall when it is enabled).
  Eigen::Vector2d sample_position(std::mt19937_64& rng) const;

 private:
  EnvConfig config_;
};

struct Transition {
  Eigen::Vector2d s;
  Eigen::Vector2d a;
  double r = 0.0;
  Eigen::Vector2d s_next;
  Eigen::Vector2d g;
  Eigen::Vector2d achieved;
};

struct Episode {
  std::vector<Transition> steps;

  int length() const { return static_cast<int>(steps.size()); }
  double total_reward() const;
};

/// Batched deterministic policy: rows of states and goals to rows of
/// displacements.
using Policy = std::function<Eigen::MatrixXd(const Eigen::MatrixXd& s, const Eigen::MatrixXd& g)>;

/// Behaviour noise in units of a_max.
struct Exploration {
  double noise_std = 0.2;
  double random_eps = 0.2;
};

/// One episode per (start, goal) row, stepped in lockstep. With `explore`,
/// each action gets Gaussian noise and is replaced by a uniform random
/// action with probability random_eps.
std::vector<Episode> rollout_batch(const PointMassEnv& env, const Policy& policy, const Eigen::MatrixXd& starts,
                                   const Eigen::MatrixXd& goals, const std::optional<Exploration>& explore,
                                   std::mt19937_64& rng);

Episode rollout(const PointMassEnv& env, const Policy& policy, const Eigen::Vector2d& start,
                const Eigen::Vector2d& goal, const std::optional<Exploration>& explore, std::mt19937_64& rng);

/// Fraction of n_rollouts (uniform start and goal) whose final step ends
/// within eps_goal of the goal. Exploration is off.
double evaluate(const PointMassEnv& env, const Policy& policy, int n_rollouts, std::mt19937_64& rng);

/// Policy clip(g - s, box), which walks straight to the goal.
Policy oracle_policy(const PointMassEnv& env);

/// FIFO store of whole episodes.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity_episodes);

  void add(Episode episode);
  std::size_t size() const { return episodes_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return episodes_.empty(); }
  const Episode& episode(std::size_t i) const { return episodes_[i]; }

 private:
  std::size_t capacity_;
  std::deque<Episode> episodes_;
};

/// Training rows; every matrix has one row per sample.
struct Batch {
  Eigen::MatrixXd s, a, s_next, g;
  Eigen::VectorXd r;
  std::vector<char> relabeled;

  Eigen::Index size() const { return s.rows(); }
};

/// Samples transitions uniformly and, with probability future_p, replaces
/// the goal by the achieved goal of a step t' drawn uniformly from [t, H)
/// of the same episode; the reward is recomputed for the new goal.
Batch her_relabel(const ReplayBuffer& buffer, const PointMassEnv& env, int batch_size, double future_p,
                  std::mt19937_64& rng);

/// Running mean/std over observed rows, applied as clip((x - mean) / std, +-5).
class RunningNormalizer {
 public:
  explicit RunningNormalizer(Eigen::Index dim = 2);

  void update(const Eigen::MatrixXd& rows);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& rows) const;
  Eigen::RowVectorXd mean() const;
  Eigen::RowVectorXd stddev() const;
  double count() const { return count_; }
  const Eigen::RowVectorXd& sum() const { return sum_; }
  const Eigen::RowVectorXd& sum_sq() const { return sum_sq_; }
  void restore(double count, const Eigen::RowVectorXd& sum, const Eigen::RowVectorXd& sum_sq);

 private:
  double count_ = 0.0;
  Eigen::RowVectorXd sum_;
  Eigen::RowVectorXd sum_sq_;
};

struct AgentConfig {
  CriticConfig critic = default_sizing(CriticKind::Mrn);
  ActorConfig actor;
  double lr = 1e-3;  // shared by actor and critic
  double gamma = 0.98;
  double polyak = 0.95;
  // Running normalization of states and goals. Off, the metric residual
  // critics learn poorly from the raw [0,1] coordinates.
  bool normalize = true;
};

/// Critic target r + gamma * q_next clipped to [-1 / (1 - gamma), 0].
double critic_target(double r, double q_next, double gamma);

struct UpdateStats {
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double max_q = 0.0;  // largest online Q seen on the batch
};

/// Actor and critic with target copies. The actor outputs actions in units
/// of a_max, and the critic sees them in the same units.
template <typename Scalar>
class DdpgAgent {
 public:
  DdpgAgent(const AgentConfig& config, const EnvConfig& env, std::uint64_t seed);
  DdpgAgent(const DdpgAgent&) = delete;
  DdpgAgent& operator=(const DdpgAgent&) = delete;

  const AgentConfig& config() const { return config_; }
  Actor<Scalar>& actor() { return actor_; }
  Critic<Scalar>& critic() { return critic_; }
  Actor<Scalar>& target_actor() { return target_actor_; }
  Critic<Scalar>& target_critic() { return target_critic_; }
  RunningNormalizer& state_normalizer() { return norm_s_; }
  RunningNormalizer& goal_normalizer() { return norm_g_; }

  /// Displacements for rows of (s, g), deterministic.
  Eigen::MatrixXd act(const Eigen::MatrixXd& s, const Eigen::MatrixXd& g);
  Policy policy();

  /// Q(s, a, g) of the online critic for raw inputs.
  Eigen::VectorXd q_values(const Eigen::MatrixXd& s, const Eigen::MatrixXd& a, const Eigen::MatrixXd& g);

  void observe(const std::vector<Episode>& episodes);

  /// Normalized network inputs.
  Matrix<Scalar> state_input(const Eigen::MatrixXd& s) const;
  Matrix<Scalar> goal_input(const Eigen::MatrixXd& g) const;
  Matrix<Scalar> action_input(const Eigen::MatrixXd& a) const;

  /// One critic step, one actor step and a polyak step of both targets.
  UpdateStats update(const Batch& batch);

  /// Every tensor (actor, critic, both targets, normalizer sums), written
  /// in double precision so float weights round-trip exactly.
  void save(const std::string& path) const;
  void load(const std::string& path);

 private:
  AgentConfig config_;
  double a_max_;
  Actor<Scalar> actor_;
  Critic<Scalar> critic_;
  Actor<Scalar> target_actor_;
  Critic<Scalar> target_critic_;
  Adam<Scalar> actor_opt_;
  Adam<Scalar> critic_opt_;
  RunningNormalizer norm_s_;
  RunningNormalizer norm_g_;
};

template <typename Scalar>
UpdateStats ddpg_update(DdpgAgent<Scalar>& agent, const Batch& batch) {
  return agent.update(batch);
}

struct TrainConfig {
  std::string arch_label;  // written to the arch column; defaults to the critic kind name
  std::uint64_t seed = 100;
  EnvConfig env;
  AgentConfig agent;
  Exploration exploration;
  int epochs = 50;
  int cycles_per_epoch = 10;
  int episodes_per_cycle = 10;
  int updates_per_cycle = 40;
  int batch_size = 256;
  std::size_t buffer_episodes = 10000;
  double future_p = 0.8;
  int eval_rollouts = 100;
  // Stop once the success rate reaches this value (never when > 1).
  double stop_at_success = 2.0;
};

struct CurveRow {
  int epoch = 0;
  double success_rate = 0.0;
  double critic_loss = 0.0;
  double actor_loss = 0.0;
};

struct TrainResult {
  std::string arch;
  std::uint64_t seed = 0;
  std::vector<CurveRow> curve;
  double max_q = -std::numeric_limits<double>::infinity();  // largest Q seen on any training batch

  double final_success() const { return curve.empty() ? 0.0 : curve.back().success_rate; }
  /// First epoch (1-based) whose success rate is >= threshold, or -1.
  int epochs_to(double threshold) const;
};

/// Runs collection, updates and evaluation epoch by epoch. Results depend
/// only on the config. When `agent_out` is given the trained agent is
/// returned through it.
template <typename Scalar>
TrainResult train(const TrainConfig& config, std::unique_ptr<DdpgAgent<Scalar>>* agent_out = nullptr);

std::string curve_csv_header();
std::string curve_csv_rows(const TrainResult& result);

}  // namespace mrn
