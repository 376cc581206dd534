#include "mrn/gcrl.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

#include "mrn/csv.hpp"
#include "mrn/params_io.hpp"

namespace mrn {

namespace {

constexpr double kWallX = 0.5;
constexpr double kWallTop = 0.7;

bool crosses_wall(const Eigen::Vector2d& from, const Eigen::Vector2d& to) {
  if ((from.x() - kWallX) * (to.x() - kWallX) > 0.0 || from.x() == to.x()) return false;
  const double t = (kWallX - from.x()) / (to.x() - from.x());
  return from.y() + t * (to.y() - from.y()) < kWallTop;
}

Eigen::Vector2d uniform_box(std::mt19937_64& rng, double half) {
  std::uniform_real_distribution<double> u(-half, half);
  const double x = u(rng);
  return {x, u(rng)};
}

}  // namespace

PointMassEnv::PointMassEnv(const EnvConfig& config) : config_(config) {
  if (!(config.a_max > 0.0) || !(config.eps_goal > 0.0) || config.horizon <= 0) {
    throw std::invalid_argument("PointMassEnv: a_max, eps_goal and horizon must be positive");
  }
}

Eigen::Vector2d PointMassEnv::step(const Eigen::Vector2d& s, const Eigen::Vector2d& a) const {
  const Eigen::Vector2d move = a.cwiseMax(-config_.a_max).cwiseMin(config_.a_max);
  const Eigen::Vector2d next = (s + move).cwiseMax(0.0).cwiseMin(1.0);
  if (config_.wall && crosses_wall(s, next)) return s;
  return next;
}

bool PointMassEnv::reached(const Eigen::Vector2d& achieved, const Eigen::Vector2d& goal) const {
  return (achieved - goal).norm() <= config_.eps_goal;
}

Eigen::Vector2d PointMassEnv::sample_position(std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double x = u(rng);
  return {x, u(rng)};
}

double Episode::total_reward() const {
  double total = 0.0;
  for (const auto& t : steps) total += t.r;
  return total;
}

std::vector<Episode> rollout_batch(const PointMassEnv& env, const Policy& policy, const Eigen::MatrixXd& starts,
                                   const Eigen::MatrixXd& goals, const std::optional<Exploration>& explore,
                                   std::mt19937_64& rng) {
  if (starts.cols() != 2 || goals.cols() != 2 || starts.rows() != goals.rows()) {
    throw std::invalid_argument("rollout_batch: starts and goals must be matching (n, 2) matrices");
  }
  const Eigen::Index n = starts.rows();
  const double a_max = env.config().a_max;
  std::vector<Episode> episodes(static_cast<std::size_t>(n));
  for (auto& e : episodes) e.steps.reserve(static_cast<std::size_t>(env.config().horizon));
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_real_distribution<double> coin(0.0, 1.0);

  Eigen::MatrixXd s = starts;
  for (int t = 0; t < env.config().horizon; ++t) {
    Eigen::MatrixXd a = policy(s, goals);
    if (a.rows() != n || a.cols() != 2) throw std::invalid_argument("rollout_batch: policy returned a bad shape");
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Vector2d ai = a.row(i).transpose();
      if (explore) {
        ai += explore->noise_std * a_max * Eigen::Vector2d(noise(rng), noise(rng));
        ai = ai.cwiseMax(-a_max).cwiseMin(a_max);
        if (coin(rng) < explore->random_eps) ai = uniform_box(rng, a_max);
      } else {
        ai = ai.cwiseMax(-a_max).cwiseMin(a_max);
      }
      Transition tr;
      tr.s = s.row(i).transpose();
      tr.a = ai;
      tr.g = goals.row(i).transpose();
      tr.s_next = env.step(tr.s, ai);
      tr.achieved = tr.s_next;
      tr.r = env.reward(tr.achieved, tr.g);
      s.row(i) = tr.s_next.transpose();
      episodes[static_cast<std::size_t>(i)].steps.push_back(tr);
    }
  }
  return episodes;
}

Episode rollout(const PointMassEnv& env, const Policy& policy, const Eigen::Vector2d& start,
                const Eigen::Vector2d& goal, const std::optional<Exploration>& explore, std::mt19937_64& rng) {
  return rollout_batch(env, policy, start.transpose(), goal.transpose(), explore, rng).front();
}

double evaluate(const PointMassEnv& env, const Policy& policy, int n_rollouts, std::mt19937_64& rng) {
  if (n_rollouts <= 0) throw std::invalid_argument("evaluate: n_rollouts must be positive");
  Eigen::MatrixXd starts(n_rollouts, 2), goals(n_rollouts, 2);
  for (int i = 0; i < n_rollouts; ++i) {
    starts.row(i) = env.sample_position(rng).transpose();
    goals.row(i) = env.sample_position(rng).transpose();
  }
  const auto episodes = rollout_batch(env, policy, starts, goals, std::nullopt, rng);
  int successes = 0;
  for (const auto& e : episodes) {
    const auto& last = e.steps.back();
    successes += env.reached(last.achieved, last.g) ? 1 : 0;
  }
  return static_cast<double>(successes) / n_rollouts;
}

Policy oracle_policy(const PointMassEnv& env) {
  const double a_max = env.config().a_max;
  return [a_max](const Eigen::MatrixXd& s, const Eigen::MatrixXd& g) -> Eigen::MatrixXd {
    return (g - s).cwiseMax(-a_max).cwiseMin(a_max);
  };
}

ReplayBuffer::ReplayBuffer(std::size_t capacity_episodes) : capacity_(capacity_episodes) {
  if (capacity_episodes == 0) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
}

void ReplayBuffer::add(Episode episode) {
  if (episode.steps.empty()) throw std::invalid_argument("ReplayBuffer: empty episode");
  if (episodes_.size() == capacity_) episodes_.pop_front();
  episodes_.push_back(std::move(episode));
}

Batch her_relabel(const ReplayBuffer& buffer, const PointMassEnv& env, int batch_size, double future_p,
                  std::mt19937_64& rng) {
  if (buffer.empty()) throw std::invalid_argument("her_relabel: replay buffer is empty");
  if (batch_size <= 0) throw std::invalid_argument("her_relabel: batch_size must be positive");
  if (!(future_p >= 0.0 && future_p <= 1.0)) throw std::invalid_argument("her_relabel: future_p must lie in [0, 1]");
  Batch b;
  b.s.resize(batch_size, 2);
  b.a.resize(batch_size, 2);
  b.s_next.resize(batch_size, 2);
  b.g.resize(batch_size, 2);
  b.r.resize(batch_size);
  b.relabeled.assign(static_cast<std::size_t>(batch_size), 0);
  std::uniform_int_distribution<std::size_t> pick_episode(0, buffer.size() - 1);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  for (int i = 0; i < batch_size; ++i) {
    const Episode& e = buffer.episode(pick_episode(rng));
    const int t = std::uniform_int_distribution<int>(0, e.length() - 1)(rng);
    const Transition& tr = e.steps[static_cast<std::size_t>(t)];
    Eigen::Vector2d g = tr.g;
    if (coin(rng) < future_p) {
      const int future = std::uniform_int_distribution<int>(t, e.length() - 1)(rng);
      g = e.steps[static_cast<std::size_t>(future)].achieved;
      b.relabeled[static_cast<std::size_t>(i)] = 1;
    }
    b.s.row(i) = tr.s.transpose();
    b.a.row(i) = tr.a.transpose();
    b.s_next.row(i) = tr.s_next.transpose();
    b.g.row(i) = g.transpose();
    b.r(i) = env.reward(tr.achieved, g);
  }
  return b;
}

RunningNormalizer::RunningNormalizer(Eigen::Index dim)
    : sum_(Eigen::RowVectorXd::Zero(dim)), sum_sq_(Eigen::RowVectorXd::Zero(dim)) {}

void RunningNormalizer::update(const Eigen::MatrixXd& rows) {
  if (rows.cols() != sum_.cols()) throw std::invalid_argument("RunningNormalizer: width mismatch");
  count_ += static_cast<double>(rows.rows());
  sum_ += rows.colwise().sum();
  sum_sq_ += rows.array().square().matrix().colwise().sum();
}

void RunningNormalizer::restore(double count, const Eigen::RowVectorXd& sum, const Eigen::RowVectorXd& sum_sq) {
  if (!(count >= 0.0) || sum.cols() != sum_.cols() || sum_sq.cols() != sum_.cols()) {
    throw std::invalid_argument("RunningNormalizer: bad saved state");
  }
  count_ = count;
  sum_ = sum;
  sum_sq_ = sum_sq;
}

Eigen::RowVectorXd RunningNormalizer::mean() const {
  if (count_ == 0.0) return Eigen::RowVectorXd::Zero(sum_.cols());
  return sum_ / count_;
}

Eigen::RowVectorXd RunningNormalizer::stddev() const {
  if (count_ == 0.0) return Eigen::RowVectorXd::Ones(sum_.cols());
  const Eigen::RowVectorXd m = mean();
  const Eigen::RowVectorXd var = (sum_sq_ / count_ - m.cwiseAbs2()).cwiseMax(1e-4);
  return var.cwiseSqrt();
}

Eigen::MatrixXd RunningNormalizer::apply(const Eigen::MatrixXd& rows) const {
  const Eigen::RowVectorXd m = mean();
  const Eigen::RowVectorXd sd = stddev();
  Eigen::MatrixXd out = (rows.rowwise() - m).array().rowwise() / sd.array();
  return out.cwiseMax(-5.0).cwiseMin(5.0);
}

double critic_target(double r, double q_next, double gamma) {
  return std::clamp(r + gamma * q_next, -1.0 / (1.0 - gamma), 0.0);
}

template <typename Scalar>
DdpgAgent<Scalar>::DdpgAgent(const AgentConfig& config, const EnvConfig& env, std::uint64_t seed)
    : config_(config), a_max_(env.a_max) {
  if (!(config.gamma > 0.0 && config.gamma < 1.0)) throw std::invalid_argument("DdpgAgent: gamma must lie in (0, 1)");
  if (!(config.polyak >= 0.0 && config.polyak <= 1.0)) throw std::invalid_argument("DdpgAgent: polyak must lie in [0, 1]");
  if (!(config.lr > 0.0)) throw std::invalid_argument("DdpgAgent: lr must be positive");
  Rng rng(seed);
  const RowVector<Scalar> one = RowVector<Scalar>::Ones(2);
  actor_ = Actor<Scalar>(config.actor, 2, 2, -one, one, rng);
  critic_ = Critic<Scalar>(config.critic, 2, 2, 2, rng);
  target_actor_ = actor_;
  target_critic_ = critic_;
  actor_opt_ = Adam<Scalar>(actor_.parameters(), {config.lr});
  critic_opt_ = Adam<Scalar>(critic_.parameters(), {config.lr});
}

template <typename Scalar>
Matrix<Scalar> DdpgAgent<Scalar>::state_input(const Eigen::MatrixXd& s) const {
  return (config_.normalize ? norm_s_.apply(s) : s).template cast<Scalar>();
}

template <typename Scalar>
Matrix<Scalar> DdpgAgent<Scalar>::goal_input(const Eigen::MatrixXd& g) const {
  return (config_.normalize ? norm_g_.apply(g) : g).template cast<Scalar>();
}

template <typename Scalar>
Matrix<Scalar> DdpgAgent<Scalar>::action_input(const Eigen::MatrixXd& a) const {
  return (a / a_max_).template cast<Scalar>();
}

template <typename Scalar>
Eigen::MatrixXd DdpgAgent<Scalar>::act(const Eigen::MatrixXd& s, const Eigen::MatrixXd& g) {
  return actor_.act(state_input(s), goal_input(g)).template cast<double>() * a_max_;
}

template <typename Scalar>
Policy DdpgAgent<Scalar>::policy() {
  return [this](const Eigen::MatrixXd& s, const Eigen::MatrixXd& g) { return act(s, g); };
}

template <typename Scalar>
Eigen::VectorXd DdpgAgent<Scalar>::q_values(const Eigen::MatrixXd& s, const Eigen::MatrixXd& a,
                                            const Eigen::MatrixXd& g) {
  Tape<Scalar> tape(false);
  const auto q = critic_.forward(tape, tape.constant(state_input(s)), tape.constant(action_input(a)),
                                 tape.constant(goal_input(g)), false);
  return q.value().template cast<double>();
}

template <typename Scalar>
void DdpgAgent<Scalar>::observe(const std::vector<Episode>& episodes) {
  if (!config_.normalize) return;
  for (const auto& e : episodes) {
    Eigen::MatrixXd s(e.length() + 1, 2), g(2 * e.length(), 2);
    for (int t = 0; t < e.length(); ++t) {
      const auto& tr = e.steps[static_cast<std::size_t>(t)];
      s.row(t) = tr.s.transpose();
      g.row(2 * t) = tr.g.transpose();
      g.row(2 * t + 1) = tr.achieved.transpose();
    }
    s.row(e.length()) = e.steps.back().s_next.transpose();
    norm_s_.update(s);
    norm_g_.update(g);
  }
}

template <typename Scalar>
UpdateStats DdpgAgent<Scalar>::update(const Batch& batch) {
  const Matrix<Scalar> s = state_input(batch.s);
  const Matrix<Scalar> a = action_input(batch.a);
  const Matrix<Scalar> s2 = state_input(batch.s_next);
  const Matrix<Scalar> g = goal_input(batch.g);

  Matrix<Scalar> y(batch.size(), 1);
  {
    Tape<Scalar> tape(false);
    const auto s2t = tape.constant(s2);
    const auto gt = tape.constant(g);
    const auto a2 = target_actor_.forward(tape, s2t, gt, false);
    const auto q2 = target_critic_.forward(tape, s2t, a2, gt, false);
    for (Eigen::Index i = 0; i < batch.size(); ++i) {
      y(i, 0) = static_cast<Scalar>(critic_target(batch.r(i), static_cast<double>(q2.value()(i, 0)), config_.gamma));
    }
  }

  UpdateStats stats;
  Tape<Scalar> tape(false);
  const auto st = tape.constant(s);
  const auto gt = tape.constant(g);
  {
    critic_opt_.zero_grad();
    const auto q = critic_.forward(tape, st, tape.constant(a), gt);
    const auto loss = mean(square(tape.constant(y) - q));
    stats.critic_loss = static_cast<double>(loss.item());
    stats.max_q = static_cast<double>(q.value().maxCoeff());
    if (!std::isfinite(stats.critic_loss)) throw NumericError("ddpg_update: non-finite critic loss");
    tape.backward(loss);
    critic_opt_.step();
  }
  tape.clear();
  {
    actor_opt_.zero_grad();
    const auto st2 = tape.constant(s);
    const auto gt2 = tape.constant(g);
    const auto pi = actor_.forward(tape, st2, gt2);
    const auto q = critic_.forward(tape, st2, pi, gt2, false);
    const auto loss = -mean(q);
    stats.actor_loss = static_cast<double>(loss.item());
    if (!std::isfinite(stats.actor_loss)) throw NumericError("ddpg_update: non-finite actor loss");
    tape.backward(loss);
    actor_opt_.step();
  }
  polyak_update(target_actor_.parameters(), actor_.parameters(), config_.polyak);
  polyak_update(target_critic_.parameters(), critic_.parameters(), config_.polyak);
  return stats;
}

namespace {

template <typename Scalar>
std::vector<Parameter<Scalar>*> agent_tensors(Actor<Scalar>& actor, Critic<Scalar>& critic,
                                              Actor<Scalar>& target_actor, Critic<Scalar>& target_critic) {
  std::vector<Parameter<Scalar>*> out;
  for (auto* p : actor.parameters()) out.push_back(p);
  for (auto* p : critic.parameters()) out.push_back(p);
  for (auto* p : target_actor.parameters()) out.push_back(p);
  for (auto* p : target_critic.parameters()) out.push_back(p);
  return out;
}

// Rows: count (broadcast), sum, sum of squares.
Parameter<double> normalizer_tensor(const std::string& name, const RunningNormalizer& n) {
  Matrix<double> m(3, n.sum().cols());
  m.row(0).setConstant(n.count());
  m.row(1) = n.sum();
  m.row(2) = n.sum_sq();
  return {name, m};
}

}  // namespace

template <typename Scalar>
void DdpgAgent<Scalar>::save(const std::string& path) const {
  std::vector<Parameter<double>> copies;
  const auto copy_all = [&](const std::vector<const Parameter<Scalar>*>& params) {
    for (const auto* p : params) copies.emplace_back(p->name, p->value.template cast<double>());
  };
  copy_all(actor_.parameters());
  copy_all(critic_.parameters());
  copy_all(target_actor_.parameters());
  copy_all(target_critic_.parameters());
  copies.push_back(normalizer_tensor("norm.state", norm_s_));
  copies.push_back(normalizer_tensor("norm.goal", norm_g_));
  std::vector<const Parameter<double>*> view;
  for (const auto& c : copies) view.push_back(&c);
  save_parameters(path, view);
}

template <typename Scalar>
void DdpgAgent<Scalar>::load(const std::string& path) {
  const auto targets = agent_tensors(actor_, critic_, target_actor_, target_critic_);
  std::vector<Parameter<double>> copies;
  for (auto* p : targets) copies.emplace_back(p->name, p->value.template cast<double>());
  copies.push_back(normalizer_tensor("norm.state", norm_s_));
  copies.push_back(normalizer_tensor("norm.goal", norm_g_));
  std::vector<Parameter<double>*> view;
  for (auto& c : copies) view.push_back(&c);
  load_parameters(path, view);
  for (std::size_t i = 0; i < targets.size(); ++i) targets[i]->value = copies[i].value.template cast<Scalar>();
  const auto restore = [](RunningNormalizer& n, const Parameter<double>& p) {
    n.restore(p.value(0, 0), p.value.row(1), p.value.row(2));
  };
  restore(norm_s_, copies[targets.size()]);
  restore(norm_g_, copies[targets.size() + 1]);
}

template class DdpgAgent<float>;
template class DdpgAgent<double>;

int TrainResult::epochs_to(double threshold) const {
  for (const auto& row : curve) {
    if (row.success_rate >= threshold) return row.epoch;
  }
  return -1;
}

template <typename Scalar>
TrainResult train(const TrainConfig& config, std::unique_ptr<DdpgAgent<Scalar>>* agent_out) {
  if (config.epochs <= 0 || config.cycles_per_epoch <= 0 || config.episodes_per_cycle <= 0 ||
      config.updates_per_cycle < 0 || config.batch_size <= 0 || config.eval_rollouts <= 0) {
    throw std::invalid_argument("train: epoch, cycle, batch and evaluation sizes must be positive");
  }
  const PointMassEnv env(config.env);
  // Independent streams for initialisation, collection, sampling and evaluation.
  std::seed_seq seq{config.seed, std::uint64_t{0x6d726e}};
  std::array<std::uint64_t, 4> seeds{};
  {
    std::array<std::uint32_t, 8> words{};
    seq.generate(words.begin(), words.end());
    for (std::size_t i = 0; i < seeds.size(); ++i) seeds[i] = (std::uint64_t{words[2 * i]} << 32) | words[2 * i + 1];
  }
  auto agent = std::make_unique<DdpgAgent<Scalar>>(config.agent, config.env, seeds[0]);
  std::mt19937_64 collect_rng(seeds[1]);
  std::mt19937_64 sample_rng(seeds[2]);
  std::mt19937_64 eval_rng(seeds[3]);
  ReplayBuffer buffer(config.buffer_episodes);
  const auto policy = agent->policy();

  TrainResult result;
  result.arch = config.arch_label.empty() ? critic_kind_name(config.agent.critic.kind) : config.arch_label;
  result.seed = config.seed;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    double critic_sum = 0.0, actor_sum = 0.0;
    int n_updates = 0;
    for (int cycle = 0; cycle < config.cycles_per_epoch; ++cycle) {
      Eigen::MatrixXd starts(config.episodes_per_cycle, 2), goals(config.episodes_per_cycle, 2);
      for (int i = 0; i < config.episodes_per_cycle; ++i) {
        starts.row(i) = env.sample_position(collect_rng).transpose();
        goals.row(i) = env.sample_position(collect_rng).transpose();
      }
      auto episodes = rollout_batch(env, policy, starts, goals, config.exploration, collect_rng);
      agent->observe(episodes);
      for (auto& e : episodes) buffer.add(std::move(e));
      for (int u = 0; u < config.updates_per_cycle; ++u) {
        const auto stats = agent->update(her_relabel(buffer, env, config.batch_size, config.future_p, sample_rng));
        critic_sum += stats.critic_loss;
        actor_sum += stats.actor_loss;
        result.max_q = std::max(result.max_q, stats.max_q);
        ++n_updates;
      }
    }
    CurveRow row;
    row.epoch = epoch;
    row.success_rate = evaluate(env, policy, config.eval_rollouts, eval_rng);
    row.critic_loss = n_updates > 0 ? critic_sum / n_updates : 0.0;
    row.actor_loss = n_updates > 0 ? actor_sum / n_updates : 0.0;
    result.curve.push_back(row);
    if (row.success_rate >= config.stop_at_success) break;
  }
  if (agent_out != nullptr) *agent_out = std::move(agent);
  return result;
}

template TrainResult train<float>(const TrainConfig&, std::unique_ptr<DdpgAgent<float>>*);
template TrainResult train<double>(const TrainConfig&, std::unique_ptr<DdpgAgent<double>>*);

std::string curve_csv_header() { return "arch,seed,epoch,success_rate,critic_loss,actor_loss\n"; }

std::string curve_csv_rows(const TrainResult& result) {
  std::ostringstream os;
  for (const auto& row : result.curve) {
    os << csv_row({result.arch, std::to_string(result.seed), std::to_string(row.epoch),
                   format_double(row.success_rate), format_double(row.critic_loss), format_double(row.actor_loss)});
  }
  return os.str();
}

}  // namespace mrn
