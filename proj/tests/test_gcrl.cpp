#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>

#include "mrn/gcrl.hpp"

using namespace mrn;

namespace {

AgentConfig small_agent(CriticKind kind) {
  AgentConfig c;
  c.critic = default_sizing(kind);
  c.critic.mono_hidden = c.critic.bvn_hidden = c.critic.encoder_hidden = c.critic.head_hidden = 24;
  c.critic.embed_dim = c.critic.asym_dim = 4;
  c.actor.hidden = 24;
  return c;
}

TrainConfig tiny_train(CriticKind kind) {
  TrainConfig c;
  c.agent = small_agent(kind);
  c.epochs = 2;
  c.cycles_per_epoch = 2;
  c.episodes_per_cycle = 3;
  c.updates_per_cycle = 4;
  c.batch_size = 32;
  c.eval_rollouts = 10;
  c.env.horizon = 20;
  return c;
}

Policy zero_policy() {
  return [](const Eigen::MatrixXd& s, const Eigen::MatrixXd&) -> Eigen::MatrixXd {
    return Eigen::MatrixXd::Zero(s.rows(), 2);
  };
}

Policy random_policy(double a_max, std::uint64_t seed) {
  auto rng = std::make_shared<std::mt19937_64>(seed);
  return [a_max, rng](const Eigen::MatrixXd& s, const Eigen::MatrixXd&) -> Eigen::MatrixXd {
    std::uniform_real_distribution<double> u(-a_max, a_max);
    Eigen::MatrixXd a(s.rows(), 2);
    for (Eigen::Index k = 0; k < a.size(); ++k) a.data()[k] = u(*rng);
    return a;
  };
}

ReplayBuffer filled_buffer(const PointMassEnv& env, int episodes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ReplayBuffer buffer(100);
  Eigen::MatrixXd starts(episodes, 2), goals(episodes, 2);
  for (int i = 0; i < episodes; ++i) {
    starts.row(i) = env.sample_position(rng).transpose();
    goals.row(i) = env.sample_position(rng).transpose();
  }
  for (auto& e : rollout_batch(env, random_policy(env.config().a_max, seed), starts, goals, Exploration{}, rng)) {
    buffer.add(std::move(e));
  }
  return buffer;
}

}  // namespace

TEST_CASE("point mass dynamics and rewards") {
  const PointMassEnv env;
  const Eigen::Vector2d s(0.98, 0.5);
  CHECK(env.step(s, {0.2, -0.01}).isApprox(Eigen::Vector2d(1.0, 0.49)));
  CHECK(env.step({0.5, 0.5}, {-1.0, 1.0}).isApprox(Eigen::Vector2d(0.45, 0.55)));
  CHECK(env.achieved_goal(s, {0.01, 0.0}) == env.step(s, {0.01, 0.0}));
  CHECK(env.reward({0.5, 0.5}, {0.5, 0.52}) == 0.0);
  CHECK(env.reward({0.5, 0.5}, {0.5, 0.531}) == -1.0);

  EnvConfig walled;
  walled.wall = true;
  const PointMassEnv w(walled);
  CHECK(w.step({0.48, 0.3}, {0.05, 0.0}) == Eigen::Vector2d(0.48, 0.3));
  CHECK(w.step({0.48, 0.8}, {0.05, 0.0}).isApprox(Eigen::Vector2d(0.53, 0.8)));

  EnvConfig bad;
  bad.horizon = 0;
  CHECK_THROWS_AS(PointMassEnv{bad}, std::invalid_argument);
}

TEST_CASE("rollout examples") {
  const PointMassEnv env;
  std::mt19937_64 rng(1);
  const Eigen::Vector2d start(0.3, 0.6);
  const auto still = rollout(env, zero_policy(), start, start, std::nullopt, rng);
  CHECK(still.length() == 50);
  CHECK(still.total_reward() == 0.0);

  EnvConfig short_cfg;
  short_cfg.horizon = 10;
  const PointMassEnv short_env(short_cfg);
  const auto far = rollout(short_env, oracle_policy(short_env), {0.0, 0.0}, {1.0, 1.0}, std::nullopt, rng);
  CHECK(far.total_reward() == -10.0);

  for (const auto& tr : far.steps) CHECK(tr.achieved == short_env.achieved_goal(tr.s, tr.a));
}

TEST_CASE("exploring rollouts are seed-deterministic") {
  const PointMassEnv env;
  const auto run = [&] {
    std::mt19937_64 rng(9);
    return rollout(env, oracle_policy(env), {0.1, 0.2}, {0.7, 0.9}, Exploration{}, rng);
  };
  const auto a = run();
  const auto b = run();
  REQUIRE(a.length() == b.length());
  for (int t = 0; t < a.length(); ++t) {
    const auto& x = a.steps[static_cast<std::size_t>(t)];
    const auto& y = b.steps[static_cast<std::size_t>(t)];
    CHECK(x.a == y.a);
    CHECK(x.s_next == y.s_next);
    CHECK(x.r == y.r);
    CHECK(std::abs(x.a.x()) <= env.config().a_max);
  }
}

TEST_CASE("rewards stay in {0, -1}") {
  const PointMassEnv env;
  const auto buffer = filled_buffer(env, 20, 3);
  for (std::size_t i = 0; i < buffer.size(); ++i)
    for (const auto& tr : buffer.episode(i).steps) CHECK((tr.r == 0.0 || tr.r == -1.0));
}

TEST_CASE("evaluation of hand-written policies") {
  const PointMassEnv env;
  std::mt19937_64 rng(4);
  CHECK(evaluate(env, oracle_policy(env), 200, rng) == 1.0);
  CHECK(evaluate(env, random_policy(env.config().a_max, 5), 400, rng) < 0.2);
  CHECK(evaluate(env, zero_policy(), 400, rng) < 0.05);
  CHECK_THROWS_AS(evaluate(env, zero_policy(), 0, rng), std::invalid_argument);
}

TEST_CASE("replay buffer evicts whole episodes first in first out") {
  ReplayBuffer buffer(3);
  for (int i = 0; i < 5; ++i) {
    Episode e;
    Transition tr;
    tr.r = -i;
    e.steps.push_back(tr);
    buffer.add(e);
  }
  CHECK(buffer.size() == 3);
  CHECK(buffer.episode(0).steps[0].r == -2.0);
  CHECK(buffer.episode(2).steps[0].r == -4.0);
  CHECK_THROWS_AS(buffer.add(Episode{}), std::invalid_argument);
  CHECK_THROWS_AS(ReplayBuffer(0), std::invalid_argument);
}

TEST_CASE("hindsight relabelling") {
  const PointMassEnv env;
  std::mt19937_64 rng(6);

  SUBCASE("a one-step episode relabels with its own achieved goal") {
    const PointMassEnv one_step(EnvConfig{0.05, 0.03, 1, false});
    ReplayBuffer single(1);
    single.add(rollout(one_step, oracle_policy(one_step), {0.2, 0.2}, {0.9, 0.9}, std::nullopt, rng));
    const auto batch = her_relabel(single, env, 16, 1.0, rng);
    CHECK((batch.r.array() == 0.0).all());
    CHECK((batch.g.rowwise() - single.episode(0).steps[0].achieved.transpose()).norm() == 0.0);
  }

  const auto buffer = filled_buffer(env, 30, 7);

  SUBCASE("future_p = 0 keeps the stored goals and rewards") {
    const auto batch = her_relabel(buffer, env, 256, 0.0, rng);
    for (Eigen::Index i = 0; i < batch.size(); ++i) {
      CHECK_FALSE(batch.relabeled[static_cast<std::size_t>(i)]);
      bool found = false;
      for (std::size_t e = 0; e < buffer.size() && !found; ++e)
        for (const auto& tr : buffer.episode(e).steps)
          if (tr.s == batch.s.row(i).transpose() && tr.a == batch.a.row(i).transpose()) {
            found = tr.g == batch.g.row(i).transpose() && tr.r == batch.r(i);
            break;
          }
      CHECK(found);
    }
  }

  SUBCASE("relabelled fraction concentrates at future_p") {
    std::size_t relabeled = 0;
    for (int draw = 0; draw < 100; ++draw) {
      const auto batch = her_relabel(buffer, env, 256, 0.8, rng);
      relabeled += static_cast<std::size_t>(std::count(batch.relabeled.begin(), batch.relabeled.end(), 1));
    }
    const double fraction = static_cast<double>(relabeled) / (100.0 * 256.0);
    CHECK(fraction >= 0.75);
    CHECK(fraction <= 0.85);
  }

  SUBCASE("recomputed rewards agree with the goal tolerance") {
    const auto batch = her_relabel(buffer, env, 512, 0.8, rng);
    for (Eigen::Index i = 0; i < batch.size(); ++i) {
      const Eigen::Vector2d achieved = batch.s_next.row(i).transpose();
      const bool inside = (achieved - batch.g.row(i).transpose()).norm() <= env.config().eps_goal;
      CHECK((batch.r(i) == 0.0) == inside);
    }
  }

  SUBCASE("errors") {
    CHECK_THROWS_AS(her_relabel(ReplayBuffer(4), env, 8, 0.5, rng), std::invalid_argument);
    CHECK_THROWS_AS(her_relabel(buffer, env, 8, 1.5, rng), std::invalid_argument);
    CHECK_THROWS_AS(her_relabel(buffer, env, 0, 0.5, rng), std::invalid_argument);
  }
}

TEST_CASE("critic targets") {
  CHECK(critic_target(-1.0, -5.0, 0.98) == doctest::Approx(-5.9));
  CHECK(critic_target(0.0, 0.0, 0.98) == 0.0);
  CHECK(critic_target(-1.0, -50.0, 0.98) == doctest::Approx(-50.0));
  CHECK(critic_target(-1.0, -80.0, 0.98) == doctest::Approx(-50.0));
  CHECK(critic_target(0.0, 3.0, 0.98) == 0.0);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> q(-100.0, 10.0);
  for (int i = 0; i < 1000; ++i) {
    for (double gamma : {0.9, 0.98}) {
      const double y = critic_target(i % 2 == 0 ? 0.0 : -1.0, q(rng), gamma);
      CHECK(y <= 0.0);
      CHECK(y >= -1.0 / (1.0 - gamma) - 1e-12);
    }
  }
}

TEST_CASE("running normalizer") {
  RunningNormalizer n(2);
  Eigen::MatrixXd rows(4, 2);
  rows << 0, 1, 2, 1, 4, 1, 6, 1;
  n.update(rows);
  CHECK(n.mean()(0) == doctest::Approx(3.0));
  CHECK(n.stddev()(0) == doctest::Approx(std::sqrt(5.0)));
  CHECK(n.stddev()(1) == doctest::Approx(1e-2));  // variance floor
  Eigen::MatrixXd probe(1, 2);
  probe << 3.0 + std::sqrt(5.0), 2.0;
  const Eigen::MatrixXd out = n.apply(probe);
  CHECK(out(0, 0) == doctest::Approx(1.0));
  CHECK(out(0, 1) == 5.0);
}

TEST_CASE("target networks contract onto frozen online networks") {
  DdpgAgent<double> agent(small_agent(CriticKind::Mrn), EnvConfig{}, 3);
  for (auto* p : agent.critic().parameters()) p->value.array() += 0.5;
  const auto gap = [&] {
    double d = 0.0;
    const auto t = agent.target_critic().parameters();
    const auto o = agent.critic().parameters();
    for (std::size_t i = 0; i < t.size(); ++i) d = std::max(d, (t[i]->value - o[i]->value).cwiseAbs().maxCoeff());
    return d;
  };
  const double before = gap();
  CHECK(before == doctest::Approx(0.5));
  for (int k = 0; k < 20; ++k) polyak_update(agent.target_critic().parameters(), agent.critic().parameters(), 0.95);
  CHECK(gap() == doctest::Approx(0.5 * std::pow(0.95, 20)).epsilon(1e-9));
}

TEST_CASE("updates keep metric residual estimates non-positive") {
  const PointMassEnv env;
  const auto buffer = filled_buffer(env, 10, 11);
  for (auto kind : {CriticKind::Mrn, CriticKind::MrnSymOnly, CriticKind::MrnAsymOnly, CriticKind::MrnSag}) {
    DdpgAgent<double> agent(small_agent(kind), env.config(), 5);
    std::mt19937_64 rng(12);
    agent.observe({buffer.episode(0), buffer.episode(1)});
    const auto target_before = agent.target_actor().parameters().front()->value;
    for (int k = 0; k < 5; ++k) {
      const auto stats = ddpg_update(agent, her_relabel(buffer, env, 64, 0.8, rng));
      CHECK(stats.max_q <= 0.0);
      CHECK(std::isfinite(stats.critic_loss));
      CHECK(std::isfinite(stats.actor_loss));
    }
    CHECK(agent.target_actor().parameters().front()->value != target_before);
    const auto batch = her_relabel(buffer, env, 64, 0.8, rng);
    CHECK((agent.q_values(batch.s, batch.a, batch.g).array() <= 0.0).all());
  }
}

TEST_CASE("a non-finite batch aborts the update") {
  const PointMassEnv env;
  const auto buffer = filled_buffer(env, 4, 13);
  std::mt19937_64 rng(14);
  auto batch = her_relabel(buffer, env, 16, 0.5, rng);
  batch.s(3, 1) = std::nan("");
  AgentConfig cfg = small_agent(CriticKind::Mrn);
  cfg.normalize = false;
  DdpgAgent<double> agent(cfg, env.config(), 1);
  CHECK_THROWS_AS(agent.update(batch), NumericError);
}

TEST_CASE("checkpoints round-trip the policy exactly") {
  const auto path = (std::filesystem::temp_directory_path() / "mrn_test_agent.params").string();
  auto cfg = tiny_train(CriticKind::Mrn);
  std::unique_ptr<DdpgAgent<float>> trained;
  train<float>(cfg, &trained);
  REQUIRE(trained);
  trained->save(path);

  DdpgAgent<float> fresh(cfg.agent, cfg.env, 999);
  fresh.load(path);
  std::mt19937_64 rng(15);
  Eigen::MatrixXd s(5, 2), g(5, 2);
  for (Eigen::Index i = 0; i < 5; ++i) {
    s.row(i) = PointMassEnv().sample_position(rng).transpose();
    g.row(i) = PointMassEnv().sample_position(rng).transpose();
  }
  CHECK(fresh.act(s, g) == trained->act(s, g));
  CHECK(fresh.state_normalizer().count() == trained->state_normalizer().count());

  DdpgAgent<float> other(small_agent(CriticKind::Monolithic), cfg.env, 1);
  CHECK_THROWS(other.load(path));
  std::remove(path.c_str());
  CHECK_THROWS(fresh.load(path));
}

TEST_CASE("training is deterministic and reports curves") {
  for (auto kind : {CriticKind::Mrn, CriticKind::Monolithic, CriticKind::Bvn}) {
    const auto cfg = tiny_train(kind);
    const auto a = train<float>(cfg);
    const auto b = train<float>(cfg);
    REQUIRE(a.curve.size() == 2);
    CHECK(curve_csv_rows(a) == curve_csv_rows(b));
    CHECK(a.arch == critic_kind_name(kind));
    for (const auto& row : a.curve) {
      CHECK(row.success_rate >= 0.0);
      CHECK(row.success_rate <= 1.0);
      CHECK(std::isfinite(row.critic_loss));
    }
    if (kind == CriticKind::Mrn) CHECK(a.max_q <= 0.0);
  }
  CHECK(curve_csv_header() == "arch,seed,epoch,success_rate,critic_loss,actor_loss\n");

  auto doubled = tiny_train(CriticKind::MrnSag);
  doubled.agent.lr = 0.002;
  doubled.seed = 7;
  doubled.arch_label = "mrn-sag-lr2";
  const auto r = train<float>(doubled);
  CHECK(curve_csv_rows(r).rfind("mrn-sag-lr2,7,1,", 0) == 0);

  TrainResult fake;
  fake.curve = {{1, 0.2, 0, 0}, {2, 0.95, 0, 0}, {3, 0.85, 0, 0}};
  CHECK(fake.epochs_to(0.9) == 2);
  CHECK(fake.epochs_to(0.99) == -1);
  CHECK(fake.final_success() == 0.85);

  auto bad = tiny_train(CriticKind::Mrn);
  bad.epochs = 0;
  CHECK_THROWS_AS(train<float>(bad), std::invalid_argument);
  bad = tiny_train(CriticKind::Mrn);
  bad.agent.gamma = 1.0;
  CHECK_THROWS_AS(train<float>(bad), std::invalid_argument);
}
