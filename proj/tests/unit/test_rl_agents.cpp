#include <gtest/gtest.h>

#include <cmath>

#include "sagin/rl/agents.hpp"

using namespace sagin;
using namespace sagin::rl;

namespace {

// One device, fixed channel, two cuts; only confidentiality counts, so the
// rewards are exactly -(1 - kl_open / kl_max) = {-0.9, -0.2}.
trico::Scenario bandit_scenario() {
    trico::Scenario s;
    s.profile = nn::parse_profile_csv(std::string(nn::profile_csv_header) + "\na,10,4,4,1\nb,10,2,4,1\n");
    s.devices = {net::uav_device()};
    s.channels = {net::ChannelState{1e6, 3.0}};
    s.conf_table.entries = {{"a", 0.1, 0.0, std::nullopt, std::nullopt}, {"b", 0.8, 1.0, std::nullopt, std::nullopt}};
    s.weights = {0, 0, 1, 1.0, 0.5};
    return s;
}

trico::Scenario fixed_default() {
    auto s = trico::default_scenario();
    s.channels = {net::ChannelState{1e7, 10.0}, net::ChannelState{2e7, 30.0}};
    return s;
}

Transition bandit_transition(const Environment& env, std::size_t action, double reward) {
    Rng rng(0);
    const auto s = env.reset(rng);
    return {s, action, reward, s, true, -reward};
}

} // namespace

TEST(BanditScenario, Rewards) {
    const Environment env{trico::CostModel(bandit_scenario())};
    Rng rng(1);
    const auto s = env.reset(rng);
    EXPECT_NEAR(env.step(s, 0, rng).reward, -0.9, 1e-15);
    EXPECT_NEAR(env.step(s, 1, rng).reward, -0.2, 1e-15);
}

TEST(QLearning, BanditArgmax) {
    const Environment env{trico::CostModel(bandit_scenario())};
    const auto r = train_q_learning(env, 200, Hyper{}, 3);
    EXPECT_EQ(r.policy.act(0), 1u);
    EXPECT_TRUE(r.policy.trained);
    EXPECT_EQ(r.trace.size(), 200u);
}

TEST(QLearning, UpdateAlgebra) {
    const Environment env{trico::CostModel(bandit_scenario())};
    Hyper h;
    h.lr = 1.0;
    h.gamma = 0.0;
    QLearningAgent agent(env, h, 10);
    Rng rng(1);
    agent.observe(bandit_transition(env, 0, -0.7), rng);
    agent.observe(bandit_transition(env, 1, -0.3), rng);
    EXPECT_EQ(agent.table().at(0, 0), -0.7);
    EXPECT_EQ(agent.table().at(0, 1), -0.3);
    agent.observe(bandit_transition(env, 0, -0.1), rng);
    EXPECT_NEAR(agent.table().at(0, 0), -0.1, 1e-15);
}

TEST(QLearning, FixedPointIsRewardVector) {
    const auto s = fixed_default();
    const Environment env{trico::CostModel(s)};
    Hyper h;
    h.gamma = 0.0;
    QLearningAgent agent(env, h, 2000);
    Rng env_rng(1), agent_rng(2);
    auto st = env.reset(env_rng);
    for (std::size_t t = 0; t < 2000; ++t) {
        const auto tr = env.step(st, agent.act(st, t, agent_rng), env_rng);
        agent.observe(tr, agent_rng);
        st = tr.next_state;
    }
    for (std::size_t a = 0; a < env.action_count(); ++a)
        EXPECT_NEAR(agent.table().at(0, a), -env.reference_effect(a), 1e-12);
}

TEST(MultiQ, DegenerateEnsembleMatchesSingleQ) {
    const Environment env{trico::CostModel(fixed_default())};
    Hyper h;
    h.gamma = 0.0;
    const auto q = train_q_learning(env, 3000, h, 5);
    const auto m = train_multi_q(env, 3000, h, 5);
    EXPECT_EQ(q.policy.action_by_state, m.policy.action_by_state);

    // With gamma = 0 every table converges to the same reward vector.
    Rng init(1);
    MultiQAgent agent(env, h, 4000, init);
    Rng rng(2), env_rng(3);
    auto st = env.reset(env_rng);
    for (std::size_t t = 0; t < 4000; ++t) {
        const auto tr = env.step(st, rng.index(env.action_count()), env_rng);
        agent.observe(tr, rng);
        st = tr.next_state;
    }
    const auto mean = agent.mean_row(0);
    for (std::size_t a = 0; a < env.action_count(); ++a) EXPECT_NEAR(mean[a], -env.reference_effect(a), 1e-12);
}

TEST(MultiQ, BanditArgmaxMatchesQ) {
    const Environment env{trico::CostModel(bandit_scenario())};
    EXPECT_EQ(train_multi_q(env, 300, Hyper{}, 4).policy.act(0), train_q_learning(env, 300, Hyper{}, 4).policy.act(0));
    Hyper bad;
    bad.ensemble = 1;
    EXPECT_THROW(train_multi_q(env, 10, bad, 1), InvalidArgument);
}

TEST(ActorCritic, InitialEntropyIsLogActions) {
    const Environment env{trico::CostModel(fixed_default())};
    const ActorCriticAgent agent(env, Hyper{});
    EXPECT_NEAR(agent.entropy(0), std::log(25.0), 1e-12);
}

TEST(ActorCritic, BanditConcentratesOnBestAction) {
    const Environment env{trico::CostModel(bandit_scenario())};
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        ActorCriticAgent agent(env, Hyper{});
        run_training(env, agent, 1000, Hyper{}, seed);
        EXPECT_GT(agent.probabilities(0)[1], 0.9) << seed;
    }
}

TEST(ActorCritic, ReplayVariantRuns) {
    const Environment env{trico::CostModel(trico::default_scenario())};
    Hyper h;
    h.ac_replay = true;
    const auto r = train_actor_critic(env, 500, h, 1);
    EXPECT_EQ(r.trace.size(), 500u);
}

TEST(Dqn, DegenerateReplayIsIncrementalQ) {
    const Environment env{trico::CostModel(bandit_scenario())};
    Hyper h;
    h.replay_capacity = 1;
    h.batch_size = 1;
    h.target_sync = 1;
    Rng init(1);
    DqnAgent agent(env, h, 100, init);
    Rng rng(2), env_rng(3);
    auto st = env.reset(env_rng);
    for (int i = 0; i < 20; ++i) {
        const auto tr = env.step(st, i % 2, env_rng);
        // Expected: one SGD step on 0.5 * (Q(s,a) - r)^2 for this transition only.
        TinyNet expected = agent.online();
        TinyNet::Tape tape;
        const auto x = env.features(tr.state);
        const auto q = expected.forward(x, tape);
        std::vector<double> d(q.size(), 0.0), grad(expected.parameter_count(), 0.0);
        d[tr.action] = q[tr.action] - tr.reward;
        expected.backward(tape, d, grad);
        expected.sgd_step(grad, h.net_lr);
        agent.observe(tr, rng);
        EXPECT_EQ(agent.online(), expected);
        EXPECT_EQ(agent.target(), agent.online());
        st = tr.next_state;
    }
    EXPECT_EQ(agent.updates(), 20u);
}

TEST(Dqn, TargetSyncPeriod) {
    const Environment env{trico::CostModel(fixed_default())};
    Hyper h;
    h.batch_size = 4;
    h.target_sync = 5;
    Rng init(1);
    DqnAgent agent(env, h, 100, init);
    Rng rng(2), env_rng(3);
    auto st = env.reset(env_rng);
    for (int i = 0; i < 40; ++i) {
        const auto tr = env.step(st, rng.index(25), env_rng);
        agent.observe(tr, rng);
        if (agent.updates() > 0) { EXPECT_EQ(agent.target() == agent.online(), agent.updates() % 5 == 0); }
        st = tr.next_state;
    }
}

TEST(Ppo, IdenticalPoliciesGiveUnitRatios) {
    const Environment env{trico::CostModel(trico::default_scenario())};
    Rng init(1), rng(2);
    const PpoAgent agent(env, Hyper{}, init);
    std::vector<PpoAgent::Sample> batch;
    std::vector<double> old;
    for (int i = 0; i < 10; ++i) {
        const auto s = env.reset(rng);
        const auto x = env.features(s);
        batch.push_back({x, static_cast<std::size_t>(i % 25), -0.5, x, true});
        old.push_back(agent.probabilities(x)[batch.back().action]);
    }
    for (double r : agent.ratios(batch, old)) EXPECT_DOUBLE_EQ(r, 1.0);
}

TEST(Ppo, UnclippedSingleEpochIsVanillaPolicyGradient) {
    const Environment env{trico::CostModel(trico::default_scenario())};
    Hyper h;
    h.clip = 1e300;
    h.ppo_epochs = 1;
    h.entropy_coef = 0.0;
    Rng init(1), rng(2);
    const PpoAgent agent(env, h, init);
    std::vector<PpoAgent::Sample> batch;
    std::vector<double> old, adv;
    for (int i = 0; i < 16; ++i) {
        const auto x = env.features(env.reset(rng));
        batch.push_back({x, rng.index(25), -rng.uniform(), x, true});
        old.push_back(agent.probabilities(x)[batch.back().action]);
        adv.push_back(rng.uniform(-1, 1));
    }
    const auto g = agent.policy_gradient(batch, adv, old);
    // Vanilla estimator: -mean(adv * grad log pi(a|s)).
    std::vector<double> vanilla(g.size(), 0.0);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        TinyNet::Tape tape;
        const auto p = softmax(agent.policy_net().forward(batch[i].state, tape));
        std::vector<double> d(p.size());
        for (std::size_t j = 0; j < p.size(); ++j) d[j] = -adv[i] * ((j == batch[i].action ? 1.0 : 0.0) - p[j]) / 16.0;
        agent.policy_net().backward(tape, d, vanilla);
    }
    for (std::size_t k = 0; k < g.size(); ++k) EXPECT_NEAR(g[k], vanilla[k], 1e-14);
}

TEST(Ppo, ClippingZeroesGradientOutsideTrustRegion) {
    const Environment env{trico::CostModel(trico::default_scenario())};
    Hyper h;
    h.entropy_coef = 0.0;
    Rng init(1), rng(2);
    const PpoAgent agent(env, h, init);
    const auto x = env.features(env.reset(rng));
    const std::vector<PpoAgent::Sample> batch{{x, 3, -0.5, x, true}};
    const double p = agent.probabilities(x)[3];
    // Ratio 2 with positive advantage is clipped.
    const std::vector<double> old{p / 2}, adv{1.0};
    for (double v : agent.policy_gradient(batch, adv, old)) EXPECT_EQ(v, 0.0);
}

TEST(Training, DeterministicTraces) {
    const Environment env{trico::CostModel(trico::default_scenario())};
    for (const auto& name : agent_names()) {
        const auto a = train(name, env, 400, Hyper{}, 11);
        const auto b = train(name, env, 400, Hyper{}, 11);
        EXPECT_EQ(a.trace.to_csv(), b.trace.to_csv()) << name;
        EXPECT_EQ(a.policy.action_by_state, b.policy.action_by_state) << name;
    }
}

TEST(Training, ZeroStepsIsUntrained) {
    const Environment env{trico::CostModel(trico::default_scenario())};
    for (const auto& name : agent_names()) {
        const auto r = train(name, env, 0, Hyper{}, 1);
        EXPECT_FALSE(r.policy.trained);
        EXPECT_TRUE(r.trace.empty());
    }
    EXPECT_THROW(train("sarsa", env, 10, Hyper{}, 1), InvalidArgument);
}

TEST(Training, OracleIsLowerBoundAndDefaultConverges) {
    const Environment env{trico::CostModel(trico::default_scenario())};
    const double best = trico::brute_force_optimal(env.model()).effect;
    for (const auto& name : agent_names()) {
        const auto r = train(name, env, 3000, Hyper{}, 7);
        const double e = greedy_effect(env, r.policy);
        EXPECT_GE(e, best - 1e-9) << name;
        EXPECT_LE(r.trace.back().moving_avg, 1.10 * best) << name;
        for (const auto& row : r.trace.rows()) {
            EXPECT_GE(row.effect, 0.0);
            EXPECT_LE(row.effect, 1.0);
        }
    }
}
