#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sagin/error.hpp"
#include "sagin/random.hpp"
#include "sagin/rl/env.hpp"
#include "sagin/rl/replay.hpp"
#include "sagin/rl/tinynet.hpp"
#include "sagin/rl/trace.hpp"

namespace sagin::rl {

/// Hyperparameters shared by all agents; each agent reads the fields it needs.
struct Hyper {
    double lr = 0.1;        // tabular value updates
    double actor_lr = 0.1;  // tabular actor-critic policy logits
    double net_lr = 0.1;    // network SGD
    double gamma = 0.9;
    double eps_start = 1.0;
    double eps_end = 0.05;
    double eps_decay_fraction = 0.5; // linear decay over this fraction of the run
    std::size_t replay_capacity = 1000;
    std::size_t batch_size = 32;
    std::size_t target_sync = 100;
    double clip = 0.2;
    std::size_t ppo_epochs = 4;
    std::size_t rollout = 64;
    double entropy_coef = 0.01;
    bool normalize_advantage = true;
    std::size_t hidden = 32;
    std::size_t ensemble = 4;   // Multi-Q table count
    double init_noise = 0.0;    // Multi-Q initial table noise
    bool ac_replay = false;     // actor-critic: extra critic updates from replay
    std::size_t window = 100;   // moving-average window of the trace

    void validate() const {
        if (!(lr > 0.0) || !(actor_lr > 0.0) || !(net_lr > 0.0)) throw InvalidArgument("learning rates must be > 0");
        if (!(gamma >= 0.0 && gamma <= 1.0)) throw InvalidArgument("gamma must be in [0,1]");
        if (!(eps_start >= 0.0 && eps_start <= 1.0) || !(eps_end >= 0.0 && eps_end <= 1.0))
            throw InvalidArgument("epsilon must be in [0,1]");
        if (!(eps_decay_fraction > 0.0 && eps_decay_fraction <= 1.0))
            throw InvalidArgument("eps_decay_fraction must be in (0,1]");
        if (replay_capacity == 0 || batch_size == 0 || target_sync == 0 || rollout == 0 || ppo_epochs == 0 ||
            hidden == 0 || window == 0)
            throw InvalidArgument("sizes and periods must be > 0");
        if (ensemble < 2) throw InvalidArgument("multi-Q ensemble needs at least 2 tables");
        if (!(clip > 0.0)) throw InvalidArgument("clip must be > 0");
        if (!(entropy_coef >= 0.0) || !(init_noise >= 0.0)) throw InvalidArgument("coefficients must be >= 0");
    }
};

inline double epsilon_at(const Hyper& h, std::size_t t, std::size_t steps) {
    const double span = h.eps_decay_fraction * static_cast<double>(steps);
    if (!(span > 0.0) || static_cast<double>(t) >= span) return h.eps_end;
    return h.eps_start + (h.eps_end - h.eps_start) * (static_cast<double>(t) / span);
}

/// Lowest index among the maxima.
inline std::size_t argmax(std::span<const double> v) {
    return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

inline std::size_t sample_categorical(std::span<const double> p, Rng& rng) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        acc += p[i];
        if (u < acc) return i;
    }
    return p.size() - 1;
}

/// Greedy action per state id.
struct Policy {
    std::vector<std::size_t> action_by_state;
    bool trained = false;

    std::size_t act(std::size_t state_id) const { return action_by_state.at(state_id); }
};

struct TrainResult {
    Policy policy;
    ConvergenceTrace trace;
};

/// Effect of the policy's choice at the reference state, scored at the reference channels.
inline double greedy_effect(const Environment& env, const Policy& policy) {
    return env.reference_effect(policy.act(env.state_id(env.reference_state())));
}

inline std::size_t greedy_action(const Environment& env, const Policy& policy) {
    return policy.act(env.state_id(env.reference_state()));
}

// ---------------------------------------------------------------------------
// Tabular agents

class QTable {
public:
    QTable(std::size_t states, std::size_t actions, double init = 0.0)
        : actions_(actions), q_(states * actions, init), visits_(states * actions, 0) {}

    /// Step size for the next update of (s, a): 1/n until that drops below `lr`.
    double step_size(std::size_t s, std::size_t a, double lr) {
        const auto n = ++visits_[s * actions_ + a];
        return std::max(lr, 1.0 / static_cast<double>(n));
    }

    std::span<double> row(std::size_t s) { return {q_.data() + s * actions_, actions_}; }
    std::span<const double> row(std::size_t s) const { return {q_.data() + s * actions_, actions_}; }
    double& at(std::size_t s, std::size_t a) { return q_[s * actions_ + a]; }
    double at(std::size_t s, std::size_t a) const { return q_[s * actions_ + a]; }
    std::size_t states() const { return q_.size() / actions_; }
    std::size_t actions() const { return actions_; }

private:
    std::size_t actions_;
    std::vector<double> q_;
    std::vector<std::size_t> visits_;
};

/// Tabular Q-learning with epsilon-greedy exploration.
class QLearningAgent {
public:
    QLearningAgent(const Environment& env, const Hyper& h, std::size_t steps)
        : env_(env), h_(h), steps_(steps), q_(env.state_count(), env.action_count()) {}

    std::size_t act(const EnvState& s, std::size_t t, Rng& rng) const {
        const auto sid = env_.state_id(s);
        if (rng.uniform() < epsilon_at(h_, t, steps_)) return rng.index(env_.action_count());
        return argmax(q_.row(sid));
    }

    void observe(const Transition& tr, Rng&) {
        const auto s = env_.state_id(tr.state);
        const double boot = tr.done ? 0.0 : h_.gamma * max_of(q_.row(env_.state_id(tr.next_state)));
        q_.at(s, tr.action) += q_.step_size(s, tr.action, h_.lr) * (tr.reward + boot - q_.at(s, tr.action));
    }

    Policy policy(bool trained) const {
        Policy p{{}, trained};
        for (std::size_t s = 0; s < q_.states(); ++s) p.action_by_state.push_back(argmax(q_.row(s)));
        return p;
    }

    const QTable& table() const { return q_; }

private:
    static double max_of(std::span<const double> v) { return *std::max_element(v.begin(), v.end()); }

    const Environment& env_;
    Hyper h_;
    std::size_t steps_;
    QTable q_;
};

/// Ensemble Q-learning: each update trains one randomly chosen table toward a
/// target bootstrapped from the mean of the other tables; actions use the
/// ensemble mean.
class MultiQAgent {
public:
    MultiQAgent(const Environment& env, const Hyper& h, std::size_t steps, Rng& init_rng)
        : env_(env), h_(h), steps_(steps) {
        for (std::size_t k = 0; k < h.ensemble; ++k) {
            tables_.emplace_back(env.state_count(), env.action_count());
            if (h.init_noise > 0.0)
                for (std::size_t s = 0; s < env.state_count(); ++s)
                    for (auto& v : tables_.back().row(s)) v = h.init_noise * init_rng.normal();
        }
    }

    std::vector<double> mean_row(std::size_t s, std::size_t exclude = SIZE_MAX) const {
        std::vector<double> m(env_.action_count(), 0.0);
        std::size_t n = 0;
        for (std::size_t k = 0; k < tables_.size(); ++k) {
            if (k == exclude) continue;
            const auto r = tables_[k].row(s);
            for (std::size_t a = 0; a < m.size(); ++a) m[a] += r[a];
            ++n;
        }
        for (auto& v : m) v /= static_cast<double>(n);
        return m;
    }

    std::size_t act(const EnvState& s, std::size_t t, Rng& rng) const {
        const auto sid = env_.state_id(s);
        if (rng.uniform() < epsilon_at(h_, t, steps_)) return rng.index(env_.action_count());
        return argmax(mean_row(sid));
    }

    void observe(const Transition& tr, Rng& rng) {
        const auto j = rng.index(tables_.size());
        const auto s = env_.state_id(tr.state);
        double boot = 0.0;
        if (!tr.done) {
            const auto others = mean_row(env_.state_id(tr.next_state), j);
            boot = h_.gamma * *std::max_element(others.begin(), others.end());
        }
        const double step = tables_[j].step_size(s, tr.action, h_.lr);
        auto& q = tables_[j].at(s, tr.action);
        q += step * (tr.reward + boot - q);
    }

    Policy policy(bool trained) const {
        Policy p{{}, trained};
        for (std::size_t s = 0; s < env_.state_count(); ++s) p.action_by_state.push_back(argmax(mean_row(s)));
        return p;
    }

    const std::vector<QTable>& tables() const { return tables_; }

private:
    const Environment& env_;
    Hyper h_;
    std::size_t steps_;
    std::vector<QTable> tables_;
};

/// Tabular softmax actor with a TD(0) critic.
///
/// With `normalize_advantage`, the actor step uses the TD error divided by its
/// running RMS, which keeps the step scale independent of the reward scale.
class ActorCriticAgent {
public:
    ActorCriticAgent(const Environment& env, const Hyper& h)
        : env_(env), h_(h), logits_(env.state_count(), env.action_count()), value_(env.state_count(), 0.0),
          visits_(env.state_count(), 0), replay_(h.replay_capacity) {}

    std::vector<double> probabilities(std::size_t s) const { return softmax(logits_.row(s)); }

    double entropy(std::size_t s) const {
        double e = 0.0;
        for (double p : probabilities(s))
            if (p > 0.0) e -= p * std::log(p);
        return e;
    }

    std::size_t act(const EnvState& s, std::size_t, Rng& rng) const {
        return sample_categorical(probabilities(env_.state_id(s)), rng);
    }

    void observe(const Transition& tr, Rng& rng) {
        const auto s = env_.state_id(tr.state);
        const double delta = td_error(tr);
        value_[s] += std::max(h_.lr, 1.0 / static_cast<double>(++visits_[s])) * delta;

        double adv = delta;
        if (h_.normalize_advantage) {
            delta_sq_ = delta_sq_ == 0.0 ? delta * delta : 0.99 * delta_sq_ + 0.01 * delta * delta;
            adv = delta / (std::sqrt(delta_sq_) + 1e-8);
        }
        const auto p = probabilities(s);
        auto row = logits_.row(s);
        for (std::size_t a = 0; a < row.size(); ++a) row[a] += h_.actor_lr * adv * ((a == tr.action ? 1.0 : 0.0) - p[a]);

        if (h_.ac_replay) {
            replay_.push(tr);
            for (const auto* old : replay_.sample(std::min(h_.batch_size, replay_.size()), rng))
                value_[env_.state_id(old->state)] += h_.lr * td_error(*old);
        }
    }

    Policy policy(bool trained) const {
        Policy p{{}, trained};
        for (std::size_t s = 0; s < env_.state_count(); ++s) p.action_by_state.push_back(argmax(logits_.row(s)));
        return p;
    }

    double value(std::size_t s) const { return value_[s]; }

private:
    double td_error(const Transition& tr) const {
        const double boot = tr.done ? 0.0 : h_.gamma * value_[env_.state_id(tr.next_state)];
        return tr.reward + boot - value_[env_.state_id(tr.state)];
    }

    const Environment& env_;
    Hyper h_;
    QTable logits_;
    std::vector<double> value_;
    std::vector<std::size_t> visits_;
    double delta_sq_ = 0.0;
    ReplayBuffer<Transition> replay_;
};

// ---------------------------------------------------------------------------
// Network agents

struct Experience {
    std::vector<double> state;
    std::size_t action = 0;
    double reward = 0.0;
    std::vector<double> next_state;
    bool done = true;
};

/// Q-network with experience replay and a periodically synced target network.
class DqnAgent {
public:
    DqnAgent(const Environment& env, const Hyper& h, std::size_t steps, Rng& init_rng)
        : env_(env), h_(h), steps_(steps),
          online_(TinyNet::glorot({env.feature_size(), h.hidden, env.action_count()}, init_rng)),
          target_(online_), replay_(h.replay_capacity) {}

    std::size_t act(const EnvState& s, std::size_t t, Rng& rng) const {
        if (rng.uniform() < epsilon_at(h_, t, steps_)) return rng.index(env_.action_count());
        return argmax(online_.forward(env_.features(s)));
    }

    void observe(const Transition& tr, Rng& rng) {
        replay_.push({env_.features(tr.state), tr.action, tr.reward, env_.features(tr.next_state), tr.done});
        if (replay_.size() < std::min(h_.batch_size, h_.replay_capacity)) return;
        learn(replay_.sample(h_.batch_size, rng));
    }

    /// One SGD step on the mean squared TD error of `batch`.
    void learn(const std::vector<const Experience*>& batch) {
        std::vector<double> grad(online_.parameter_count(), 0.0);
        const double scale = 1.0 / static_cast<double>(batch.size());
        for (const auto* e : batch) {
            double target = e->reward;
            if (!e->done) {
                const auto next = target_.forward(e->next_state);
                target += h_.gamma * *std::max_element(next.begin(), next.end());
            }
            TinyNet::Tape tape;
            const auto q = online_.forward(e->state, tape);
            std::vector<double> d_out(q.size(), 0.0);
            d_out[e->action] = (q[e->action] - target) * scale;
            online_.backward(tape, d_out, grad);
        }
        online_.sgd_step(grad, h_.net_lr);
        if (++updates_ % h_.target_sync == 0) target_ = online_;
    }

    Policy policy(bool trained) const {
        Policy p{{}, trained};
        for (std::size_t s = 0; s < env_.state_count(); ++s)
            p.action_by_state.push_back(argmax(online_.forward(env_.features(env_.state_from_id(s)))));
        return p;
    }

    const TinyNet& online() const { return online_; }
    const TinyNet& target() const { return target_; }
    std::size_t updates() const { return updates_; }

private:
    const Environment& env_;
    Hyper h_;
    std::size_t steps_;
    TinyNet online_, target_;
    ReplayBuffer<Experience> replay_;
    std::size_t updates_ = 0;
};

/// Clipped-surrogate policy optimization with a learned value baseline.
class PpoAgent {
public:
    struct Sample {
        std::vector<double> state;
        std::size_t action = 0;
        double reward = 0.0;
        std::vector<double> next_state;
        bool done = true;
    };

    PpoAgent(const Environment& env, const Hyper& h, Rng& init_rng)
        : env_(env), h_(h), policy_(TinyNet::glorot({env.feature_size(), h.hidden, env.action_count()}, init_rng)),
          value_(TinyNet::glorot({env.feature_size(), h.hidden, 1}, init_rng)) {}

    std::vector<double> probabilities(std::span<const double> x) const { return softmax(policy_.forward(x)); }

    std::size_t act(const EnvState& s, std::size_t, Rng& rng) const {
        return sample_categorical(probabilities(env_.features(s)), rng);
    }

    void observe(const Transition& tr, Rng&) {
        rollout_.push_back({env_.features(tr.state), tr.action, tr.reward, env_.features(tr.next_state), tr.done});
        if (rollout_.size() >= h_.rollout) {
            update(rollout_);
            rollout_.clear();
        }
    }

    /// pi_new(a|s) / pi_old(a|s) per sample.
    std::vector<double> ratios(std::span<const Sample> batch, std::span<const double> old_prob) const {
        std::vector<double> r;
        for (std::size_t i = 0; i < batch.size(); ++i)
            r.push_back(probabilities(batch[i].state)[batch[i].action] / old_prob[i]);
        return r;
    }

    /// r + gamma * V(s') - V(s), optionally standardized.
    std::vector<double> advantages(std::span<const Sample> batch) const {
        std::vector<double> adv;
        for (const auto& s : batch) adv.push_back(td_target(s) - value_.forward(s.state)[0]);
        if (h_.normalize_advantage && adv.size() > 1) {
            double mean = 0.0, var = 0.0;
            for (double a : adv) mean += a;
            mean /= static_cast<double>(adv.size());
            for (double a : adv) var += (a - mean) * (a - mean);
            const double sd = std::sqrt(var / static_cast<double>(adv.size()));
            for (auto& a : adv) a = (a - mean) / (sd + 1e-8);
        }
        return adv;
    }

    /// Gradient of the negated clipped surrogate (minus entropy bonus) w.r.t.
    /// the policy parameters, averaged over the batch.
    std::vector<double> policy_gradient(std::span<const Sample> batch, std::span<const double> adv,
                                        std::span<const double> old_prob) const {
        std::vector<double> grad(policy_.parameter_count(), 0.0);
        const double scale = 1.0 / static_cast<double>(batch.size());
        for (std::size_t i = 0; i < batch.size(); ++i) {
            TinyNet::Tape tape;
            const auto p = softmax(policy_.forward(batch[i].state, tape));
            const auto a = batch[i].action;
            const double ratio = p[a] / old_prob[i];
            const bool clipped = (adv[i] > 0.0 && ratio > 1.0 + h_.clip) || (adv[i] < 0.0 && ratio < 1.0 - h_.clip);
            std::vector<double> d_logits(p.size(), 0.0);
            if (!clipped)
                for (std::size_t j = 0; j < p.size(); ++j)
                    d_logits[j] -= adv[i] * ratio * ((j == a ? 1.0 : 0.0) - p[j]);
            if (h_.entropy_coef > 0.0) {
                double h = 0.0;
                for (double q : p)
                    if (q > 0.0) h -= q * std::log(q);
                for (std::size_t j = 0; j < p.size(); ++j)
                    if (p[j] > 0.0) d_logits[j] += h_.entropy_coef * p[j] * (std::log(p[j]) + h);
            }
            for (auto& g : d_logits) g *= scale;
            policy_.backward(tape, d_logits, grad);
        }
        return grad;
    }

    void update(std::span<const Sample> batch) {
        std::vector<double> old_prob;
        for (const auto& s : batch) old_prob.push_back(probabilities(s.state)[s.action]);
        const auto adv = advantages(batch);
        std::vector<double> targets;
        for (const auto& s : batch) targets.push_back(td_target(s));
        const double scale = 1.0 / static_cast<double>(batch.size());
        for (std::size_t epoch = 0; epoch < h_.ppo_epochs; ++epoch) {
            policy_.sgd_step(policy_gradient(batch, adv, old_prob), h_.net_lr);
            std::vector<double> vgrad(value_.parameter_count(), 0.0);
            for (std::size_t i = 0; i < batch.size(); ++i) {
                TinyNet::Tape tape;
                const auto v = value_.forward(batch[i].state, tape);
                const double d = (v[0] - targets[i]) * scale;
                value_.backward(tape, std::span<const double>(&d, 1), vgrad);
            }
            value_.sgd_step(vgrad, h_.net_lr);
        }
    }

    Policy policy(bool trained) const {
        Policy p{{}, trained};
        for (std::size_t s = 0; s < env_.state_count(); ++s)
            p.action_by_state.push_back(argmax(policy_.forward(env_.features(env_.state_from_id(s)))));
        return p;
    }

    const TinyNet& policy_net() const { return policy_; }
    const TinyNet& value_net() const { return value_; }

private:
    double td_target(const Sample& s) const {
        return s.reward + (s.done ? 0.0 : h_.gamma * value_.forward(s.next_state)[0]);
    }

    const Environment& env_;
    Hyper h_;
    TinyNet policy_, value_;
    std::vector<Sample> rollout_;
};

// ---------------------------------------------------------------------------
// Training drivers

/// Runs `steps` environment steps. Environment draws and agent draws come from
/// separate streams of `seed`.
template <typename Agent>
TrainResult run_training(const Environment& env, Agent& agent, std::size_t steps, const Hyper& h,
                         std::uint64_t seed) {
    const Rng root(seed);
    Rng env_rng = root.stream(0);
    Rng agent_rng = root.stream(1);
    ConvergenceTrace trace(h.window);
    auto state = env.reset(env_rng);
    for (std::size_t t = 0; t < steps; ++t) {
        const auto action = agent.act(state, t, agent_rng);
        const auto tr = env.step(state, action, env_rng);
        agent.observe(tr, agent_rng);
        trace.push(tr.effect);
        state = tr.next_state;
    }
    return {agent.policy(steps > 0), std::move(trace)};
}

inline TrainResult train_q_learning(const Environment& env, std::size_t steps, const Hyper& h, std::uint64_t seed) {
    h.validate();
    QLearningAgent agent(env, h, steps);
    return run_training(env, agent, steps, h, seed);
}

inline TrainResult train_multi_q(const Environment& env, std::size_t steps, const Hyper& h, std::uint64_t seed) {
    h.validate();
    Rng init = Rng(seed).stream(2);
    MultiQAgent agent(env, h, steps, init);
    return run_training(env, agent, steps, h, seed);
}

inline TrainResult train_actor_critic(const Environment& env, std::size_t steps, const Hyper& h,
                                      std::uint64_t seed) {
    h.validate();
    ActorCriticAgent agent(env, h);
    return run_training(env, agent, steps, h, seed);
}

inline TrainResult train_dqn(const Environment& env, std::size_t steps, const Hyper& h, std::uint64_t seed) {
    h.validate();
    Rng init = Rng(seed).stream(2);
    DqnAgent agent(env, h, steps, init);
    return run_training(env, agent, steps, h, seed);
}

inline TrainResult train_ppo(const Environment& env, std::size_t steps, const Hyper& h, std::uint64_t seed) {
    h.validate();
    Rng init = Rng(seed).stream(2);
    PpoAgent agent(env, h, init);
    return run_training(env, agent, steps, h, seed);
}

inline const std::vector<std::string>& agent_names() {
    static const std::vector<std::string> names{"q_learning", "multi_q", "actor_critic", "dqn", "ppo"};
    return names;
}

inline TrainResult train(const std::string& agent, const Environment& env, std::size_t steps, const Hyper& h,
                         std::uint64_t seed) {
    if (agent == "q_learning") return train_q_learning(env, steps, h, seed);
    if (agent == "multi_q") return train_multi_q(env, steps, h, seed);
    if (agent == "actor_critic") return train_actor_critic(env, steps, h, seed);
    if (agent == "dqn") return train_dqn(env, steps, h, seed);
    if (agent == "ppo") return train_ppo(env, steps, h, seed);
    throw InvalidArgument("unknown agent '" + agent + "'");
}

} // namespace sagin::rl
