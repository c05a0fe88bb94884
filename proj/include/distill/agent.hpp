#pragma once

// Soft actor-critic adapted to the tree-structured episode: each stored
// transition carries up to two successor states, and each branch contributes
// its soft value clamped at zero (declining a stream is always worth zero).

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include <json.hpp>

#include "distill/approx.hpp"
#include "distill/env.hpp"
#include "distill/random.hpp"

namespace distill::agent {

using approx::Matrix;
using approx::Vector;
using env::Observation;

struct AgentConfig {
    double gamma = 1.0;
    double tau = 0.005;
    double learning_rate = 3e-4;
    int batch_size = 128;
    std::size_t replay_capacity = 100000;
    int warmup_steps = 500;
    double forced_separate_prob = 0.05;
    double alpha_init = 0.2;
    bool auto_alpha = true;
    double target_entropy = -4.0;
    int updates_per_step = 1;
    std::vector<int> hidden_sizes{128, 128};
    /// Multiply critic outputs by the stream's flow fraction (sum of the
    /// observation's flow entries), so a stream's value is extensive in its flow.
    bool flow_scaled_critic = true;

    void validate() const;
};

nlohmann::json to_json(const AgentConfig& config);
/// Applies the keys present in `j` on top of `base`; unknown keys throw.
AgentConfig apply_overrides(AgentConfig base, const nlohmann::json& j, const std::string& path = "agent");

struct TreeTransition {
    Observation state;
    std::vector<double> action;
    double reward = 0.0;
    std::optional<Observation> tops_next;     // nullopt: terminal branch
    std::optional<Observation> bottoms_next;
};

class ReplayBuffer {
public:
    ReplayBuffer(std::size_t capacity, std::uint64_t seed);

    void push(TreeTransition transition);
    /// Uniform sample with replacement; throws env::UsageError when fewer than
    /// `batch_size` transitions are stored.
    std::vector<const TreeTransition*> sample(std::size_t batch_size);
    std::vector<std::size_t> sample_indices(std::size_t batch_size);

    std::size_t size() const { return items_.size(); }
    std::size_t capacity() const { return capacity_; }
    /// Oldest-first view position i.
    const TreeTransition& at(std::size_t i) const;

    nlohmann::json to_json() const;
    static ReplayBuffer from_json(const nlohmann::json& j);

private:
    std::size_t capacity_;
    std::vector<TreeTransition> items_;
    std::size_t cursor_ = 0;  // next slot to overwrite once full
    Rng rng_;
};

enum class Mode { explore, evaluate };

struct Decision {
    bool separate = false;
    std::vector<double> action;
    double q_value = 0.0;
    bool forced = false;  // separation imposed by exploration, not by the Q sign
};

/// Replacement for the twin critics in actor updates. Returns Q(s, a) and
/// writes dQ/da into `daction`.
using CriticOverride = std::function<double(const Vector& state, const Vector& action, Vector& daction)>;

struct UpdateStats {
    double critic_loss = 0.0;
    double actor_loss = 0.0;
    double alpha = 0.0;
    bool skipped = false;
};

class SacAgent {
public:
    SacAgent(std::size_t observation_size, std::size_t action_size, AgentConfig config,
             std::uint64_t seed);

    Decision select_action(const Observation& obs, Mode mode);

    /// Tree soft-Q targets y = r + gamma * sum over present branches of
    /// max(0, min_k Qtarget_k(s', a') - alpha log pi(a'|s')), a' ~ pi(.|s').
    std::vector<double> compute_target(const std::vector<const TreeTransition*>& batch);
    /// One Adam step per critic on 1/2 mean squared error; returns the pre-step
    /// loss averaged over both critics, or NaN when skipped.
    double update_critics(const std::vector<const TreeTransition*>& batch, const std::vector<double>& targets);
    double update_actor(const std::vector<const TreeTransition*>& batch);
    double update_temperature(const std::vector<const TreeTransition*>& batch);
    void update_targets();

    /// Full update from a replay sample: targets, critics, actor, temperature, targets.
    UpdateStats update(const std::vector<const TreeTransition*>& batch);

    double min_q(const Observation& obs, const std::vector<double>& action) const;
    double alpha() const;
    double log_alpha() const { return log_alpha_; }
    void set_log_alpha(double v) { log_alpha_ = v; }

    const AgentConfig& config() const { return config_; }
    std::size_t observation_size() const { return obs_size_; }
    std::size_t action_size() const { return action_size_; }
    std::int64_t decisions() const { return decisions_; }
    std::int64_t skipped_updates() const { return skipped_updates_; }

    approx::NetParams& actor() { return actor_; }
    approx::NetParams& critic(int k) { return critics_[k]; }
    approx::NetParams& target_critic(int k) { return targets_[k]; }
    const approx::NetParams& actor() const { return actor_; }
    const approx::NetParams& critic(int k) const { return critics_[k]; }
    const approx::NetParams& target_critic(int k) const { return targets_[k]; }

    ReplayBuffer& replay() { return replay_; }
    const ReplayBuffer& replay() const { return replay_; }
    Rng& rng() { return rng_; }

    void set_critic_override(CriticOverride critic) { critic_override_ = std::move(critic); }

    nlohmann::json checkpoint() const;
    static SacAgent from_checkpoint(const nlohmann::json& j);

private:
    Matrix stack_states(const std::vector<const TreeTransition*>& batch) const;
    Matrix critic_input(const Matrix& states, const Matrix& actions) const;
    Eigen::RowVectorXd critic_scale(const Matrix& states) const;
    Vector noise();

    std::size_t obs_size_;
    std::size_t action_size_;
    AgentConfig config_;
    approx::NetParams actor_;
    approx::NetParams critics_[2];
    approx::NetParams targets_[2];
    approx::OptimizerState actor_opt_;
    approx::OptimizerState critic_opt_[2];
    approx::ScalarAdam alpha_opt_;
    double log_alpha_;
    ReplayBuffer replay_;
    Rng rng_;
    std::int64_t decisions_ = 0;
    std::int64_t skipped_updates_ = 0;
    CriticOverride critic_override_;
};

// ---------------------------------------------------------------------------
// Training driver

struct TrainingLogRow {
    int episode = 0;
    int steps = 0;
    int columns_placed = 0;
    int failures = 0;
    double episode_return = 0.0;
    double revenue = 0.0;  // $/yr
    double tac = 0.0;      // $/yr
    double best_return_so_far = 0.0;
    double alpha = 0.0;
    double wall_ms = 0.0;
};

struct TrainingState {
    int episodes_done = 0;
    std::int64_t steps = 0;
    std::int64_t updates = 0;
    double best_return = -std::numeric_limits<double>::infinity();
    int best_episode = -1;
    std::optional<env::Flowsheet> best_flowsheet;
    std::uint64_t seed = 0;

    nlohmann::json to_json() const;
    static TrainingState from_json(const nlohmann::json& j);
};

struct TrainingSinks {
    std::function<void(const TrainingLogRow&)> on_episode;
    std::function<void(const env::Flowsheet&, const TrainingLogRow&)> on_best;
    /// Called after each episode with the updated state (checkpoint hook).
    std::function<void(const TrainingState&)> after_episode;
};

struct RunSummary {
    int episodes = 0;
    std::int64_t steps = 0;
    std::int64_t updates = 0;
    std::int64_t skipped_updates = 0;
    double best_return = -std::numeric_limits<double>::infinity();
    int best_episode = -1;
    std::vector<double> returns;  // episodes run in this call
};

/// Runs `episodes` further episodes, continuing from `state`.
RunSummary train(env::TreeEnv& environment, SacAgent& agent, TrainingState& state, int episodes,
                 const TrainingSinks& sinks = {});

struct EpisodeResult {
    env::EpisodeStats stats;
    std::vector<Decision> decisions;
};

/// One episode with evaluate-mode decisions and no learning.
EpisodeResult run_episode(env::TreeEnv& environment, SacAgent& agent, std::uint64_t seed);

}  // namespace distill::agent
