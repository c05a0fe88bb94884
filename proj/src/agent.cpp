#include "distill/agent.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace distill::agent {

namespace {

std::uint64_t splitmix(std::uint64_t x)
{
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::vector<int> layers(std::size_t in, const std::vector<int>& hidden, std::size_t out)
{
    std::vector<int> sizes{static_cast<int>(in)};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(static_cast<int>(out));
    return sizes;
}

Vector to_vector(const std::vector<double>& v)
{
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> to_std(const Vector& v)
{
    return {v.data(), v.data() + v.size()};
}

nlohmann::json transition_to_json(const TreeTransition& t)
{
    nlohmann::json j{{"s", t.state}, {"a", t.action}, {"r", t.reward}};
    j["tops"] = t.tops_next ? nlohmann::json(*t.tops_next) : nlohmann::json(nullptr);
    j["bottoms"] = t.bottoms_next ? nlohmann::json(*t.bottoms_next) : nlohmann::json(nullptr);
    return j;
}

TreeTransition transition_from_json(const nlohmann::json& j)
{
    TreeTransition t;
    t.state = j.at("s").get<std::vector<double>>();
    t.action = j.at("a").get<std::vector<double>>();
    t.reward = j.at("r").get<double>();
    if (!j.at("tops").is_null()) t.tops_next = j.at("tops").get<std::vector<double>>();
    if (!j.at("bottoms").is_null()) t.bottoms_next = j.at("bottoms").get<std::vector<double>>();
    return t;
}

nlohmann::json scalar_adam_to_json(const approx::ScalarAdam& a)
{
    return {{"learning_rate", a.config.learning_rate},
            {"beta1", a.config.beta1},
            {"beta2", a.config.beta2},
            {"epsilon", a.config.epsilon},
            {"m", a.m},
            {"v", a.v},
            {"step", a.step}};
}

approx::ScalarAdam scalar_adam_from_json(const nlohmann::json& j)
{
    approx::ScalarAdam a;
    a.config.learning_rate = j.at("learning_rate").get<double>();
    a.config.beta1 = j.at("beta1").get<double>();
    a.config.beta2 = j.at("beta2").get<double>();
    a.config.epsilon = j.at("epsilon").get<double>();
    a.m = j.at("m").get<double>();
    a.v = j.at("v").get<double>();
    a.step = j.at("step").get<std::int64_t>();
    return a;
}

}  // namespace

// ---------------------------------------------------------------------------
// AgentConfig

void AgentConfig::validate() const
{
    std::vector<std::string> problems;
    if (!(gamma > 0.0 && gamma <= 1.0)) problems.emplace_back("agent.gamma: must lie in (0, 1]");
    if (!(tau > 0.0 && tau <= 1.0)) problems.emplace_back("agent.tau: must lie in (0, 1]");
    if (!(learning_rate > 0.0)) problems.emplace_back("agent.lr: must be positive");
    if (batch_size < 1) problems.emplace_back("agent.batch_size: must be positive");
    if (replay_capacity < 1) problems.emplace_back("agent.replay_capacity: must be positive");
    if (static_cast<std::size_t>(batch_size) > replay_capacity) {
        problems.emplace_back("agent.batch_size: cannot exceed replay_capacity");
    }
    if (warmup_steps < 0) problems.emplace_back("agent.warmup_steps: must be non-negative");
    if (!(forced_separate_prob >= 0.0 && forced_separate_prob <= 1.0)) {
        problems.emplace_back("agent.forced_separate_prob: must lie in [0, 1]");
    }
    if (!(alpha_init > 0.0)) problems.emplace_back("agent.alpha_init: must be positive");
    if (updates_per_step < 0) problems.emplace_back("agent.updates_per_step: must be non-negative");
    if (hidden_sizes.empty()) problems.emplace_back("agent.hidden_sizes: at least one hidden layer");
    for (int h : hidden_sizes) {
        if (h < 1) problems.emplace_back("agent.hidden_sizes: sizes must be positive");
    }
    if (!problems.empty()) throw env::ValidationError(std::move(problems));
}

nlohmann::json to_json(const AgentConfig& c)
{
    return {{"gamma", c.gamma},
            {"tau", c.tau},
            {"lr", c.learning_rate},
            {"batch_size", c.batch_size},
            {"replay_capacity", c.replay_capacity},
            {"warmup_steps", c.warmup_steps},
            {"forced_separate_prob", c.forced_separate_prob},
            {"alpha_init", c.alpha_init},
            {"auto_alpha", c.auto_alpha},
            {"target_entropy", c.target_entropy},
            {"updates_per_step", c.updates_per_step},
            {"hidden_sizes", c.hidden_sizes},
            {"flow_scaled_critic", c.flow_scaled_critic}};
}

AgentConfig apply_overrides(AgentConfig c, const nlohmann::json& j, const std::string& path)
{
    if (!j.is_object()) {
        throw env::ValidationError({path + ": must be an object"});
    }
    std::vector<std::string> problems;
    for (const auto& [key, value] : j.items()) {
        try {
            if (key == "gamma") c.gamma = value.get<double>();
            else if (key == "tau") c.tau = value.get<double>();
            else if (key == "lr") c.learning_rate = value.get<double>();
            else if (key == "batch_size") c.batch_size = value.get<int>();
            else if (key == "replay_capacity") c.replay_capacity = value.get<std::size_t>();
            else if (key == "warmup_steps") c.warmup_steps = value.get<int>();
            else if (key == "forced_separate_prob") c.forced_separate_prob = value.get<double>();
            else if (key == "alpha_init") c.alpha_init = value.get<double>();
            else if (key == "auto_alpha") c.auto_alpha = value.get<bool>();
            else if (key == "target_entropy") c.target_entropy = value.get<double>();
            else if (key == "updates_per_step") c.updates_per_step = value.get<int>();
            else if (key == "hidden_sizes") c.hidden_sizes = value.get<std::vector<int>>();
            else if (key == "flow_scaled_critic") c.flow_scaled_critic = value.get<bool>();
            else problems.push_back(path + "." + key + ": unknown key");
        } catch (const nlohmann::json::exception&) {
            problems.push_back(path + "." + key + ": wrong type");
        }
    }
    if (!problems.empty()) throw env::ValidationError(std::move(problems));
    c.validate();
    return c;
}

// ---------------------------------------------------------------------------
// ReplayBuffer

ReplayBuffer::ReplayBuffer(std::size_t capacity, std::uint64_t seed) : capacity_(capacity), rng_(seed)
{
    if (capacity_ == 0) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
    items_.reserve(std::min<std::size_t>(capacity_, 4096));
}

void ReplayBuffer::push(TreeTransition transition)
{
    if (items_.size() < capacity_) {
        items_.push_back(std::move(transition));
        return;
    }
    items_[cursor_] = std::move(transition);
    cursor_ = (cursor_ + 1) % capacity_;
}

const TreeTransition& ReplayBuffer::at(std::size_t i) const
{
    if (i >= items_.size()) throw std::out_of_range("ReplayBuffer::at");
    return items_[(cursor_ + i) % items_.size()];
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t batch_size)
{
    if (items_.size() < batch_size || batch_size == 0) {
        throw env::UsageError("replay buffer holds " + std::to_string(items_.size()) +
                              " transitions, cannot sample " + std::to_string(batch_size));
    }
    std::vector<std::size_t> idx(batch_size);
    for (auto& i : idx) i = rng_.index(items_.size());
    return idx;
}

std::vector<const TreeTransition*> ReplayBuffer::sample(std::size_t batch_size)
{
    std::vector<const TreeTransition*> batch;
    batch.reserve(batch_size);
    for (std::size_t i : sample_indices(batch_size)) batch.push_back(&items_[i]);
    return batch;
}

nlohmann::json ReplayBuffer::to_json() const
{
    nlohmann::json items = nlohmann::json::array();
    for (const auto& t : items_) items.push_back(transition_to_json(t));
    return {{"capacity", capacity_}, {"cursor", cursor_}, {"rng", rng_.state()}, {"items", items}};
}

ReplayBuffer ReplayBuffer::from_json(const nlohmann::json& j)
{
    ReplayBuffer buf(j.at("capacity").get<std::size_t>(), 0);
    buf.cursor_ = j.at("cursor").get<std::size_t>();
    buf.rng_.set_state(j.at("rng").get<std::string>());
    for (const auto& t : j.at("items")) buf.items_.push_back(transition_from_json(t));
    if (buf.items_.size() > buf.capacity_ || (buf.cursor_ != 0 && buf.cursor_ >= buf.items_.size())) {
        throw std::invalid_argument("replay checkpoint: inconsistent cursor or size");
    }
    return buf;
}

// ---------------------------------------------------------------------------
// SacAgent

SacAgent::SacAgent(std::size_t observation_size, std::size_t action_size, AgentConfig config,
                   std::uint64_t seed)
    : obs_size_(observation_size),
      action_size_(action_size),
      config_(std::move(config)),
      log_alpha_(0.0),
      replay_(config_.replay_capacity, splitmix(seed ^ 0x5EEDULL)),
      rng_(splitmix(seed ^ 0xA11CEULL))
{
    config_.validate();
    actor_ = approx::init_network(layers(obs_size_, config_.hidden_sizes, 2 * action_size_), splitmix(seed + 1));
    for (int k = 0; k < 2; ++k) {
        critics_[k] = approx::init_network(layers(obs_size_ + action_size_, config_.hidden_sizes, 1),
                                           splitmix(seed + 2 + static_cast<std::uint64_t>(k)));
        targets_[k] = critics_[k];
        targets_[k].touch();
        critic_opt_[k] = approx::make_optimizer(critics_[k], {config_.learning_rate});
    }
    actor_opt_ = approx::make_optimizer(actor_, {config_.learning_rate});
    alpha_opt_.config.learning_rate = config_.learning_rate;
    log_alpha_ = std::log(config_.alpha_init);
}

double SacAgent::alpha() const
{
    return std::exp(log_alpha_);
}

Vector SacAgent::noise()
{
    Vector e(static_cast<Eigen::Index>(action_size_));
    for (Eigen::Index i = 0; i < e.size(); ++i) e[i] = rng_.normal();
    return e;
}

Matrix SacAgent::stack_states(const std::vector<const TreeTransition*>& batch) const
{
    Matrix s(static_cast<Eigen::Index>(obs_size_), static_cast<Eigen::Index>(batch.size()));
    for (std::size_t b = 0; b < batch.size(); ++b) {
        s.col(static_cast<Eigen::Index>(b)) = to_vector(batch[b]->state);
    }
    return s;
}

Matrix SacAgent::critic_input(const Matrix& states, const Matrix& actions) const
{
    Matrix x(states.rows() + actions.rows(), states.cols());
    x.topRows(states.rows()) = states;
    x.bottomRows(actions.rows()) = actions;
    return x;
}

Eigen::RowVectorXd SacAgent::critic_scale(const Matrix& states) const
{
    if (!config_.flow_scaled_critic) return Eigen::RowVectorXd::Ones(states.cols());
    return states.topRows(states.rows() - 2).colwise().sum();
}

double SacAgent::min_q(const Observation& obs, const std::vector<double>& action) const
{
    Vector x(static_cast<Eigen::Index>(obs_size_ + action_size_));
    x.head(static_cast<Eigen::Index>(obs_size_)) = to_vector(obs);
    x.tail(static_cast<Eigen::Index>(action_size_)) = to_vector(action);
    const double q0 = approx::predict(critics_[0], x)(0, 0);
    const double q1 = approx::predict(critics_[1], x)(0, 0);
    return critic_scale(x.head(static_cast<Eigen::Index>(obs_size_)))(0) * std::min(q0, q1);
}

Decision SacAgent::select_action(const Observation& obs, Mode mode)
{
    if (obs.size() != obs_size_) {
        throw approx::ShapeError("select_action: observation size mismatch");
    }
    const auto d = static_cast<Eigen::Index>(action_size_);
    Decision decision;
    if (mode == Mode::evaluate) {
        const Vector out = approx::predict(actor_, to_vector(obs));
        decision.action = to_std(out.head(d).array().tanh().matrix());
        decision.q_value = min_q(obs, decision.action);
        decision.separate = decision.q_value >= 0.0;
        return decision;
    }

    ++decisions_;
    if (decisions_ <= config_.warmup_steps) {
        decision.action.resize(action_size_);
        for (auto& a : decision.action) a = rng_.uniform(-1.0, 1.0);
        decision.q_value = min_q(obs, decision.action);
        decision.separate = true;
        decision.forced = true;
        return decision;
    }
    const Vector out = approx::predict(actor_, to_vector(obs));
    const auto sample = approx::sample_squashed_gaussian(out.head(d), out.tail(d), noise());
    decision.action = to_std(sample.action);
    decision.q_value = min_q(obs, decision.action);
    decision.separate = decision.q_value >= 0.0;
    const bool coin = rng_.uniform01() < config_.forced_separate_prob;
    if (!decision.separate && coin) {
        decision.separate = true;
        decision.forced = true;
    }
    return decision;
}

std::vector<double> SacAgent::compute_target(const std::vector<const TreeTransition*>& batch)
{
    std::vector<double> y(batch.size());
    // gather present branches
    std::vector<std::size_t> owner;
    std::vector<const Observation*> next;
    for (std::size_t b = 0; b < batch.size(); ++b) {
        y[b] = batch[b]->reward;
        if (batch[b]->tops_next) {
            owner.push_back(b);
            next.push_back(&*batch[b]->tops_next);
        }
        if (batch[b]->bottoms_next) {
            owner.push_back(b);
            next.push_back(&*batch[b]->bottoms_next);
        }
    }
    if (next.empty()) return y;

    const auto d = static_cast<Eigen::Index>(action_size_);
    const auto m = static_cast<Eigen::Index>(next.size());
    Matrix states(static_cast<Eigen::Index>(obs_size_), m);
    for (Eigen::Index c = 0; c < m; ++c) states.col(c) = to_vector(*next[static_cast<std::size_t>(c)]);

    const Matrix policy = approx::predict(actor_, states);
    Matrix actions(d, m);
    Vector log_prob(m);
    for (Eigen::Index c = 0; c < m; ++c) {
        const auto s = approx::sample_squashed_gaussian(policy.col(c).head(d), policy.col(c).tail(d), noise());
        actions.col(c) = s.action;
        log_prob[c] = s.log_prob;
    }
    const Matrix x = critic_input(states, actions);
    const Matrix q0 = approx::predict(targets_[0], x);
    const Matrix q1 = approx::predict(targets_[1], x);
    const Eigen::RowVectorXd scale = critic_scale(states);
    const double a = alpha();
    for (Eigen::Index c = 0; c < m; ++c) {
        const double soft_value = scale[c] * std::min(q0(0, c), q1(0, c)) - a * log_prob[c];
        y[owner[static_cast<std::size_t>(c)]] += config_.gamma * std::max(0.0, soft_value);
    }
    return y;
}

double SacAgent::update_critics(const std::vector<const TreeTransition*>& batch,
                                const std::vector<double>& targets)
{
    if (batch.empty() || targets.size() != batch.size()) {
        throw std::invalid_argument("update_critics: batch and target sizes differ");
    }
    const auto n = static_cast<Eigen::Index>(batch.size());
    Matrix actions(static_cast<Eigen::Index>(action_size_), n);
    for (Eigen::Index b = 0; b < n; ++b) actions.col(b) = to_vector(batch[static_cast<std::size_t>(b)]->action);
    const Matrix states = stack_states(batch);
    const Matrix x = critic_input(states, actions);
    const Eigen::Map<const Eigen::RowVectorXd> y(targets.data(), n);
    const Eigen::RowVectorXd scale = critic_scale(states);

    approx::ForwardResult fwd[2] = {approx::forward(critics_[0], x), approx::forward(critics_[1], x)};
    double loss = 0.0;
    Matrix residual[2];
    for (int k = 0; k < 2; ++k) {
        residual[k] = fwd[k].output.cwiseProduct(scale) - y;
        loss += 0.5 * residual[k].squaredNorm() / static_cast<double>(n);
    }
    loss *= 0.5;
    if (!std::isfinite(loss)) {
        ++skipped_updates_;
        return std::numeric_limits<double>::quiet_NaN();
    }
    for (int k = 0; k < 2; ++k) {
        const auto g = approx::gradient(critics_[k], fwd[k].cache,
                                        residual[k].cwiseProduct(scale) / static_cast<double>(n));
        if (!approx::adam_step(critics_[k], g.params, critic_opt_[k])) ++skipped_updates_;
    }
    return loss;
}

double SacAgent::update_actor(const std::vector<const TreeTransition*>& batch)
{
    if (batch.empty()) throw std::invalid_argument("update_actor: empty batch");
    const auto n = static_cast<Eigen::Index>(batch.size());
    const auto d = static_cast<Eigen::Index>(action_size_);
    const Matrix states = stack_states(batch);
    approx::ForwardResult policy = approx::forward(actor_, states);

    std::vector<approx::SquashedSample> samples;
    samples.reserve(static_cast<std::size_t>(n));
    Matrix actions(d, n);
    for (Eigen::Index b = 0; b < n; ++b) {
        samples.push_back(approx::sample_squashed_gaussian(policy.output.col(b).head(d),
                                                           policy.output.col(b).tail(d), noise()));
        actions.col(b) = samples.back().action;
    }

    // Q(s, a) and dQ/da per sample
    Vector q(n);
    Matrix dq_da(d, n);
    if (critic_override_) {
        for (Eigen::Index b = 0; b < n; ++b) {
            Vector grad(d);
            q[b] = critic_override_(states.col(b), actions.col(b), grad);
            dq_da.col(b) = grad;
        }
    } else {
        const Matrix x = critic_input(states, actions);
        const Eigen::RowVectorXd scale = critic_scale(states);
        approx::ForwardResult fwd[2] = {approx::forward(critics_[0], x), approx::forward(critics_[1], x)};
        Matrix select[2] = {Matrix::Zero(1, n), Matrix::Zero(1, n)};
        for (Eigen::Index b = 0; b < n; ++b) {
            const int k = fwd[0].output(0, b) <= fwd[1].output(0, b) ? 0 : 1;
            q[b] = scale[b] * fwd[k].output(0, b);
            select[k](0, b) = scale[b];
        }
        dq_da.setZero();
        for (int k = 0; k < 2; ++k) {
            const auto g = approx::gradient(critics_[k], fwd[k].cache, select[k]);
            dq_da += g.input.bottomRows(d);
        }
    }

    const double a = alpha();
    double loss = 0.0;
    Matrix cotangent(2 * d, n);
    for (Eigen::Index b = 0; b < n; ++b) {
        const auto& s = samples[static_cast<std::size_t>(b)];
        loss += a * s.log_prob - q[b];
        const Vector dq = dq_da.col(b);
        cotangent.col(b).head(d) =
            (a * s.dlogp_dmean - dq.cwiseProduct(s.daction_dmean)) / static_cast<double>(n);
        cotangent.col(b).tail(d) =
            (a * s.dlogp_dlogstd - dq.cwiseProduct(s.daction_dlogstd)) / static_cast<double>(n);
    }
    loss /= static_cast<double>(n);
    if (!std::isfinite(loss)) {
        ++skipped_updates_;
        return std::numeric_limits<double>::quiet_NaN();
    }
    const auto g = approx::gradient(actor_, policy.cache, cotangent);
    if (!approx::adam_step(actor_, g.params, actor_opt_)) ++skipped_updates_;
    return loss;
}

double SacAgent::update_temperature(const std::vector<const TreeTransition*>& batch)
{
    if (!config_.auto_alpha || batch.empty()) return alpha();
    const auto d = static_cast<Eigen::Index>(action_size_);
    const Matrix policy = approx::predict(actor_, stack_states(batch));
    double mean = 0.0;
    for (Eigen::Index b = 0; b < policy.cols(); ++b) {
        const auto s = approx::sample_squashed_gaussian(policy.col(b).head(d), policy.col(b).tail(d), noise());
        mean += s.log_prob + config_.target_entropy;
    }
    mean /= static_cast<double>(policy.cols());
    // loss = -log_alpha * mean(log pi + target_entropy)
    if (!alpha_opt_.update(log_alpha_, -mean)) ++skipped_updates_;
    return alpha();
}

void SacAgent::update_targets()
{
    for (int k = 0; k < 2; ++k) approx::soft_update(targets_[k], critics_[k], config_.tau);
}

UpdateStats SacAgent::update(const std::vector<const TreeTransition*>& batch)
{
    UpdateStats stats;
    const auto skipped_before = skipped_updates_;
    const std::vector<double> y = compute_target(batch);
    stats.critic_loss = update_critics(batch, y);
    stats.actor_loss = update_actor(batch);
    stats.alpha = update_temperature(batch);
    update_targets();
    stats.skipped = skipped_updates_ != skipped_before;
    return stats;
}

nlohmann::json SacAgent::checkpoint() const
{
    return {{"format", "distill-gym-agent"},
            {"version", 1},
            {"observation_size", obs_size_},
            {"action_size", action_size_},
            {"config", to_json(config_)},
            {"actor", approx::to_json(actor_)},
            {"critics", {approx::to_json(critics_[0]), approx::to_json(critics_[1])}},
            {"targets", {approx::to_json(targets_[0]), approx::to_json(targets_[1])}},
            {"actor_optimizer", approx::to_json(actor_opt_)},
            {"critic_optimizers", {approx::to_json(critic_opt_[0]), approx::to_json(critic_opt_[1])}},
            {"alpha_optimizer", scalar_adam_to_json(alpha_opt_)},
            {"log_alpha", log_alpha_},
            {"rng", rng_.state()},
            {"decisions", decisions_},
            {"skipped_updates", skipped_updates_},
            {"replay", replay_.to_json()}};
}

SacAgent SacAgent::from_checkpoint(const nlohmann::json& j)
{
    if (j.value("format", "") != "distill-gym-agent" || j.value("version", 0) != 1) {
        throw std::invalid_argument("not a version-1 agent checkpoint");
    }
    const AgentConfig config = apply_overrides(AgentConfig{}, j.at("config"));
    SacAgent agent(j.at("observation_size").get<std::size_t>(), j.at("action_size").get<std::size_t>(),
                   config, 0);
    agent.actor_ = approx::net_from_json(j.at("actor"));
    for (int k = 0; k < 2; ++k) {
        agent.critics_[k] = approx::net_from_json(j.at("critics").at(k));
        agent.targets_[k] = approx::net_from_json(j.at("targets").at(k));
        agent.critic_opt_[k] = approx::optimizer_from_json(j.at("critic_optimizers").at(k));
        if (!agent.critics_[k].congruent(agent.critic_opt_[k].first_moment)) {
            throw approx::ShapeError("agent checkpoint: critic optimizer shape mismatch");
        }
    }
    agent.actor_opt_ = approx::optimizer_from_json(j.at("actor_optimizer"));
    agent.alpha_opt_ = scalar_adam_from_json(j.at("alpha_optimizer"));
    agent.log_alpha_ = j.at("log_alpha").get<double>();
    agent.rng_.set_state(j.at("rng").get<std::string>());
    agent.decisions_ = j.at("decisions").get<std::int64_t>();
    agent.skipped_updates_ = j.at("skipped_updates").get<std::int64_t>();
    agent.replay_ = ReplayBuffer::from_json(j.at("replay"));
    if (agent.actor_.input_size() != static_cast<int>(agent.obs_size_) ||
        agent.actor_.output_size() != static_cast<int>(2 * agent.action_size_) ||
        agent.critics_[0].input_size() != static_cast<int>(agent.obs_size_ + agent.action_size_)) {
        throw approx::ShapeError("agent checkpoint: network shapes do not match the stated dimensions");
    }
    return agent;
}

// ---------------------------------------------------------------------------
// Training

nlohmann::json TrainingState::to_json() const
{
    nlohmann::json j{{"episodes_done", episodes_done},
                     {"steps", steps},
                     {"updates", updates},
                     {"best_episode", best_episode},
                     {"seed", seed}};
    j["best_return"] = std::isfinite(best_return) ? nlohmann::json(best_return) : nlohmann::json(nullptr);
    j["best_flowsheet"] = best_flowsheet
        ? nlohmann::json::parse(env::export_flowsheet(*best_flowsheet, env::ExportFormat::json))
        : nlohmann::json(nullptr);
    return j;
}

TrainingState TrainingState::from_json(const nlohmann::json& j)
{
    TrainingState s;
    s.episodes_done = j.at("episodes_done").get<int>();
    s.steps = j.at("steps").get<std::int64_t>();
    s.updates = j.at("updates").get<std::int64_t>();
    s.best_episode = j.at("best_episode").get<int>();
    s.seed = j.at("seed").get<std::uint64_t>();
    if (!j.at("best_return").is_null()) s.best_return = j.at("best_return").get<double>();
    if (!j.at("best_flowsheet").is_null()) {
        s.best_flowsheet = env::parse_flowsheet_json(j.at("best_flowsheet").dump());
    }
    return s;
}

RunSummary train(env::TreeEnv& environment, SacAgent& agent, TrainingState& state, int episodes,
                 const TrainingSinks& sinks)
{
    RunSummary summary;
    const auto batch_size = static_cast<std::size_t>(agent.config().batch_size);
    const auto skipped_before = agent.skipped_updates();

    for (int e = 0; e < episodes; ++e) {
        const auto started = std::chrono::steady_clock::now();
        const int episode = state.episodes_done + 1;
        environment.reset(state.seed + static_cast<std::uint64_t>(episode));

        while (!environment.done()) {
            const Observation obs = environment.current_observation();
            const Decision decision = agent.select_action(obs, Mode::explore);
            ++state.steps;
            if (!decision.separate) {
                environment.step_decline();
                continue;
            }
            const env::StepOutcome outcome = environment.step_separate(decision.action);
            TreeTransition t;
            t.state = obs;
            t.action = decision.action;
            t.reward = outcome.reward;
            if (!outcome.tops.terminal()) t.tops_next = outcome.tops.observation;
            if (!outcome.bottoms.terminal()) t.bottoms_next = outcome.bottoms.observation;
            agent.replay().push(std::move(t));

            if (agent.replay().size() >= batch_size) {
                for (int u = 0; u < agent.config().updates_per_step; ++u) {
                    agent.update(agent.replay().sample(batch_size));
                    ++state.updates;
                }
            }
        }

        const env::EpisodeStats stats = environment.stats();
        state.episodes_done = episode;
        TrainingLogRow row;
        row.episode = episode;
        row.steps = stats.steps;
        row.columns_placed = stats.columns_placed;
        row.failures = stats.failures;
        row.episode_return = stats.episode_return;
        row.revenue = stats.revenue;
        row.tac = stats.tac;
        row.alpha = agent.alpha();
        const bool improved = stats.episode_return > state.best_return;
        if (improved) {
            state.best_return = stats.episode_return;
            state.best_episode = episode;
            if (const env::Flowsheet* fs = environment.flowsheet()) state.best_flowsheet = *fs;
        }
        row.best_return_so_far = state.best_return;
        row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();

        summary.returns.push_back(stats.episode_return);
        if (sinks.on_episode) sinks.on_episode(row);
        if (improved && sinks.on_best && state.best_flowsheet) sinks.on_best(*state.best_flowsheet, row);
        if (sinks.after_episode) sinks.after_episode(state);
    }

    summary.episodes = static_cast<int>(summary.returns.size());
    summary.steps = state.steps;
    summary.updates = state.updates;
    summary.skipped_updates = agent.skipped_updates() - skipped_before;
    summary.best_return = state.best_return;
    summary.best_episode = state.best_episode;
    return summary;
}

EpisodeResult run_episode(env::TreeEnv& environment, SacAgent& agent, std::uint64_t seed)
{
    EpisodeResult result;
    environment.reset(seed);
    while (!environment.done()) {
        const Decision decision = agent.select_action(environment.current_observation(), Mode::evaluate);
        result.decisions.push_back(decision);
        if (decision.separate) {
            environment.step_separate(decision.action);
        } else {
            environment.step_decline();
        }
    }
    result.stats = environment.stats();
    return result;
}

}  // namespace distill::agent
