#include "distill/env.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace distill::env {

namespace {

std::string join_problems(const std::vector<std::string>& problems)
{
    std::string text = "invalid problem:";
    for (const auto& p : problems) {
        text += "\n  " + p;
    }
    return text;
}

}  // namespace

ValidationError::ValidationError(std::vector<std::string> problems)
    : std::invalid_argument(join_problems(problems)), problems_(std::move(problems))
{
}

void ProblemSpec::validate() const
{
    std::vector<std::string> problems;
    auto check = [&problems](bool ok, std::string what) {
        if (!ok) problems.push_back(std::move(what));
    };

    check(!components.empty(), "components: at least one component required");
    for (std::size_t i = 0; i < components.size(); ++i) {
        try {
            components[i].validate();
        } catch (const std::exception& e) {
            problems.push_back("components[" + std::to_string(i) + "]: " + e.what());
        }
    }
    check(feed.flows.size() == components.size(), "feed.flows: length must match components");
    for (std::size_t i = 0; i < feed.flows.size(); ++i) {
        check(feed.flows[i] >= 0.0 && std::isfinite(feed.flows[i]),
              "feed.flows[" + std::to_string(i) + "]: must be finite and non-negative");
    }
    check(feed.total_flow() > 0.0, "feed.flows: total flow must be positive");
    check(feed.temperature > 0.0, "feed.temperature: must be positive");
    check(feed.pressure > 0.0, "feed.pressure: must be positive");
    try {
        pricing.validate(components.size());
    } catch (const std::exception& e) {
        problems.push_back(e.what());
    }
    try {
        economics.validate();
    } catch (const std::exception& e) {
        problems.push_back(e.what());
    }
    const ActionBounds& b = action_bounds;
    check(b.pressure_min > 0.0 && b.pressure_min <= b.pressure_max,
          "action_bounds: need 0 < pressure_min <= pressure_max");
    check(b.stages_min >= 3, "action_bounds.stages_min: must be at least 3");
    check(b.stages_min <= b.stages_max, "action_bounds: stages_min must not exceed stages_max");
    check(b.ratio_min > 0.0 && b.ratio_min <= b.ratio_max,
          "action_bounds: need 0 < ratio_min <= ratio_max");
    check(max_columns >= 1, "env.max_columns: must be at least 1");
    check(fail_penalty >= 0.0 && std::isfinite(fail_penalty), "env.fail_penalty: must be non-negative");
    check(reward_scale > 0.0 && std::isfinite(reward_scale), "env.reward_scale: must be positive");

    if (!problems.empty()) {
        throw ValidationError(std::move(problems));
    }
}

std::vector<std::string> ProblemSpec::component_names() const
{
    std::vector<std::string> names;
    names.reserve(components.size());
    for (const auto& c : components) names.push_back(c.name);
    return names;
}

const char* to_string(BranchKind kind)
{
    switch (kind) {
    case BranchKind::open: return "open";
    case BranchKind::product: return "product";
    case BranchKind::outlet: return "outlet";
    case BranchKind::negligible: return "negligible";
    }
    return "outlet";
}

BranchKind branch_kind_from_string(const std::string& text)
{
    if (text == "open") return BranchKind::open;
    if (text == "product") return BranchKind::product;
    if (text == "outlet") return BranchKind::outlet;
    if (text == "negligible") return BranchKind::negligible;
    throw std::invalid_argument("unknown stream label '" + text + "'");
}

Observation encode_state(const thermo::Stream& stream, const ProblemSpec& problem)
{
    const double feed_total = problem.feed.total_flow();
    Observation obs;
    obs.reserve(stream.flows.size() + 2);
    for (double f : stream.flows) obs.push_back(f / feed_total);
    obs.push_back((stream.temperature - problem.feed.temperature) / 100.0);
    obs.push_back(std::log(stream.pressure / problem.feed.pressure));
    return obs;
}

column::ColumnSpec decode_action(std::span<const double> action, const ActionBounds& bounds)
{
    if (action.size() != kActionSize) {
        throw std::invalid_argument("decode_action: expected a 4-component action");
    }
    auto unit = [&](std::size_t i) { return (std::clamp(action[i], -1.0, 1.0) + 1.0) / 2.0; };
    auto log_map = [](double lo, double hi, double t) {
        if (t <= 0.0) return lo;
        if (t >= 1.0) return hi;
        return lo * std::pow(hi / lo, t);
    };
    column::ColumnSpec spec;
    spec.pressure = log_map(bounds.pressure_min, bounds.pressure_max, unit(0));
    spec.n_stages = static_cast<int>(
        std::lround(bounds.stages_min + unit(1) * (bounds.stages_max - bounds.stages_min)));
    spec.reflux_ratio = log_map(bounds.ratio_min, bounds.ratio_max, unit(2));
    spec.boilup_ratio = log_map(bounds.ratio_min, bounds.ratio_max, unit(3));
    return spec;
}

// ---------------------------------------------------------------------------

int Flowsheet::column_count() const
{
    return static_cast<int>(std::count_if(nodes.begin(), nodes.end(),
                                          [](const FlowsheetNode& n) { return n.is_column; }));
}

double Flowsheet::subtree_value(int node) const
{
    const FlowsheetNode& n = nodes.at(static_cast<std::size_t>(node));
    double value = n.reward;
    if (n.is_column) {
        value += subtree_value(n.tops) + subtree_value(n.bottoms);
    }
    return value;
}

// ---------------------------------------------------------------------------

DistillationEnv::DistillationEnv(ProblemSpec problem) : problem_(std::move(problem))
{
    problem_.validate();
}

Observation DistillationEnv::reset(std::uint64_t seed)
{
    problem_.validate();
    seed_ = seed;
    started_ = true;
    done_ = false;
    stats_ = {};
    open_.clear();

    flowsheet_ = {};
    flowsheet_.component_names = problem_.component_names();
    flowsheet_.feed = problem_.feed;
    FlowsheetNode root;
    root.id = 0;
    root.stream = problem_.feed;
    root.label = BranchKind::open;
    flowsheet_.nodes.push_back(root);
    open_.push_back(0);
    return encode_state(problem_.feed, problem_);
}

Observation DistillationEnv::current_observation() const
{
    if (open_.empty()) {
        throw UsageError("current_observation: no open stream");
    }
    return encode_state(flowsheet_.nodes[static_cast<std::size_t>(open_.front())].stream, problem_);
}

int DistillationEnv::pop_front()
{
    if (!started_) throw UsageError("environment stepped before reset");
    if (done_ || open_.empty()) throw UsageError("environment stepped after the episode finished");
    const int id = open_.front();
    open_.pop_front();
    ++stats_.steps;
    return id;
}

Branch DistillationEnv::attach_branch(int parent, const thermo::Stream& stream, double revenue,
                                      BranchKind kind)
{
    FlowsheetNode leaf;
    leaf.id = static_cast<int>(flowsheet_.nodes.size());
    leaf.parent = parent;
    leaf.stream = stream;
    leaf.label = kind;
    leaf.revenue = revenue;
    flowsheet_.nodes.push_back(leaf);

    Branch branch;
    branch.kind = kind;
    if (kind == BranchKind::open) {
        open_.push_back(leaf.id);
        branch.observation = encode_state(stream, problem_);
    }
    return branch;
}

void DistillationEnv::finish_if_needed()
{
    if (stats_.columns_placed >= problem_.max_columns) {
        for (int id : open_) {
            flowsheet_.nodes[static_cast<std::size_t>(id)].label = BranchKind::outlet;
        }
        open_.clear();
    }
    if (open_.empty()) {
        done_ = true;
        flowsheet_.finished = true;
        flowsheet_.episode_return = stats_.episode_return;
        flowsheet_.total_revenue = stats_.revenue;
        flowsheet_.total_tac = stats_.tac;
    }
}

StepOutcome DistillationEnv::step_decline()
{
    const int id = pop_front();
    flowsheet_.nodes[static_cast<std::size_t>(id)].label = BranchKind::outlet;
    StepOutcome out;
    out.reward = 0.0;
    finish_if_needed();
    out.episode_done = done_;
    return out;
}

StepOutcome DistillationEnv::step_separate(std::span<const double> action)
{
    const column::ColumnSpec spec = decode_action(action, problem_.action_bounds);
    const int id = pop_front();
    const thermo::Stream inlet = flowsheet_.nodes[static_cast<std::size_t>(id)].stream;

    std::string failure;
    column::ColumnResult result;
    ColumnRecord record;
    record.spec = spec;
    try {
        result = column::solve_column(problem_.components, inlet, spec);
        if (!result.converged) {
            failure = result.failure.empty() ? "column did not converge" : result.failure;
        } else {
            const auto size = economics::size_column(problem_.components, result, spec, problem_.economics);
            const economics::CostBasis basis{size.diameter,        size.height,
                                             spec.n_stages,        result.condenser_duty,
                                             result.reboiler_duty, result.distillate.temperature};
            record.tac = economics::cost_breakdown(basis, problem_.economics).tac;
            record.diameter = size.diameter;
            record.height = size.height;
        }
    } catch (const std::exception& e) {
        failure = e.what();
    }

    StepOutcome out;
    if (!failure.empty()) {
        FlowsheetNode& node = flowsheet_.nodes[static_cast<std::size_t>(id)];
        node.label = BranchKind::outlet;
        node.failure = failure;
        node.reward = -problem_.fail_penalty;
        out.reward = node.reward;
        out.failure = true;
        ++stats_.failures;
        stats_.episode_return += out.reward;
        finish_if_needed();
        out.episode_done = done_;
        return out;
    }

    record.condenser_duty = result.condenser_duty;
    record.reboiler_duty = result.reboiler_duty;
    record.condenser_temperature = result.distillate.temperature;
    record.reboiler_temperature = result.bottoms.temperature;
    record.iterations = result.iterations;

    const double negligible = kNegligibleFraction * problem_.feed.total_flow();
    auto classify = [&](const thermo::Stream& s, double& revenue) {
        revenue = 0.0;
        if (s.total_flow() < negligible) return BranchKind::negligible;
        if (economics::meets_purity(s, problem_.pricing)) {
            revenue = economics::stream_revenue(problem_.components, s, problem_.pricing,
                                                problem_.economics);
            return BranchKind::product;
        }
        return BranchKind::open;
    };
    double rev_tops = 0.0;
    double rev_bottoms = 0.0;
    const BranchKind kind_tops = classify(result.distillate, rev_tops);
    const BranchKind kind_bottoms = classify(result.bottoms, rev_bottoms);

    out.reward = economics::step_reward(record.tac, rev_tops, rev_bottoms, problem_.reward_scale);
    {
        FlowsheetNode& node = flowsheet_.nodes[static_cast<std::size_t>(id)];
        node.is_column = true;
        node.column = record;
        node.reward = out.reward;
    }
    out.tops = attach_branch(id, result.distillate, rev_tops, kind_tops);
    flowsheet_.nodes[static_cast<std::size_t>(id)].tops = static_cast<int>(flowsheet_.nodes.size()) - 1;
    out.bottoms = attach_branch(id, result.bottoms, rev_bottoms, kind_bottoms);
    flowsheet_.nodes[static_cast<std::size_t>(id)].bottoms = static_cast<int>(flowsheet_.nodes.size()) - 1;

    ++stats_.columns_placed;
    stats_.episode_return += out.reward;
    stats_.revenue += rev_tops + rev_bottoms;
    stats_.tac += record.tac;

    finish_if_needed();
    // open branches cut off by the column limit end as outlets
    for (Branch* b : {&out.tops, &out.bottoms}) {
        if (done_ && b->kind == BranchKind::open) {
            b->kind = BranchKind::outlet;
            b->observation.clear();
        }
    }
    out.episode_done = done_;
    return out;
}

}  // namespace distill::env
