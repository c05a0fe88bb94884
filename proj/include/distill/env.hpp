#pragma once

// Tree-structured distillation-train environment. Each separation pops the
// stream at the front of the open-stream deque and may append the column's
// distillate and bottoms to the back.

#include <cstdint>
#include <deque>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "distill/column.hpp"
#include "distill/economics.hpp"
#include "distill/thermo.hpp"

namespace distill::env {

class ValidationError : public std::invalid_argument {
public:
    explicit ValidationError(std::vector<std::string> problems);
    const std::vector<std::string>& problems() const { return problems_; }

private:
    std::vector<std::string> problems_;
};

class UsageError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

using Observation = std::vector<double>;

inline constexpr std::size_t kActionSize = 4;

struct ActionBounds {
    double pressure_min = 0.3 * thermo::kAtmosphere;  // Pa
    double pressure_max = 40.0 * thermo::kAtmosphere;
    int stages_min = 5;
    int stages_max = 60;
    double ratio_min = 0.1;
    double ratio_max = 20.0;
};

struct ProblemSpec {
    std::string name;
    std::vector<thermo::Component> components;
    thermo::Stream feed;
    economics::ProductPricing pricing;
    economics::EconomicParams economics;
    ActionBounds action_bounds;
    int max_columns = 12;
    double fail_penalty = 0.1;
    double reward_scale = 1.0e7;  // $/yr

    /// Collects every violated invariant; throws ValidationError if any.
    void validate() const;
    std::vector<std::string> component_names() const;
};

enum class BranchKind { open, product, outlet, negligible };

const char* to_string(BranchKind kind);
BranchKind branch_kind_from_string(const std::string& text);

struct Branch {
    BranchKind kind = BranchKind::outlet;
    Observation observation;  // empty unless kind == open

    bool terminal() const { return kind != BranchKind::open; }
};

struct StepOutcome {
    double reward = 0.0;
    Branch tops;
    Branch bottoms;
    bool episode_done = false;
    bool failure = false;
};

/// Negligible-stream threshold as a fraction of the feed's total flow.
inline constexpr double kNegligibleFraction = 1e-6;

// ---------------------------------------------------------------------------
// Flowsheet record

struct ColumnRecord {
    column::ColumnSpec spec;
    double diameter = 0.0;
    double height = 0.0;
    double condenser_duty = 0.0;
    double reboiler_duty = 0.0;
    double condenser_temperature = 0.0;
    double reboiler_temperature = 0.0;
    double tac = 0.0;
    int iterations = 0;
};

struct FlowsheetNode {
    int id = 0;
    int parent = -1;
    bool is_column = false;
    thermo::Stream stream;  // column inlet, or the leaf stream
    BranchKind label = BranchKind::open;  // leaves only
    ColumnRecord column;                  // columns only
    int tops = -1;
    int bottoms = -1;
    double reward = 0.0;   // reward credited at this node
    double revenue = 0.0;  // product leaves
    std::string failure;   // simulator failure that turned this stream into an outlet
};

struct Flowsheet {
    std::vector<std::string> component_names;
    thermo::Stream feed;
    std::vector<FlowsheetNode> nodes;  // nodes[0] holds the feed
    double episode_return = 0.0;
    double total_revenue = 0.0;
    double total_tac = 0.0;
    bool finished = false;

    int column_count() const;
    /// Sum of node rewards over the subtree rooted at `node` (gamma = 1).
    double subtree_value(int node) const;
};

enum class ExportFormat { json, dot };

std::string export_flowsheet(const Flowsheet& flowsheet, ExportFormat format);
/// Parses the JSON form produced by export_flowsheet.
Flowsheet parse_flowsheet_json(const std::string& text);

// ---------------------------------------------------------------------------
// Environments

struct EpisodeStats {
    int steps = 0;
    int columns_placed = 0;
    int failures = 0;
    double episode_return = 0.0;
    double revenue = 0.0;  // $/yr
    double tac = 0.0;      // $/yr
};

/// Interface the agent trains against.
class TreeEnv {
public:
    virtual ~TreeEnv() = default;

    virtual std::size_t observation_size() const = 0;
    virtual Observation reset(std::uint64_t seed) = 0;
    virtual StepOutcome step_separate(std::span<const double> action) = 0;
    virtual StepOutcome step_decline() = 0;
    virtual bool done() const = 0;
    /// Observation of the stream at the front of the deque.
    virtual Observation current_observation() const = 0;
    virtual EpisodeStats stats() const = 0;
    /// Finished-episode flowsheet, if the environment records one.
    virtual const Flowsheet* flowsheet() const { return nullptr; }
};

Observation encode_state(const thermo::Stream& stream, const ProblemSpec& problem);

column::ColumnSpec decode_action(std::span<const double> action, const ActionBounds& bounds);

class DistillationEnv final : public TreeEnv {
public:
    explicit DistillationEnv(ProblemSpec problem);

    std::size_t observation_size() const override { return problem_.components.size() + 2; }
    Observation reset(std::uint64_t seed) override;
    StepOutcome step_separate(std::span<const double> action) override;
    StepOutcome step_decline() override;
    bool done() const override { return done_; }
    Observation current_observation() const override;
    EpisodeStats stats() const override { return stats_; }
    const Flowsheet* flowsheet() const override { return &flowsheet_; }

    const ProblemSpec& problem() const { return problem_; }
    std::size_t open_streams() const { return open_.size(); }
    std::uint64_t seed() const { return seed_; }

private:
    int pop_front();
    void finish_if_needed();
    Branch attach_branch(int parent, const thermo::Stream& stream, double revenue, BranchKind kind);

    ProblemSpec problem_;
    Flowsheet flowsheet_;
    std::deque<int> open_;
    EpisodeStats stats_;
    std::uint64_t seed_ = 0;
    bool started_ = false;
    bool done_ = true;
};

}  // namespace distill::env
