#pragma once

// Problem configuration files and the command implementations behind the
// distill_gym executable.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "distill/agent.hpp"
#include "distill/env.hpp"

namespace distill::cli {

struct ProblemConfig {
    env::ProblemSpec problem;
    agent::AgentConfig agent;
    nlohmann::json source;  // the document as read
};

/// Parses and validates a problem document. Unknown keys and invalid values
/// throw env::ValidationError with the JSON path of each offending field.
ProblemConfig parse_config(const nlohmann::json& doc);
ProblemConfig load_config(const std::filesystem::path& path);
env::ProblemSpec load_problem(const std::filesystem::path& path);

nlohmann::json problem_to_json(const env::ProblemSpec& problem);

/// Version string baked in at configure time.
std::string version_string();

std::string csv_header();
std::string csv_row(const agent::TrainingLogRow& row);

struct TrainOptions {
    std::filesystem::path problem;
    std::filesystem::path out;
    std::vector<std::uint64_t> seeds{0};
    int episodes = 100;
    int checkpoint_every = 0;  // 0: final checkpoint only
    int log_every = 0;         // progress line cadence on stdout; 0: silent
    std::optional<std::filesystem::path> resume;
    nlohmann::json agent_overrides = nlohmann::json::object();
};

struct EvaluateOptions {
    std::filesystem::path checkpoint;
    std::optional<std::filesystem::path> problem;  // defaults to the problem stored in the checkpoint
    std::optional<std::filesystem::path> out;      // report.json
    std::uint64_t seed = 0;
};

struct SimulateOptions {
    std::filesystem::path problem;
    double pressure_atm = 1.0;
    int stages = 30;
    double reflux = 3.0;
    double boilup = 3.0;
    int max_sweeps = 200;
    bool json = false;
};

struct ExportOptions {
    std::filesystem::path flowsheet;
    std::optional<std::filesystem::path> out;
};

int cmd_train(const TrainOptions& options, std::ostream& out, std::ostream& err);
int cmd_evaluate(const EvaluateOptions& options, std::ostream& out, std::ostream& err);
int cmd_simulate(const SimulateOptions& options, std::ostream& out, std::ostream& err);
int cmd_export_bfd(const ExportOptions& options, std::ostream& out, std::ostream& err);

/// Evaluation report for a finished flowsheet.
struct ProductReport {
    std::string component;
    double purity = 0.0;
    double recovery = 0.0;  // product flow of the component / its feed flow
    bool is_product = false;
};

struct EvaluationReport {
    std::vector<env::ColumnRecord> columns;
    std::vector<ProductReport> products;  // one per component
    double episode_return = 0.0;
    double total_revenue = 0.0;
    double total_tac = 0.0;

    nlohmann::json to_json() const;
};

EvaluationReport evaluate_flowsheet(const env::Flowsheet& flowsheet);

}  // namespace distill::cli
