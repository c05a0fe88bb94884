#include <iostream>

#include <CLI11.hpp>

#include "distill/cli.hpp"

namespace cli = distill::cli;

int main(int argc, char** argv)
{
    CLI::App app{"Tree-structured reinforcement learning for distillation train synthesis"};
    app.set_version_flag("--version", cli::version_string());
    app.require_subcommand(1);

    cli::TrainOptions train;
    std::string overrides_text;
    std::string resume;
    auto* train_cmd = app.add_subcommand("train", "train an agent on a problem");
    train_cmd->add_option("--problem", train.problem, "problem JSON file")->required();
    train_cmd->add_option("--out", train.out, "output directory")->required();
    train_cmd->add_option("--seed,--seeds", train.seeds, "one or more run seeds")->delimiter(',');
    train_cmd->add_option("--episodes", train.episodes, "total episodes per seed");
    train_cmd->add_option("--checkpoint-every", train.checkpoint_every, "checkpoint cadence in episodes (0: final only)");
    train_cmd->add_option("--log-every", train.log_every, "progress line cadence in episodes");
    train_cmd->add_option("--resume", resume, "checkpoint.json to continue from");
    train_cmd->add_option("--agent", overrides_text, "JSON object of agent overrides, e.g. '{\"batch_size\":64}'");

    cli::EvaluateOptions evaluate;
    std::string eval_problem;
    std::string eval_out;
    auto* eval_cmd = app.add_subcommand("evaluate", "run one deterministic episode from a checkpoint");
    eval_cmd->add_option("--checkpoint", evaluate.checkpoint, "checkpoint.json")->required();
    eval_cmd->add_option("--problem", eval_problem, "problem JSON (defaults to the one stored in the checkpoint)");
    eval_cmd->add_option("--out", eval_out, "report JSON path");
    eval_cmd->add_option("--seed", evaluate.seed, "episode seed");

    cli::SimulateOptions simulate;
    auto* sim_cmd = app.add_subcommand("simulate", "solve one column on the problem feed");
    sim_cmd->add_option("--problem", simulate.problem, "problem JSON file")->required();
    sim_cmd->add_option("--pressure-atm", simulate.pressure_atm, "column pressure, atm")->required();
    sim_cmd->add_option("--stages", simulate.stages, "internal trays")->required();
    sim_cmd->add_option("--reflux", simulate.reflux, "reflux ratio L/D")->required();
    sim_cmd->add_option("--boilup", simulate.boilup, "boilup ratio V'/B")->required();
    sim_cmd->add_option("--max-sweeps", simulate.max_sweeps, "sweep limit of the column solver");
    sim_cmd->add_flag("--json", simulate.json, "print a JSON document instead of the table");

    cli::ExportOptions exporting;
    std::string export_out;
    auto* export_cmd = app.add_subcommand("export-bfd", "convert a flowsheet JSON to DOT");
    export_cmd->add_option("flowsheet", exporting.flowsheet, "flowsheet JSON")->required();
    export_cmd->add_option("--out", export_out, "DOT output path (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    if (*train_cmd) {
        if (!resume.empty()) train.resume = resume;
        if (!overrides_text.empty()) {
            try {
                train.agent_overrides = nlohmann::json::parse(overrides_text);
            } catch (const nlohmann::json::exception& e) {
                std::cerr << "error: --agent: " << e.what() << "\n";
                return 1;
            }
        }
        return cli::cmd_train(train, std::cout, std::cerr);
    }
    if (*eval_cmd) {
        if (!eval_problem.empty()) evaluate.problem = eval_problem;
        if (!eval_out.empty()) evaluate.out = eval_out;
        return cli::cmd_evaluate(evaluate, std::cout, std::cerr);
    }
    if (*sim_cmd) return cli::cmd_simulate(simulate, std::cout, std::cerr);
    if (!export_out.empty()) exporting.out = export_out;
    return cli::cmd_export_bfd(exporting, std::cout, std::cerr);
}
