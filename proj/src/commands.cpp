#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "distill/cli.hpp"
#include "distill/column.hpp"
#include "distill/economics.hpp"

namespace distill::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string num(double v)
{
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, res.ptr};
}

class OutputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

void write_file(const fs::path& path, const std::string& content)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw OutputError("cannot write " + path.string());
    out << content;
    if (!out) throw OutputError("failed writing " + path.string());
}

std::string read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void ensure_directory(const fs::path& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) {
        throw OutputError("cannot create output directory " + dir.string());
    }
    const fs::path probe = dir / ".write_probe";
    {
        std::ofstream test(probe);
        if (!test) throw OutputError("output directory " + dir.string() + " is not writable");
    }
    fs::remove(probe, ec);
}

// Rows of an existing log up to and including `last_episode`.
std::string truncate_log(const fs::path& path, int last_episode)
{
    std::ifstream in(path);
    std::string kept = csv_header();
    if (!in) return kept;
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const int episode = std::atoi(line.c_str());
        if (episode >= 1 && episode <= last_episode) kept += line + "\n";
    }
    return kept;
}

unsigned worker_cap()
{
    unsigned cap = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env_threads = std::getenv("DISTILL_GYM_THREADS")) {
        const int requested = std::atoi(env_threads);
        if (requested >= 1) cap = static_cast<unsigned>(requested);
    }
    return cap;
}

struct SeedRun {
    int exit_code = 0;
    std::string message;
};

SeedRun train_one_seed(const ProblemConfig& cfg, const agent::AgentConfig& agent_cfg, std::uint64_t seed,
                       const TrainOptions& options, const fs::path& dir, std::ostream& out, std::mutex& out_mutex)
{
    ensure_directory(dir);
    env::DistillationEnv environment(cfg.problem);

    agent::TrainingState state;
    state.seed = seed;
    std::optional<agent::SacAgent> sac;
    std::string log_text = csv_header();
    if (options.resume) {
        const json bundle = json::parse(read_file(*options.resume));
        sac.emplace(agent::SacAgent::from_checkpoint(bundle.at("agent")));
        state = agent::TrainingState::from_json(bundle.at("training"));
        if (sac->observation_size() != environment.observation_size()) {
            throw env::ValidationError({"checkpoint observation size does not match the problem"});
        }
        log_text = truncate_log(dir / "train_log.csv", state.episodes_done);
    } else {
        sac.emplace(environment.observation_size(), env::kActionSize, agent_cfg, seed);
    }

    const fs::path log_path = dir / "train_log.csv";
    write_file(log_path, log_text);
    std::ofstream log(log_path, std::ios::app | std::ios::binary);
    if (!log) throw OutputError("cannot append to " + log_path.string());

    json meta{{"version", version_string()},
              {"seed", seed},
              {"episodes", options.episodes},
              {"resumed_from", options.resume ? options.resume->string() : ""},
              {"checkpoint_every", options.checkpoint_every},
              {"problem", problem_to_json(cfg.problem)},
              {"agent", agent::to_json(sac->config())}};
    write_file(dir / "run_meta.json", meta.dump(2) + "\n");

    auto save_checkpoint = [&](const agent::TrainingState& st, const fs::path& path) {
        json bundle{{"agent", sac->checkpoint()},
                    {"training", st.to_json()},
                    {"problem", problem_to_json(cfg.problem)}};
        write_file(path, bundle.dump() + "\n");
    };

    agent::TrainingSinks sinks;
    sinks.on_episode = [&](const agent::TrainingLogRow& row) {
        log << csv_row(row);
        log.flush();
        if (options.log_every > 0 && row.episode % options.log_every == 0) {
            std::lock_guard lock(out_mutex);
            out << "seed " << seed << " episode " << row.episode << " return " << row.episode_return
                << " best " << row.best_return_so_far << " alpha " << row.alpha << "\n";
        }
    };
    sinks.on_best = [&](const env::Flowsheet& flowsheet, const agent::TrainingLogRow&) {
        write_file(dir / "best.json", env::export_flowsheet(flowsheet, env::ExportFormat::json));
        write_file(dir / "best.dot", env::export_flowsheet(flowsheet, env::ExportFormat::dot));
    };
    sinks.after_episode = [&](const agent::TrainingState& st) {
        if (options.checkpoint_every > 0 && st.episodes_done % options.checkpoint_every == 0) {
            ensure_directory(dir / "checkpoints");
            save_checkpoint(st, dir / "checkpoints" / ("checkpoint_" + std::to_string(st.episodes_done) + ".json"));
        }
    };

    const int remaining = options.episodes - state.episodes_done;
    const auto summary = agent::train(environment, *sac, state, std::max(remaining, 0), sinks);
    log.close();

    if (state.best_flowsheet) {
        write_file(dir / "best.json", env::export_flowsheet(*state.best_flowsheet, env::ExportFormat::json));
        write_file(dir / "best.dot", env::export_flowsheet(*state.best_flowsheet, env::ExportFormat::dot));
    }
    save_checkpoint(state, dir / "checkpoint.json");

    std::lock_guard lock(out_mutex);
    out << "seed " << seed << ": " << state.episodes_done << " episodes, " << state.steps << " steps, "
        << state.updates << " updates, best return " << state.best_return << " (episode " << state.best_episode
        << "), skipped updates " << summary.skipped_updates << "\n";
    return {};
}

std::string column_label(int index, const env::ColumnRecord& c)
{
    std::ostringstream s;
    s << "COL " << index << ": P = " << std::setprecision(4) << c.spec.pressure / thermo::kAtmosphere
      << " atm, N = " << c.spec.n_stages << ", R = " << c.spec.reflux_ratio << ", s = " << c.spec.boilup_ratio
      << ", D = " << c.diameter << " m, TAC = " << c.tac << " $/yr";
    return s.str();
}

}  // namespace

std::string csv_header()
{
    return "episode,steps,columns_placed,failures,return,revenue_usd_per_yr,tac_usd_per_yr,"
           "best_return_so_far,alpha,wall_ms\n";
}

std::string csv_row(const agent::TrainingLogRow& r)
{
    std::ostringstream s;
    s << r.episode << ',' << r.steps << ',' << r.columns_placed << ',' << r.failures << ','
      << num(r.episode_return) << ',' << num(r.revenue) << ',' << num(r.tac) << ',' << num(r.best_return_so_far)
      << ',' << num(r.alpha) << ',' << num(std::round(r.wall_ms * 1000.0) / 1000.0) << '\n';
    return s.str();
}

int cmd_train(const TrainOptions& options, std::ostream& out, std::ostream& err)
{
    ProblemConfig cfg;
    agent::AgentConfig agent_cfg;
    try {
        cfg = load_config(options.problem);
        agent_cfg = agent::apply_overrides(cfg.agent, options.agent_overrides);
        if (options.seeds.empty()) throw env::ValidationError({"at least one seed is required"});
        if (options.episodes < 0) throw env::ValidationError({"episodes must be non-negative"});
        if (options.resume && options.seeds.size() != 1) {
            throw env::ValidationError({"--resume applies to a single seed"});
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }

    try {
        ensure_directory(options.out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }

    const bool single = options.seeds.size() == 1;
    std::vector<SeedRun> results(options.seeds.size());
    std::mutex out_mutex;
    std::size_t next = 0;
    std::mutex next_mutex;
    auto worker = [&] {
        for (;;) {
            std::size_t i;
            {
                std::lock_guard lock(next_mutex);
                if (next >= options.seeds.size()) return;
                i = next++;
            }
            const std::uint64_t seed = options.seeds[i];
            const fs::path dir = single ? options.out : options.out / ("seed_" + std::to_string(seed));
            try {
                results[i] = train_one_seed(cfg, agent_cfg, seed, options, dir, out, out_mutex);
            } catch (const OutputError& e) {
                results[i] = {2, e.what()};
            } catch (const std::exception& e) {
                results[i] = {1, e.what()};
            }
        }
    };
    const unsigned workers = std::min<unsigned>(worker_cap(), static_cast<unsigned>(options.seeds.size()));
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
    }

    int code = 0;
    for (std::size_t i = 0; i < results.size(); ++i) {
        if (results[i].exit_code != 0) {
            err << "error (seed " << options.seeds[i] << "): " << results[i].message << "\n";
            code = std::max(code, results[i].exit_code);
        }
    }
    return code;
}

EvaluationReport evaluate_flowsheet(const env::Flowsheet& fs)
{
    EvaluationReport report;
    report.episode_return = fs.episode_return;
    report.total_revenue = fs.total_revenue;
    report.total_tac = fs.total_tac;
    const std::size_t nc = fs.feed.flows.size();
    report.products.resize(nc);
    std::vector<double> recovered(nc, 0.0);
    for (std::size_t i = 0; i < nc; ++i) {
        report.products[i].component = i < fs.component_names.size() ? fs.component_names[i] : std::to_string(i);
        report.products[i].purity = 0.0;
    }
    for (const auto& node : fs.nodes) {
        if (node.is_column) {
            report.columns.push_back(node.column);
            continue;
        }
        if (node.label != env::BranchKind::product) continue;
        const auto& flows = node.stream.flows;
        const auto major = static_cast<std::size_t>(std::max_element(flows.begin(), flows.end()) - flows.begin());
        const double purity = economics::stream_purity(node.stream);
        ProductReport& p = report.products[major];
        p.purity = p.is_product ? std::min(p.purity, purity) : purity;
        p.is_product = true;
        recovered[major] += flows[major];
    }
    for (std::size_t i = 0; i < nc; ++i) {
        report.products[i].recovery = fs.feed.flows[i] > 0.0 ? recovered[i] / fs.feed.flows[i] : 0.0;
    }
    return report;
}

json EvaluationReport::to_json() const
{
    json cols = json::array();
    for (const auto& c : columns) {
        cols.push_back({{"pressure_pa", c.spec.pressure},
                        {"n_stages", c.spec.n_stages},
                        {"reflux_ratio", c.spec.reflux_ratio},
                        {"boilup_ratio", c.spec.boilup_ratio},
                        {"diameter_m", c.diameter},
                        {"tac_usd_per_yr", c.tac}});
    }
    json prods = json::array();
    for (const auto& p : products) {
        prods.push_back({{"component", p.component},
                         {"is_product", p.is_product},
                         {"purity", p.purity},
                         {"recovery", p.recovery}});
    }
    return {{"columns", cols},
            {"products", prods},
            {"episode_return", episode_return},
            {"total_revenue_usd_per_yr", total_revenue},
            {"total_tac_usd_per_yr", total_tac}};
}

int cmd_evaluate(const EvaluateOptions& options, std::ostream& out, std::ostream& err)
{
    std::optional<agent::SacAgent> sac;
    env::ProblemSpec problem;
    try {
        const json bundle = json::parse(read_file(options.checkpoint));
        sac.emplace(agent::SacAgent::from_checkpoint(bundle.at("agent")));
        problem = options.problem ? load_problem(*options.problem)
                                  : parse_config(bundle.at("problem")).problem;
        if (sac->observation_size() != problem.components.size() + 2 || sac->action_size() != env::kActionSize) {
            err << "error: checkpoint expects " << sac->observation_size() - 2
                << " components, problem has " << problem.components.size() << "\n";
            return 1;
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }

    env::DistillationEnv environment(problem);
    const auto episode = agent::run_episode(environment, *sac, options.seed);
    const EvaluationReport report = evaluate_flowsheet(*environment.flowsheet());

    int index = 0;
    for (const auto& c : report.columns) out << column_label(++index, c) << "\n";
    out << std::left << std::setw(14) << "component" << std::setw(10) << "product" << std::setw(12) << "purity"
        << "recovery\n";
    for (const auto& p : report.products) {
        out << std::left << std::setw(14) << p.component << std::setw(10) << (p.is_product ? "yes" : "no")
            << std::setw(12) << std::setprecision(4) << p.purity << p.recovery << "\n";
    }
    out << "total revenue " << std::setprecision(6) << report.total_revenue << " $/yr\n";
    out << "total TAC     " << report.total_tac << " $/yr\n";
    out << "return        " << report.episode_return << " (" << episode.stats.failures << " failures)\n";

    if (options.out) {
        try {
            json doc = report.to_json();
            doc["flowsheet"] = json::parse(env::export_flowsheet(*environment.flowsheet(), env::ExportFormat::json));
            write_file(*options.out, doc.dump(2) + "\n");
        } catch (const std::exception& e) {
            err << "error: " << e.what() << "\n";
            return 2;
        }
    }
    return 0;
}

int cmd_simulate(const SimulateOptions& options, std::ostream& out, std::ostream& err)
{
    env::ProblemSpec problem;
    column::ColumnSpec spec;
    try {
        problem = load_problem(options.problem);
        spec.pressure = options.pressure_atm * thermo::kAtmosphere;
        spec.n_stages = options.stages;
        spec.reflux_ratio = options.reflux;
        spec.boilup_ratio = options.boilup;
        spec.validate();
        if (options.max_sweeps < 1) throw env::ValidationError({"max-sweeps must be at least 1"});
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }

    column::SolverOptions solver;
    solver.max_sweeps = options.max_sweeps;
    const column::ColumnResult result = column::solve_column(problem.components, problem.feed, spec, solver);
    if (!result.converged) {
        err << "column did not converge after " << result.iterations << " sweeps (max dT "
            << result.max_temperature_change << " K)";
        if (!result.failure.empty()) err << ": " << result.failure;
        err << "\n";
        return 3;
    }

    std::optional<double> tac;
    std::string cost_note;
    try {
        tac = economics::column_tac(problem.components, result, spec, problem.economics);
    } catch (const std::exception& e) {
        cost_note = e.what();
    }

    if (options.json) {
        json doc{{"converged", result.converged},
                 {"iterations", result.iterations},
                 {"components", problem.component_names()},
                 {"feed", problem.feed.flows},
                 {"distillate", result.distillate.flows},
                 {"bottoms", result.bottoms.flows},
                 {"condenser_temperature", result.distillate.temperature},
                 {"reboiler_temperature", result.bottoms.temperature},
                 {"condenser_duty", result.condenser_duty},
                 {"reboiler_duty", result.reboiler_duty},
                 {"stage_temperatures", result.stage_temperatures}};
        doc["tac"] = tac ? json(*tac) : json(nullptr);
        out << doc.dump(2) << "\n";
        return 0;
    }

    out << "converged in " << result.iterations << " sweeps, feed liquid fraction "
        << result.feed_liquid_fraction << "\n";
    out << std::left << std::setw(14) << "component" << std::right << std::setw(16) << "feed" << std::setw(16)
        << "distillate" << std::setw(16) << "bottoms" << "\n";
    for (std::size_t i = 0; i < problem.components.size(); ++i) {
        out << std::left << std::setw(14) << problem.components[i].name << std::right << std::setprecision(8)
            << std::setw(16) << problem.feed.flows[i] << std::setw(16) << result.distillate.flows[i]
            << std::setw(16) << result.bottoms.flows[i] << "\n";
    }
    out << std::setprecision(6);
    out << "condenser " << result.distillate.temperature << " K, duty " << result.condenser_duty << " W\n";
    out << "reboiler  " << result.bottoms.temperature << " K, duty " << result.reboiler_duty << " W\n";
    if (tac) {
        out << "TAC " << *tac << " $/yr\n";
    } else {
        out << "TAC unavailable: " << cost_note << "\n";
    }
    return 0;
}

int cmd_export_bfd(const ExportOptions& options, std::ostream& out, std::ostream& err)
{
    std::string dot;
    try {
        const env::Flowsheet flowsheet = env::parse_flowsheet_json(read_file(options.flowsheet));
        dot = env::export_flowsheet(flowsheet, env::ExportFormat::dot);
    } catch (const std::exception& e) {
        err << "error: malformed flowsheet " << options.flowsheet << ": " << e.what() << "\n";
        return 1;
    }
    if (options.out) {
        try {
            write_file(*options.out, dot);
        } catch (const std::exception& e) {
            err << "error: " << e.what() << "\n";
            return 2;
        }
    } else {
        out << dot;
    }
    return 0;
}

}  // namespace distill::cli
