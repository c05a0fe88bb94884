#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include "distill/cli.hpp"
#include "support.hpp"

using namespace distill;
using namespace distill::cli;
using testing_support::problem_path;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name)
{
    const fs::path dir = fs::temp_directory_path() / ("distill_cli_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void write(const fs::path& p, const std::string& text)
{
    std::ofstream(p, std::ios::binary) << text;
}

nlohmann::json btx_doc()
{
    return nlohmann::json::parse(slurp(problem_path("btx.json")));
}

std::vector<std::string> lines(const std::string& text)
{
    std::vector<std::string> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) out.push_back(line);
    return out;
}

// Drops the trailing wall_ms field of every data row.
std::string without_wall_ms(const std::string& csv)
{
    std::string out;
    for (const auto& line : lines(csv)) out += line.substr(0, line.rfind(',')) + "\n";
    return out;
}

std::vector<std::string> split(const std::string& row)
{
    std::vector<std::string> out;
    std::stringstream in(row);
    std::string cell;
    while (std::getline(in, cell, ',')) out.push_back(cell);
    return out;
}

int train(const fs::path& out, int episodes, std::uint64_t seed, std::optional<fs::path> resume = std::nullopt,
          int checkpoint_every = 0)
{
    TrainOptions o;
    o.problem = problem_path("btx.json");
    o.out = out;
    o.seeds = {seed};
    o.episodes = episodes;
    o.resume = resume;
    o.checkpoint_every = checkpoint_every;
    // small networks and a short warmup so a few episodes already exercise updates
    o.agent_overrides = {{"warmup_steps", 10}, {"batch_size", 8}, {"hidden_sizes", {32, 32}}};
    std::ostringstream sout, serr;
    const int code = cmd_train(o, sout, serr);
    INFO(serr.str());
    return code;
}

int run_exe(const std::string& args, std::string* output = nullptr)
{
    const std::string cmd = std::string(DISTILL_GYM_EXE) + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::string text;
    char buffer[4096];
    while (std::fgets(buffer, sizeof buffer, pipe)) text += buffer;
    const int status = pclose(pipe);
    if (output) *output = text;
    return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("bundled problems")
{
    const auto btx = load_problem(problem_path("btx.json"));
    REQUIRE(btx.components.size() == 3);
    CHECK(btx.feed.flows == std::vector<double>{3.35, 3.35, 3.35});
    CHECK(btx.feed.temperature == 298.15);
    CHECK(btx.feed.pressure == 101325.0);
    CHECK(btx.pricing.purity_spec == 0.95);
    CHECK(btx.pricing.prices == std::vector<double>{488.0, 488.0, 510.0});
    CHECK(btx.components[0].name == "benzene");
    CHECK(btx.components[2].name == "p-xylene");

    const auto hc = load_problem(problem_path("hydrocarbon.json"));
    REQUIRE(hc.components.size() == 6);
    CHECK(hc.feed.flows == std::vector<double>{17, 1110, 1198, 516, 334, 173});
    CHECK(hc.feed.temperature == 378.15);
    CHECK(hc.feed.pressure == doctest::Approx(17.4 * 101325.0));
    CHECK(hc.pricing.prices == std::vector<double>{125, 204, 272, 249, 545, 545});
    CHECK(hc.pricing.purity_spec == 0.95);
}

TEST_CASE("configuration errors name the offending field")
{
    auto expect_problem = [](const nlohmann::json& doc, const std::string& needle) {
        try {
            parse_config(doc);
            FAIL("expected a validation error mentioning " << needle);
        } catch (const env::ValidationError& e) {
            bool found = false;
            for (const auto& p : e.problems()) found = found || p.find(needle) != std::string::npos;
            CHECK_MESSAGE(found, needle);
        }
    };
    auto doc = btx_doc();
    doc["pricing"]["prices"] = {488.0, 488.0};
    expect_problem(doc, "prices");

    doc = btx_doc();
    doc["feed"]["colour"] = "blue";
    expect_problem(doc, "colour");

    doc = btx_doc();
    doc["feed"]["flows"] = {3.35, -1.0, 3.35};
    expect_problem(doc, "flows");

    doc = btx_doc();
    doc.erase("pricing");
    expect_problem(doc, "pricing");

    doc = btx_doc();
    doc["agent"] = {{"batch_sise", 3}};
    expect_problem(doc, "batch_sise");

    doc = btx_doc();
    doc["env"]["max_columns"] = 0;
    expect_problem(doc, "max_columns");

    // round trip through the serializer
    const auto parsed = parse_config(btx_doc());
    auto again = problem_to_json(parsed.problem);
    CHECK(parse_config(again).problem.feed.flows == parsed.problem.feed.flows);
    CHECK_THROWS(load_config("/nonexistent/problem.json"));
}

TEST_CASE("training writes its artifacts and is reproducible")
{
    const fs::path a = scratch("train_a"), b = scratch("train_b");
    REQUIRE(train(a, 10, 7) == 0);
    REQUIRE(train(b, 10, 7) == 0);
    for (const char* f : {"train_log.csv", "best.json", "best.dot", "run_meta.json", "checkpoint.json"}) {
        CHECK_MESSAGE(fs::exists(a / f), f);
    }
    const std::string log = slurp(a / "train_log.csv");
    const auto rows = lines(log);
    REQUIRE(rows.size() == 11);
    CHECK(rows[0] == "episode,steps,columns_placed,failures,return,revenue_usd_per_yr,tac_usd_per_yr,"
                     "best_return_so_far,alpha,wall_ms");
    double best = -1e300;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto cells = split(rows[i]);
        REQUIRE(cells.size() == 10);
        CHECK(std::stoi(cells[0]) == int(i));
        const double b_so_far = std::stod(cells[7]);
        CHECK(b_so_far >= best);
        best = b_so_far;
    }
    CHECK(without_wall_ms(log) == without_wall_ms(slurp(b / "train_log.csv")));
    CHECK(slurp(a / "best.json") == slurp(b / "best.json"));
    CHECK(slurp(a / "best.dot") == slurp(b / "best.dot"));

    const auto meta = nlohmann::json::parse(slurp(a / "run_meta.json"));
    CHECK(meta.at("seed") == 7);
    CHECK(meta.at("episodes") == 10);
    CHECK(meta.at("version").get<std::string>() == version_string());
    CHECK(meta.at("problem").at("feed").at("flows").size() == 3);
    CHECK(meta.at("agent").at("warmup_steps") == 10);
    const auto ckpt = nlohmann::json::parse(slurp(a / "checkpoint.json"));
    CHECK(ckpt.at("training").at("updates").get<long>() > 0);

    const fs::path c = scratch("train_c");
    REQUIRE(train(c, 10, 8) == 0);
    CHECK(without_wall_ms(slurp(c / "train_log.csv")) != without_wall_ms(log));
}

TEST_CASE("resumed training continues where it stopped")
{
    const fs::path whole = scratch("resume_whole"), split_dir = scratch("resume_split");
    REQUIRE(train(whole, 10, 3) == 0);
    REQUIRE(train(split_dir, 5, 3, std::nullopt, 5) == 0);
    CHECK(fs::exists(split_dir / "checkpoints" / "checkpoint_5.json"));
    REQUIRE(train(split_dir, 10, 3, split_dir / "checkpoint.json") == 0);
    CHECK(without_wall_ms(slurp(split_dir / "train_log.csv")) == without_wall_ms(slurp(whole / "train_log.csv")));
    CHECK(slurp(split_dir / "best.json") == slurp(whole / "best.json"));
    CHECK(slurp(split_dir / "checkpoint.json") == slurp(whole / "checkpoint.json"));
}

TEST_CASE("several seeds get their own directories")
{
    const fs::path dir = scratch("multi");
    TrainOptions o;
    o.problem = problem_path("btx.json");
    o.out = dir;
    o.seeds = {1, 2};
    o.episodes = 2;
    std::ostringstream sout, serr;
    REQUIRE(cmd_train(o, sout, serr) == 0);
    CHECK(fs::exists(dir / "seed_1" / "train_log.csv"));
    CHECK(fs::exists(dir / "seed_2" / "best.json"));
}

TEST_CASE("train exit codes")
{
    const fs::path dir = scratch("codes");
    const fs::path bad = dir / "bad.json";
    auto doc = btx_doc();
    doc["pricing"]["prices"] = {1.0};
    write(bad, doc.dump());
    TrainOptions o;
    o.problem = bad;
    o.out = dir / "run";
    o.episodes = 1;
    std::ostringstream sout, serr;
    CHECK(cmd_train(o, sout, serr) == 1);
    CHECK(serr.str().find("prices") != std::string::npos);

    o.problem = problem_path("btx.json");
    write(dir / "blocker", "x");
    o.out = dir / "blocker" / "run";
    CHECK(cmd_train(o, sout, serr) == 2);
}

TEST_CASE("evaluation reports")
{
    const fs::path dir = scratch("evaluate");
    REQUIRE(train(dir, 3, 5) == 0);
    EvaluateOptions o;
    o.checkpoint = dir / "checkpoint.json";
    o.out = dir / "report.json";
    std::ostringstream s1, s2, err;
    REQUIRE(cmd_evaluate(o, s1, err) == 0);
    const std::string first = slurp(dir / "report.json");
    REQUIRE(cmd_evaluate(o, s2, err) == 0);
    CHECK(slurp(dir / "report.json") == first);
    CHECK(s1.str() == s2.str());

    const auto report = nlohmann::json::parse(first);
    for (const auto& p : report.at("products")) {
        const double r = p.at("recovery").get<double>();
        CHECK(r >= 0.0);
        CHECK(r <= 1.0 + 1e-12);
        if (p.at("is_product").get<bool>()) CHECK(p.at("purity").get<double>() >= 0.95);
    }

    // a checkpoint cannot drive a problem with another component count
    o.problem = problem_path("hydrocarbon.json");
    CHECK(cmd_evaluate(o, s1, err) == 1);
}

TEST_CASE("flowsheet evaluation arithmetic")
{
    auto p = load_problem(problem_path("btx.json"));
    p.max_columns = 2;
    env::DistillationEnv e(p);
    e.reset(0);
    // 1 atm, 30 stages, reflux 3, boilup 2 takes benzene overhead
    const double lp = 2.0 * std::log(101325.0 / 0.3 / 101325.0) / std::log(40.0 / 0.3) - 1.0;
    const double r3 = 2.0 * std::log(3.0 / 0.1) / std::log(20.0 / 0.1) - 1.0;
    const double r2 = 2.0 * std::log(2.0 / 0.1) / std::log(20.0 / 0.1) - 1.0;
    const double n30 = 2.0 * (30 - 5) / 55.0 - 1.0;
    e.step_separate(std::vector<double>{lp, n30, r3, r2});
    e.step_decline();
    REQUIRE(e.done());
    const auto report = evaluate_flowsheet(*e.flowsheet());
    REQUIRE(report.products.size() == 3);
    CHECK(report.products[0].component == "benzene");
    CHECK(report.products[0].is_product);
    CHECK(report.products[0].purity >= 0.95);
    const auto& tops = e.flowsheet()->nodes[e.flowsheet()->nodes[0].tops].stream;
    CHECK(report.products[0].recovery == doctest::Approx(tops.flows[0] / 3.35));
    CHECK_FALSE(report.products[1].is_product);
    CHECK(report.products[1].recovery == 0.0);
    CHECK(report.columns.size() == 1);
    CHECK(report.episode_return == doctest::Approx(e.stats().episode_return));
}

TEST_CASE("simulate")
{
    SimulateOptions o;
    o.problem = problem_path("btx.json");
    std::ostringstream out, err;
    REQUIRE(cmd_simulate(o, out, err) == 0);
    CHECK(out.str().find("benzene") != std::string::npos);

    o.json = true;
    std::ostringstream jout;
    REQUIRE(cmd_simulate(o, jout, err) == 0);
    const auto j = nlohmann::json::parse(jout.str());
    const auto feed = j.at("feed").get<std::vector<double>>();
    const auto dist = j.at("distillate").get<std::vector<double>>();
    const auto bott = j.at("bottoms").get<std::vector<double>>();
    REQUIRE(feed.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(dist[i] + bott[i] - feed[i]) <= 1e-8 * feed[i]);
    CHECK(j.at("converged").get<bool>());

    o.stages = 2;
    CHECK(cmd_simulate(o, out, err) == 1);
}

TEST_CASE("command-line executable")
{
    std::string text;
    CHECK(run_exe("--version", &text) == 0);
    CHECK(text.find(version_string()) != std::string::npos);
    CHECK(run_exe("simulate --problem " + problem_path("btx.json") + " --stages 2", &text) == 1);
    CHECK(run_exe("frobnicate", &text) == 1);
    CHECK(run_exe("simulate --problem " + problem_path("btx.json") +
                      " --pressure-atm 1 --stages 30 --reflux 3 --boilup 3 --json",
                  &text) == 0);
    CHECK(nlohmann::json::parse(text).at("converged").get<bool>());

    // a column with too few sweeps allowed is reported as unconverged
    CHECK(run_exe("simulate --problem " + problem_path("hydrocarbon.json") +
                      " --pressure-atm 17.4 --stages 60 --reflux 20 --boilup 20 --max-sweeps 2",
                  &text) == 3);
    CHECK(text.find("sweeps") != std::string::npos);
}

TEST_CASE("export-bfd")
{
    const fs::path dir = scratch("export");
    auto p = load_problem(problem_path("btx.json"));
    p.max_columns = 2;
    env::DistillationEnv e(p);
    e.reset(0);
    e.step_separate(std::vector<double>{-0.5, 0.0, 0.2, 0.1});
    while (!e.done()) e.step_separate(std::vector<double>{-0.2, 0.3, 0.0, 0.0});
    const std::string json_text = env::export_flowsheet(*e.flowsheet(), env::ExportFormat::json);
    write(dir / "fs.json", json_text);

    ExportOptions o;
    o.flowsheet = dir / "fs.json";
    o.out = dir / "fs.dot";
    std::ostringstream out, err;
    REQUIRE(cmd_export_bfd(o, out, err) == 0);
    const std::string dot = slurp(dir / "fs.dot");
    CHECK(dot == env::export_flowsheet(*e.flowsheet(), env::ExportFormat::dot));
    const std::regex box("shape=box");
    const auto boxes = std::distance(std::sregex_iterator(dot.begin(), dot.end(), box), std::sregex_iterator());
    CHECK(boxes == e.flowsheet()->column_count());
    CHECK(dot.rfind("digraph", 0) == 0);

    REQUIRE(cmd_export_bfd(o, out, err) == 0);
    CHECK(slurp(dir / "fs.dot") == dot);

    write(dir / "broken.json", "{\"nodes\": [");
    o.flowsheet = dir / "broken.json";
    CHECK(cmd_export_bfd(o, out, err) == 1);
}
