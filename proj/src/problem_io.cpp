#include <cmath>
#include <fstream>
#include <set>

#include "distill/cli.hpp"

#ifndef DISTILL_VERSION
#define DISTILL_VERSION "unknown"
#endif

namespace distill::cli {

namespace {

using nlohmann::json;

// Reads typed fields out of one JSON object, recording problems by path
// instead of stopping at the first one.
class Reader {
public:
    Reader(const json& node, std::string path, std::vector<std::string>& problems)
        : node_(node), path_(std::move(path)), problems_(problems)
    {
        if (!node_.is_object()) {
            problems_.push_back(path_ + ": must be an object");
        }
    }

    bool ok() const { return node_.is_object(); }

    template <typename T>
    void required(const char* key, T& target)
    {
        seen_.insert(key);
        if (!ok()) return;
        if (!node_.contains(key)) {
            problems_.push_back(field(key) + ": missing");
            return;
        }
        read(key, target);
    }

    template <typename T>
    void optional(const char* key, T& target)
    {
        seen_.insert(key);
        if (ok() && node_.contains(key)) read(key, target);
    }

    const json* child(const char* key, bool is_required)
    {
        seen_.insert(key);
        if (!ok()) return nullptr;
        if (!node_.contains(key)) {
            if (is_required) problems_.push_back(field(key) + ": missing");
            return nullptr;
        }
        return &node_.at(key);
    }

    void reject_unknown()
    {
        if (!ok()) return;
        for (const auto& [key, value] : node_.items()) {
            if (!seen_.contains(key)) problems_.push_back(field(key) + ": unknown key");
        }
    }

    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

private:
    template <typename T>
    void read(const char* key, T& target)
    {
        try {
            target = node_.at(key).get<T>();
        } catch (const json::exception&) {
            problems_.push_back(field(key) + ": wrong type");
        }
    }

    const json& node_;
    std::string path_;
    std::vector<std::string>& problems_;
    std::set<std::string, std::less<>> seen_;
};

void check(bool ok, std::vector<std::string>& problems, std::string message)
{
    if (!ok) problems.push_back(std::move(message));
}

}  // namespace

ProblemConfig parse_config(const json& doc)
{
    std::vector<std::string> problems;
    ProblemConfig cfg;
    cfg.source = doc;
    env::ProblemSpec& p = cfg.problem;

    Reader root(doc, "", problems);
    root.optional("name", p.name);

    if (const json* comps = root.child("components", true)) {
        if (!comps->is_array() || comps->empty()) {
            problems.emplace_back("components: must be a nonempty array");
        } else {
            for (std::size_t i = 0; i < comps->size(); ++i) {
                const std::string path = "components[" + std::to_string(i) + "]";
                Reader r((*comps)[i], path, problems);
                thermo::Component c;
                r.required("name", c.name);
                r.required("antoine_a", c.antoine_a);
                r.required("antoine_b", c.antoine_b);
                r.required("antoine_c", c.antoine_c);
                r.required("t_valid_min", c.t_valid_min);
                r.required("t_valid_max", c.t_valid_max);
                r.required("molar_mass", c.molar_mass);
                r.required("latent_heat", c.latent_heat);
                r.required("liquid_density", c.liquid_density);
                r.reject_unknown();
                check(c.antoine_b > 0.0, problems, path + ".antoine_b: must be positive");
                check(c.t_valid_min < c.t_valid_max, problems, path + ".t_valid_min: must be below t_valid_max");
                check(c.molar_mass > 0.0, problems, path + ".molar_mass: must be positive");
                check(c.latent_heat > 0.0, problems, path + ".latent_heat: must be positive");
                check(c.liquid_density > 0.0, problems, path + ".liquid_density: must be positive");
                p.components.push_back(c);
            }
        }
    }
    const std::size_t nc = p.components.size();

    if (const json* feed = root.child("feed", true)) {
        Reader r(*feed, "feed", problems);
        r.required("flows", p.feed.flows);
        r.required("temperature", p.feed.temperature);
        r.required("pressure", p.feed.pressure);
        r.reject_unknown();
        check(p.feed.flows.size() == nc, problems, "feed.flows: expected one flow per component");
        for (std::size_t i = 0; i < p.feed.flows.size(); ++i) {
            check(p.feed.flows[i] > 0.0, problems, "feed.flows[" + std::to_string(i) + "]: must be positive");
        }
        check(p.feed.temperature > 0.0, problems, "feed.temperature: must be positive");
        check(p.feed.pressure > 0.0, problems, "feed.pressure: must be positive");
    }

    if (const json* pricing = root.child("pricing", true)) {
        Reader r(*pricing, "pricing", problems);
        r.required("purity_spec", p.pricing.purity_spec);
        r.required("prices", p.pricing.prices);
        r.reject_unknown();
        check(p.pricing.purity_spec > 0.0 && p.pricing.purity_spec < 1.0, problems,
              "pricing.purity_spec: must lie in (0, 1)");
        check(p.pricing.prices.size() == nc, problems, "pricing.prices: expected one price per component");
        for (std::size_t i = 0; i < p.pricing.prices.size(); ++i) {
            check(p.pricing.prices[i] >= 0.0, problems,
                  "pricing.prices[" + std::to_string(i) + "]: must be non-negative");
        }
    }

    if (const json* eco = root.child("economics", false)) {
        Reader r(*eco, "economics", problems);
        economics::EconomicParams& e = p.economics;
        r.optional("annual_hours", e.annual_hours);
        r.optional("payback_years", e.payback_years);
        r.optional("heating_cost", e.heating_cost);
        r.optional("cooling_cost", e.cooling_cost);
        r.optional("souders_brown_c", e.souders_brown_c);
        r.optional("tray_spacing", e.tray_spacing);
        r.optional("height_allowance", e.height_allowance);
        r.optional("condenser_u", e.condenser_u);
        r.optional("reboiler_u", e.reboiler_u);
        r.optional("cooling_water_in", e.cooling_water_in);
        r.optional("cooling_water_out", e.cooling_water_out);
        r.optional("reboiler_approach", e.reboiler_approach);
        r.optional("shell_coeff", e.shell_coeff);
        r.optional("shell_diameter_exp", e.shell_diameter_exp);
        r.optional("shell_height_exp", e.shell_height_exp);
        r.optional("tray_coeff", e.tray_coeff);
        r.optional("tray_diameter_exp", e.tray_diameter_exp);
        r.optional("hx_coeff", e.hx_coeff);
        r.optional("hx_area_exp", e.hx_area_exp);
        r.reject_unknown();
    }

    if (const json* bounds = root.child("action_bounds", false)) {
        Reader r(*bounds, "action_bounds", problems);
        env::ActionBounds& b = p.action_bounds;
        r.optional("pressure_min", b.pressure_min);
        r.optional("pressure_max", b.pressure_max);
        r.optional("stages_min", b.stages_min);
        r.optional("stages_max", b.stages_max);
        r.optional("ratio_min", b.ratio_min);
        r.optional("ratio_max", b.ratio_max);
        r.reject_unknown();
    }

    if (const json* env_section = root.child("env", false)) {
        Reader r(*env_section, "env", problems);
        r.optional("max_columns", p.max_columns);
        r.optional("fail_penalty", p.fail_penalty);
        r.optional("reward_scale", p.reward_scale);
        r.reject_unknown();
    }

    const json* agent_section = root.child("agent", false);
    root.reject_unknown();

    if (!problems.empty()) throw env::ValidationError(std::move(problems));
    p.validate();
    if (agent_section) {
        cfg.agent = agent::apply_overrides(cfg.agent, *agent_section);
    }
    return cfg;
}

ProblemConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open problem file " + path.string());
    }
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw env::ValidationError({path.string() + ": malformed JSON: " + e.what()});
    }
    return parse_config(doc);
}

env::ProblemSpec load_problem(const std::filesystem::path& path)
{
    return load_config(path).problem;
}

json problem_to_json(const env::ProblemSpec& p)
{
    json comps = json::array();
    for (const auto& c : p.components) {
        comps.push_back({{"name", c.name},
                         {"antoine_a", c.antoine_a},
                         {"antoine_b", c.antoine_b},
                         {"antoine_c", c.antoine_c},
                         {"t_valid_min", c.t_valid_min},
                         {"t_valid_max", c.t_valid_max},
                         {"molar_mass", c.molar_mass},
                         {"latent_heat", c.latent_heat},
                         {"liquid_density", c.liquid_density}});
    }
    const auto& e = p.economics;
    const auto& b = p.action_bounds;
    return {{"name", p.name},
            {"components", comps},
            {"feed", {{"flows", p.feed.flows}, {"temperature", p.feed.temperature}, {"pressure", p.feed.pressure}}},
            {"pricing", {{"purity_spec", p.pricing.purity_spec}, {"prices", p.pricing.prices}}},
            {"economics",
             {{"annual_hours", e.annual_hours},
              {"payback_years", e.payback_years},
              {"heating_cost", e.heating_cost},
              {"cooling_cost", e.cooling_cost},
              {"souders_brown_c", e.souders_brown_c},
              {"tray_spacing", e.tray_spacing},
              {"height_allowance", e.height_allowance},
              {"condenser_u", e.condenser_u},
              {"reboiler_u", e.reboiler_u},
              {"cooling_water_in", e.cooling_water_in},
              {"cooling_water_out", e.cooling_water_out},
              {"reboiler_approach", e.reboiler_approach},
              {"shell_coeff", e.shell_coeff},
              {"shell_diameter_exp", e.shell_diameter_exp},
              {"shell_height_exp", e.shell_height_exp},
              {"tray_coeff", e.tray_coeff},
              {"tray_diameter_exp", e.tray_diameter_exp},
              {"hx_coeff", e.hx_coeff},
              {"hx_area_exp", e.hx_area_exp}}},
            {"action_bounds",
             {{"pressure_min", b.pressure_min},
              {"pressure_max", b.pressure_max},
              {"stages_min", b.stages_min},
              {"stages_max", b.stages_max},
              {"ratio_min", b.ratio_min},
              {"ratio_max", b.ratio_max}}},
            {"env", {{"max_columns", p.max_columns}, {"fail_penalty", p.fail_penalty}, {"reward_scale", p.reward_scale}}}};
}

std::string version_string()
{
    return std::string("distill_gym ") + DISTILL_VERSION;
}

}  // namespace distill::cli
