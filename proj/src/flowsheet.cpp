#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "distill/env.hpp"

namespace distill::env {

namespace {

using ojson = nlohmann::ordered_json;

ojson stream_to_json(const thermo::Stream& s)
{
    return ojson{{"flows", s.flows}, {"temperature", s.temperature}, {"pressure", s.pressure}};
}

thermo::Stream stream_from_json(const ojson& j)
{
    thermo::Stream s;
    s.flows = j.at("flows").get<std::vector<double>>();
    s.temperature = j.at("temperature").get<double>();
    s.pressure = j.at("pressure").get<double>();
    return s;
}

ojson node_to_json(const FlowsheetNode& n)
{
    ojson j;
    j["id"] = n.id;
    j["parent"] = n.parent;
    j["type"] = n.is_column ? "column" : "leaf";
    j["stream"] = stream_to_json(n.stream);
    j["reward"] = n.reward;
    if (n.is_column) {
        const ColumnRecord& c = n.column;
        j["column"] = ojson{{"pressure", c.spec.pressure},
                            {"n_stages", c.spec.n_stages},
                            {"reflux_ratio", c.spec.reflux_ratio},
                            {"boilup_ratio", c.spec.boilup_ratio},
                            {"diameter", c.diameter},
                            {"height", c.height},
                            {"condenser_duty", c.condenser_duty},
                            {"reboiler_duty", c.reboiler_duty},
                            {"condenser_temperature", c.condenser_temperature},
                            {"reboiler_temperature", c.reboiler_temperature},
                            {"tac", c.tac},
                            {"iterations", c.iterations}};
        j["tops"] = n.tops;
        j["bottoms"] = n.bottoms;
    } else {
        j["label"] = to_string(n.label);
        j["revenue"] = n.revenue;
        if (!n.failure.empty()) j["failure"] = n.failure;
    }
    return j;
}

FlowsheetNode node_from_json(const ojson& j)
{
    FlowsheetNode n;
    n.id = j.at("id").get<int>();
    n.parent = j.at("parent").get<int>();
    const auto type = j.at("type").get<std::string>();
    if (type != "column" && type != "leaf") {
        throw std::invalid_argument("flowsheet node " + std::to_string(n.id) + ": unknown type '" + type + "'");
    }
    n.is_column = type == "column";
    n.stream = stream_from_json(j.at("stream"));
    n.reward = j.at("reward").get<double>();
    if (n.is_column) {
        const ojson& c = j.at("column");
        n.column.spec.pressure = c.at("pressure").get<double>();
        n.column.spec.n_stages = c.at("n_stages").get<int>();
        n.column.spec.reflux_ratio = c.at("reflux_ratio").get<double>();
        n.column.spec.boilup_ratio = c.at("boilup_ratio").get<double>();
        n.column.diameter = c.at("diameter").get<double>();
        n.column.height = c.at("height").get<double>();
        n.column.condenser_duty = c.at("condenser_duty").get<double>();
        n.column.reboiler_duty = c.at("reboiler_duty").get<double>();
        n.column.condenser_temperature = c.at("condenser_temperature").get<double>();
        n.column.reboiler_temperature = c.at("reboiler_temperature").get<double>();
        n.column.tac = c.at("tac").get<double>();
        n.column.iterations = c.at("iterations").get<int>();
        n.tops = j.at("tops").get<int>();
        n.bottoms = j.at("bottoms").get<int>();
    } else {
        n.label = branch_kind_from_string(j.at("label").get<std::string>());
        n.revenue = j.at("revenue").get<double>();
        if (j.contains("failure")) n.failure = j.at("failure").get<std::string>();
    }
    return n;
}

std::string fmt(const char* pattern, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, pattern, v);
    return buf;
}

std::string leaf_label(const Flowsheet& fs, const FlowsheetNode& n)
{
    const double total = n.stream.total_flow();
    std::string text = to_string(n.label);
    if (total > 0.0) {
        std::size_t major = 0;
        for (std::size_t i = 1; i < n.stream.flows.size(); ++i) {
            if (n.stream.flows[i] > n.stream.flows[major]) major = i;
        }
        const std::string name = major < fs.component_names.size() ? fs.component_names[major]
                                                                   : "c" + std::to_string(major);
        text += "\\n" + name + " " + fmt("%.1f", 100.0 * n.stream.flows[major] / total) + "%";
    }
    text += "\\n" + fmt("%.4g", total) + " mol/s";
    if (!n.failure.empty()) text += "\\n(simulation failed)";
    return text;
}

}  // namespace

std::string export_flowsheet(const Flowsheet& fs, ExportFormat format)
{
    if (!fs.finished) {
        throw UsageError("export_flowsheet: episode has not finished");
    }
    if (format == ExportFormat::json) {
        ojson j;
        j["components"] = fs.component_names;
        j["feed"] = stream_to_json(fs.feed);
        j["episode_return"] = fs.episode_return;
        j["total_revenue"] = fs.total_revenue;
        j["total_tac"] = fs.total_tac;
        j["finished"] = fs.finished;
        ojson nodes = ojson::array();
        for (const auto& n : fs.nodes) nodes.push_back(node_to_json(n));
        j["nodes"] = std::move(nodes);
        return j.dump(2) + "\n";
    }

    std::ostringstream dot;
    dot << "digraph flowsheet {\n";
    dot << "  rankdir=LR;\n";
    dot << "  feed [shape=plaintext, label=\"feed\\n" << fmt("%.4g", fs.feed.total_flow())
        << " mol/s\"];\n";
    int column_index = 0;
    for (const auto& n : fs.nodes) {
        dot << "  n" << n.id << " [";
        if (n.is_column) {
            const auto& s = n.column.spec;
            dot << "shape=box, label=\"COL " << ++column_index << " | "
                << fmt("%.3g", s.pressure / thermo::kAtmosphere) << " atm | " << s.n_stages << " | "
                << fmt("%.3g", s.reflux_ratio) << " | " << fmt("%.3g", s.boilup_ratio) << "\"";
        } else {
            dot << "shape=ellipse, label=\"" << leaf_label(fs, n) << "\"";
        }
        dot << "];\n";
    }
    if (!fs.nodes.empty()) dot << "  feed -> n0;\n";
    for (const auto& n : fs.nodes) {
        if (n.is_column) {
            dot << "  n" << n.id << " -> n" << n.tops << " [label=\"tops\"];\n";
            dot << "  n" << n.id << " -> n" << n.bottoms << " [label=\"bottoms\"];\n";
        }
    }
    dot << "}\n";
    return dot.str();
}

Flowsheet parse_flowsheet_json(const std::string& text)
{
    const ojson j = ojson::parse(text);
    Flowsheet fs;
    fs.component_names = j.at("components").get<std::vector<std::string>>();
    fs.feed = stream_from_json(j.at("feed"));
    fs.episode_return = j.at("episode_return").get<double>();
    fs.total_revenue = j.at("total_revenue").get<double>();
    fs.total_tac = j.at("total_tac").get<double>();
    fs.finished = j.at("finished").get<bool>();
    for (const auto& node : j.at("nodes")) {
        fs.nodes.push_back(node_from_json(node));
    }
    for (std::size_t i = 0; i < fs.nodes.size(); ++i) {
        const auto& n = fs.nodes[i];
        if (n.id != static_cast<int>(i)) {
            throw std::invalid_argument("flowsheet: node ids must be consecutive from 0");
        }
        if (n.is_column) {
            const int count = static_cast<int>(fs.nodes.size());
            if (n.tops <= n.id || n.tops >= count || n.bottoms <= n.id || n.bottoms >= count) {
                throw std::invalid_argument("flowsheet: column " + std::to_string(n.id) +
                                            " has invalid children");
            }
        }
    }
    return fs;
}

}  // namespace distill::env
