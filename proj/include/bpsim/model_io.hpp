#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "bpsim/model.hpp"

namespace bpsim {

namespace detail {

inline const char* node_type_name(NodeType t) {
    switch (t) {
    case NodeType::Start: return "start";
    case NodeType::ActivityNode: return "activity";
    case NodeType::XorSplit: return "xor";
    case NodeType::AndSplit: return "and_split";
    case NodeType::AndJoin: return "and_join";
    case NodeType::End: return "end";
    }
    return "?";
}

} // namespace detail

/// Parses the scenario file format. See README for the schema; briefly:
/// sections `activities`, `resources`, `eligibility`, `service_means`,
/// `routing` (typed nodes, edges implied by `to` fields) and `arrivals`
/// (`constant` rate or `pattern` with a piecewise-linear curve).
inline ProcessModel load_model(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(e.what());
    }

    ProcessModel m;
    try {
        m.name = doc.value("name", "unnamed");
        if (!doc.contains("activities") || !doc.contains("resources") ||
            !doc.contains("eligibility") || !doc.contains("service_means") ||
            !doc.contains("routing") || !doc.contains("arrivals"))
            throw ParseError("missing one of the required sections: activities, resources, "
                             "eligibility, service_means, routing, arrivals");

        int idx = 1;
        for (const auto& a : doc["activities"]) m.activities.push_back({a.get<std::string>(), idx++});
        idx = 1;
        for (const auto& r : doc["resources"]) m.resources.push_back({r.get<std::string>(), idx++});

        m.eligible.resize(m.activities.size());
        for (const auto& [act, rlist] : doc["eligibility"].items()) {
            int a = m.activity_pos(act);
            if (a < 0) throw ParseError("eligibility references unknown activity " + act);
            for (const auto& r : rlist) {
                int rp = m.resource_pos(r.get<std::string>());
                if (rp < 0) throw ParseError("eligibility references unknown resource " +
                                             r.get<std::string>());
                m.eligible[a].push_back(rp);
            }
        }

        m.service_mean.assign(m.resources.size(),
                              std::vector<double>(m.activities.size(),
                                                  std::numeric_limits<double>::quiet_NaN()));
        for (const auto& row : doc["service_means"]) {
            int r = m.resource_pos(row.at("resource").get<std::string>());
            int a = m.activity_pos(row.at("activity").get<std::string>());
            if (r < 0 || a < 0) throw ParseError("service_means row references unknown ids");
            m.service_mean[r][a] = row.at("mean").get<double>();
        }

        // first pass creates the nodes, second wires the edges by id
        for (const auto& n : doc["routing"]) {
            RoutingNode node;
            std::string type = n.at("type").get<std::string>();
            node.id = n.at("id").get<std::string>();
            if (type == "start") node.type = NodeType::Start;
            else if (type == "activity") node.type = NodeType::ActivityNode;
            else if (type == "xor") node.type = NodeType::XorSplit;
            else if (type == "and_split") node.type = NodeType::AndSplit;
            else if (type == "and_join") node.type = NodeType::AndJoin;
            else if (type == "end") node.type = NodeType::End;
            else throw ParseError("unknown routing node type: " + type);
            if (node.type == NodeType::ActivityNode) {
                node.activity = m.activity_pos(node.id);
                if (node.activity < 0)
                    throw ParseError("routing activity node " + node.id +
                                     " is not a declared activity");
            }
            m.routing.nodes.push_back(std::move(node));
        }
        std::size_t i = 0;
        for (const auto& n : doc["routing"]) {
            auto& node = m.routing.nodes[i++];
            auto resolve = [&m](const std::string& id) {
                int p = m.routing.node_index(id);
                if (p < 0) throw ParseError("routing edge to unknown node " + id);
                return p;
            };
            if (node.type == NodeType::XorSplit) {
                for (const auto& b : n.at("branches")) {
                    node.next.push_back(resolve(b.at("to").get<std::string>()));
                    node.prob.push_back(b.at("p").get<double>());
                }
            } else if (n.contains("to")) {
                if (n["to"].is_array())
                    for (const auto& t : n["to"]) node.next.push_back(resolve(t.get<std::string>()));
                else
                    node.next.push_back(resolve(n["to"].get<std::string>()));
            }
        }

        const auto& arr = doc["arrivals"];
        if (arr.contains("constant")) {
            m.arrivals = ArrivalSpec::constant(arr["constant"].get<double>());
        } else if (arr.contains("pattern")) {
            const auto& p = arr["pattern"];
            PatternArrivals pa;
            pa.period = p.at("period").get<double>();
            pa.lambda_max = p.at("lambda_max").get<double>();
            pa.mean_rate = p.at("mean_rate").get<double>();
            for (const auto& knot : p.at("curve"))
                pa.curve.emplace_back(knot.at(0).get<double>(), knot.at(1).get<double>());
            m.arrivals = ArrivalSpec::from_pattern(std::move(pa));
        } else {
            throw ParseError("arrivals must be either {constant: rate} or {pattern: {...}}");
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(e.what());
    }

    m.finalize();
    validate_or_throw(m);
    return m;
}

inline ProcessModel load_model_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open model file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return load_model(ss.str());
}

/// Serializes a model back to the scenario file format. load_model of the
/// result reproduces an identical model.
inline std::string serialize(const ProcessModel& m) {
    nlohmann::ordered_json doc;
    doc["name"] = m.name;
    doc["activities"] = nlohmann::json::array();
    for (const auto& a : m.activities) doc["activities"].push_back(a.id);
    doc["resources"] = nlohmann::json::array();
    for (const auto& r : m.resources) doc["resources"].push_back(r.id);
    nlohmann::ordered_json elig;
    for (std::size_t a = 0; a < m.eligible.size(); ++a) {
        auto list = nlohmann::json::array();
        for (int r : m.eligible[a]) list.push_back(m.resources[r].id);
        elig[m.activities[a].id] = list;
    }
    doc["eligibility"] = std::move(elig);
    auto means = nlohmann::ordered_json::array();
    for (std::size_t a = 0; a < m.eligible.size(); ++a)
        for (int r : m.eligible[a])
            means.push_back({{"resource", m.resources[r].id},
                             {"activity", m.activities[a].id},
                             {"mean", m.service_mean[r][a]}});
    doc["service_means"] = std::move(means);

    auto routing = nlohmann::ordered_json::array();
    for (const auto& n : m.routing.nodes) {
        nlohmann::ordered_json jn;
        jn["type"] = detail::node_type_name(n.type);
        jn["id"] = n.id;
        if (n.type == NodeType::XorSplit) {
            auto branches = nlohmann::json::array();
            for (std::size_t b = 0; b < n.next.size(); ++b)
                branches.push_back({{"to", m.routing.nodes[n.next[b]].id}, {"p", n.prob[b]}});
            jn["branches"] = std::move(branches);
        } else if (!n.next.empty()) {
            if (n.next.size() == 1) {
                jn["to"] = m.routing.nodes[n.next[0]].id;
            } else {
                auto to = nlohmann::json::array();
                for (int s : n.next) to.push_back(m.routing.nodes[s].id);
                jn["to"] = std::move(to);
            }
        }
        routing.push_back(std::move(jn));
    }
    doc["routing"] = std::move(routing);

    if (m.arrivals.kind == ArrivalSpec::Kind::Constant) {
        doc["arrivals"] = {{"constant", m.arrivals.rate}};
    } else {
        const auto& p = m.arrivals.pattern;
        auto curve = nlohmann::json::array();
        for (const auto& [phase, rate] : p.curve) curve.push_back({phase, rate});
        doc["arrivals"] = {{"pattern",
                            {{"period", p.period},
                             {"lambda_max", p.lambda_max},
                             {"mean_rate", p.mean_rate},
                             {"curve", curve}}}};
    }
    return doc.dump(2) + "\n";
}

} // namespace bpsim
