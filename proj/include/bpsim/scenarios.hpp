#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "bpsim/model.hpp"

namespace bpsim {

namespace detail {

enum class Flow { Sequence, XorChoice, Parallel };

struct ScenarioDef {
    const char* name;
    std::array<const char*, 2> activities;
    std::array<const char*, 2> resources;
    // means[r][a] for the two local resources x two local activities;
    // a NaN entry marks an ineligible pair.
    std::array<std::array<double, 2>, 2> means;
    Flow flow;
};

constexpr double kNoPair = std::numeric_limits<double>::quiet_NaN();

// Calibrated service means. The shipped values keep every scenario stable at
// lambda = 0.5 under a sensible policy, drive the slow-server utilization
// above 0.95 at lambda = 0.55, and keep scenario cycle times within one order
// of magnitude so no scenario dominates the composites.
inline const std::array<ScenarioDef, 6>& scenario_defs() {
    static const std::array<ScenarioDef, 6> defs = {{
        {"low_utilization", {"A", "B"}, {"r1", "r2"},
         {{{0.8, 0.8}, {1.2, 1.2}}}, Flow::Sequence},
        {"high_utilization", {"C", "D"}, {"r3", "r4"},
         {{{1.5, 2.3}, {2.3, 1.5}}}, Flow::Sequence},
        {"slow_server", {"E", "F"}, {"r5", "r6"},
         {{{1.2, 1.2}, {1.8, 5.0}}}, Flow::Sequence},
        {"slow_downstream", {"G", "H"}, {"r7", "r8"},
         {{{1.2, 1.8}, {1.2, 1.8}}}, Flow::Sequence},
        {"n_network", {"I", "J"}, {"r9", "r10"},
         {{{kNoPair, 2.0}, {2.0, 2.0}}}, Flow::XorChoice},
        {"parallel", {"K", "L"}, {"r11", "r12"},
         {{{1.5, 1.5}, {1.5, 1.5}}}, Flow::Parallel},
    }};
    return defs;
}

// Appends the scenario's routing subgraph. Returns {entry node, exit stub
// node}: the caller wires the exit stub's `next` to whatever follows.
struct Subgraph {
    int entry;
    std::vector<int> exits; // nodes whose next must be wired to the successor
};

inline Subgraph append_subgraph(RoutingGraph& g, const ScenarioDef& def, int a0, int a1,
                                const std::string& tag) {
    auto add = [&g](RoutingNode n) {
        g.nodes.push_back(std::move(n));
        return static_cast<int>(g.nodes.size()) - 1;
    };
    Subgraph sg{-1, {}};
    switch (def.flow) {
    case Flow::Sequence: {
        int n0 = add({NodeType::ActivityNode, def.activities[0], a0, {}, {}});
        int n1 = add({NodeType::ActivityNode, def.activities[1], a1, {}, {}});
        g.nodes[n0].next = {n1};
        sg.entry = n0;
        sg.exits = {n1};
        break;
    }
    case Flow::XorChoice: {
        int x = add({NodeType::XorSplit, "xor_" + tag, -1, {}, {0.5, 0.5}});
        int n0 = add({NodeType::ActivityNode, def.activities[0], a0, {}, {}});
        int n1 = add({NodeType::ActivityNode, def.activities[1], a1, {}, {}});
        g.nodes[x].next = {n0, n1};
        sg.entry = x;
        sg.exits = {n0, n1};
        break;
    }
    case Flow::Parallel: {
        int s = add({NodeType::AndSplit, "split_" + tag, -1, {}, {}});
        int n0 = add({NodeType::ActivityNode, def.activities[0], a0, {}, {}});
        int n1 = add({NodeType::ActivityNode, def.activities[1], a1, {}, {}});
        int j = add({NodeType::AndJoin, "join_" + tag, -1, {}, {}});
        g.nodes[s].next = {n0, n1};
        g.nodes[n0].next = {j};
        g.nodes[n1].next = {j};
        sg.entry = s;
        sg.exits = {j};
        break;
    }
    }
    return sg;
}

inline void add_scenario_members(ProcessModel& m, const ScenarioDef& def) {
    int a_base = m.activity_count();
    int r_base = m.resource_count();
    for (int i = 0; i < 2; ++i)
        m.activities.push_back({def.activities[i], a_base + i + 1});
    for (int i = 0; i < 2; ++i)
        m.resources.push_back({def.resources[i], r_base + i + 1});
    m.eligible.resize(m.activities.size());
    for (auto& row : m.service_mean) row.resize(m.activities.size(), kNoPair);
    m.service_mean.resize(m.resources.size(),
                          std::vector<double>(m.activities.size(), kNoPair));
    for (int r = 0; r < 2; ++r)
        for (int a = 0; a < 2; ++a) {
            double v = def.means[r][a];
            if (std::isnan(v)) continue;
            m.eligible[a_base + a].push_back(r_base + r);
            m.service_mean[r_base + r][a_base + a] = v;
        }
}

inline const ScenarioDef* find_scenario(std::string_view name) {
    for (const auto& d : scenario_defs())
        if (name == d.name) return &d;
    return nullptr;
}

} // namespace detail

/// The repeating arrival-rate curve shipped with the tool: period 250 time
/// units, maximum rate 0.88, long-run average rate 0.5. `mean_rate` rescales
/// the whole curve (and lambda_max) proportionally.
inline ArrivalSpec default_arrival_pattern(double mean_rate = 0.5) {
    PatternArrivals p;
    p.period = 250.0;
    double scale = mean_rate / 0.5;
    p.lambda_max = 0.88 * scale;
    p.mean_rate = 0.502 * scale; // exact trapezoid average of the knots below
    p.curve = {{0.0, 0.18 * scale},
               {50.0, 0.88 * scale},
               {100.0, 0.55 * scale},
               {150.0, 0.70 * scale},
               {200.0, 0.20 * scale}};
    return ArrivalSpec::from_pattern(p);
}

inline std::vector<std::string> builtin_scenario_names() {
    std::vector<std::string> names;
    for (const auto& d : detail::scenario_defs()) names.push_back(d.name);
    names.insert(names.end(), {"composite", "composite_reversed", "composite_parallel"});
    return names;
}

/// Builds one of the shipped scenario models. Single scenarios have two
/// activities and two resources; the composites chain all six scenarios in
/// order, in reverse order, or side by side in parallel, sharing one external
/// Poisson arrival stream.
inline ProcessModel builtin_scenario(std::string_view name, double lambda) {
    if (!(lambda > 0.0)) throw Error("arrival rate must be positive");
    ProcessModel m;
    m.name = std::string(name);
    m.arrivals = ArrivalSpec::constant(lambda);
    auto& g = m.routing;

    auto add_node = [&g](RoutingNode n) {
        g.nodes.push_back(std::move(n));
        return static_cast<int>(g.nodes.size()) - 1;
    };

    if (const auto* def = detail::find_scenario(name)) {
        detail::add_scenario_members(m, *def);
        int start = add_node({NodeType::Start, "start", -1, {}, {}});
        auto sg = detail::append_subgraph(g, *def, 0, 1, def->name);
        int end = add_node({NodeType::End, "end", -1, {}, {}});
        g.nodes[start].next = {sg.entry};
        for (int e : sg.exits) g.nodes[e].next = {end};
    } else if (name == "composite" || name == "composite_reversed") {
        std::vector<int> order = {0, 1, 2, 3, 4, 5};
        if (name == "composite_reversed") order = {5, 4, 3, 2, 1, 0};
        for (const auto& def : detail::scenario_defs()) detail::add_scenario_members(m, def);
        int start = add_node({NodeType::Start, "start", -1, {}, {}});
        int prev = start;
        std::vector<int> prev_exits = {};
        for (int idx : order) {
            const auto& def = detail::scenario_defs()[idx];
            auto sg = detail::append_subgraph(g, def, idx * 2, idx * 2 + 1, def.name);
            if (prev == start) {
                g.nodes[start].next = {sg.entry};
            } else {
                for (int e : prev_exits) g.nodes[e].next = {sg.entry};
            }
            prev = sg.entry;
            prev_exits = sg.exits;
        }
        int end = add_node({NodeType::End, "end", -1, {}, {}});
        for (int e : prev_exits) g.nodes[e].next = {end};
    } else if (name == "composite_parallel") {
        for (const auto& def : detail::scenario_defs()) detail::add_scenario_members(m, def);
        int start = add_node({NodeType::Start, "start", -1, {}, {}});
        int split = add_node({NodeType::AndSplit, "split_all", -1, {}, {}});
        int join = add_node({NodeType::AndJoin, "join_all", -1, {}, {}});
        int end = add_node({NodeType::End, "end", -1, {}, {}});
        g.nodes[start].next = {split};
        g.nodes[join].next = {end};
        for (std::size_t idx = 0; idx < detail::scenario_defs().size(); ++idx) {
            const auto& def = detail::scenario_defs()[idx];
            auto sg = detail::append_subgraph(g, def, static_cast<int>(idx) * 2,
                                              static_cast<int>(idx) * 2 + 1, def.name);
            g.nodes[split].next.push_back(sg.entry);
            for (int e : sg.exits) g.nodes[e].next = {join};
        }
    } else {
        throw UnknownScenario(std::string(name));
    }

    m.finalize();
    validate_or_throw(m);
    return m;
}

} // namespace bpsim
