#include <doctest.h>

#include <map>

#include "bpsim/model_io.hpp"
#include "bpsim/policies.hpp"
#include "bpsim/scenarios.hpp"
#include "helpers.hpp"

using namespace bpsim;

namespace {

// Independent prob_fin oracle: enumerate every global assignment of XOR
// branches, simulate the token game to quiescence for each, and sum the
// probability mass of the outcomes that finish the case without spawning a
// new instance. Unencountered XORs marginalize out to 1.
double oracle_prob_fin(const ProcessModel& m, const CaseProgress& progress, int activity) {
    if (progress.other_active_instances > 0) return 0.0;
    const auto& g = m.routing;
    std::vector<int> xors;
    for (std::size_t i = 0; i < g.nodes.size(); ++i)
        if (g.nodes[i].type == NodeType::XorSplit) xors.push_back(static_cast<int>(i));

    std::vector<std::size_t> choice(xors.size(), 0);
    double total = 0.0;
    bool more = true;
    while (more) {
        double weight = 1.0;
        for (std::size_t x = 0; x < xors.size(); ++x) weight *= g.nodes[xors[x]].prob[choice[x]];

        std::vector<int> fill(g.join_count, 0);
        for (std::size_t j = 0; j < progress.join_fill.size(); ++j) fill[j] = progress.join_fill[j];
        int live = 1;
        for (int f : fill) live += f;
        bool spawned = false;
        std::vector<int> frontier = {g.nodes[g.node_of_activity[activity]].next[0]};
        while (!frontier.empty() && !spawned) {
            int node = frontier.back();
            frontier.pop_back();
            const auto& n = g.nodes[node];
            if (n.type == NodeType::ActivityNode) {
                spawned = true;
            } else if (n.type == NodeType::End) {
                --live;
            } else if (n.type == NodeType::AndSplit) {
                live += static_cast<int>(n.next.size()) - 1;
                for (int s : n.next) frontier.push_back(s);
            } else if (n.type == NodeType::AndJoin) {
                if (++fill[g.join_slot[node]] == g.join_arity[node]) {
                    fill[g.join_slot[node]] = 0;
                    live -= g.join_arity[node] - 1;
                    frontier.push_back(n.next[0]);
                }
            } else if (n.type == NodeType::XorSplit) {
                std::size_t x = 0;
                while (xors[x] != node) ++x;
                frontier.push_back(n.next[choice[x]]);
            } else {
                frontier.push_back(n.next[0]);
            }
        }
        if (!spawned && live == 0) total += weight;

        more = false;
        for (std::size_t d = 0; d < xors.size(); ++d) {
            if (++choice[d] < g.nodes[xors[d]].next.size()) {
                more = true;
                break;
            }
            choice[d] = 0;
        }
    }
    return total;
}

const char* kMinimalModel = R"({
  "name": "minimal",
  "activities": ["A"],
  "resources": ["r1"],
  "eligibility": {"A": ["r1"]},
  "service_means": [{"resource": "r1", "activity": "A", "mean": 1.0}],
  "routing": [
    {"type": "start", "id": "start", "to": "A"},
    {"type": "activity", "id": "A", "to": "end"},
    {"type": "end", "id": "end"}
  ],
  "arrivals": {"constant": 0.5}
})";

} // namespace

TEST_CASE("load_model accepts the smallest legal model") {
    auto m = load_model(kMinimalModel);
    CHECK(m.activity_count() == 1);
    CHECK(m.resource_count() == 1);
    CHECK(m.mean(0, 0) == 1.0);
    CHECK(m.arrivals.rate == 0.5);
}

TEST_CASE("load_model rejects xor probabilities that do not sum to 1") {
    std::string text = R"({
      "name": "bad_xor",
      "activities": ["A", "B"],
      "resources": ["r1"],
      "eligibility": {"A": ["r1"], "B": ["r1"]},
      "service_means": [
        {"resource": "r1", "activity": "A", "mean": 1.0},
        {"resource": "r1", "activity": "B", "mean": 1.0}
      ],
      "routing": [
        {"type": "start", "id": "start", "to": "x"},
        {"type": "xor", "id": "x", "branches": [{"to": "A", "p": 0.6}, {"to": "B", "p": 0.5}]},
        {"type": "activity", "id": "A", "to": "end"},
        {"type": "activity", "id": "B", "to": "end"},
        {"type": "end", "id": "end"}
      ],
      "arrivals": {"constant": 0.5}
    })";
    bool threw = false;
    try {
        load_model(text);
    } catch (const ValidationError& e) {
        threw = true;
        bool found = false;
        for (const auto& issue : e.issues)
            if (issue.find("probabilities must sum to 1") != std::string::npos) found = true;
        CHECK(found);
    }
    CHECK(threw);
}

TEST_CASE("malformed text raises ParseError") {
    CHECK_THROWS_AS(load_model("{ not json"), ParseError);
    CHECK_THROWS_AS(load_model(R"({"name": "x"})"), ParseError);
}

TEST_CASE("builtin scenarios have two activities and two resources") {
    for (const auto& name : {"low_utilization", "high_utilization", "slow_server",
                             "slow_downstream", "n_network", "parallel"}) {
        auto m = builtin_scenario(name, 0.5);
        CHECK(m.activity_count() == 2);
        CHECK(m.resource_count() == 2);
        CHECK(validate(m).empty());
    }
}

TEST_CASE("composites have twelve activities, twelve resources, 23 eligible pairs") {
    for (const auto& name : {"composite", "composite_reversed", "composite_parallel"}) {
        auto m = builtin_scenario(name, 0.5);
        CHECK(m.activity_count() == 12);
        CHECK(m.resource_count() == 12);
        CHECK(m.eligible_pair_count() == 23); // plus postpone: 24 actions
    }
}

TEST_CASE("n_network eligibility matches the shipped topology") {
    auto m = builtin_scenario("n_network", 0.5);
    CHECK(m.eligible_pair_count() == 3);
    int i = m.activity_pos("I"), j = m.activity_pos("J");
    int r9 = m.resource_pos("r9"), r10 = m.resource_pos("r10");
    CHECK(m.is_eligible(r10, i));
    CHECK_FALSE(m.is_eligible(r9, i));
    CHECK(m.is_eligible(r9, j));
    CHECK(m.is_eligible(r10, j));
}

TEST_CASE("unknown scenario name is rejected") {
    CHECK_THROWS_AS(builtin_scenario("no_such_scenario", 0.5), UnknownScenario);
    CHECK_THROWS_AS(builtin_scenario("parallel", 0.0), Error);
}

TEST_CASE("validate reports empty eligibility and non-positive means") {
    auto m = builtin_scenario("low_utilization", 0.5);
    CHECK(validate(m).empty());

    auto broken = m;
    broken.eligible[0].clear();
    broken.finalize();
    auto issues = validate(broken);
    bool found = false;
    for (const auto& s : issues)
        if (s.find("empty eligibility") != std::string::npos) found = true;
    CHECK(found);

    broken = m;
    broken.service_mean[0][0] = -1.0;
    issues = validate(broken);
    found = false;
    for (const auto& s : issues)
        if (s.find("non-positive mean") != std::string::npos) found = true;
    CHECK(found);
}

TEST_CASE("prob_fin on sequential and parallel flows") {
    auto seq = testutil::two_stage_model(0.5, 1.0, 1.0);
    int a = seq.activity_pos("A"), b = seq.activity_pos("B");
    CHECK(prob_fin(seq, CaseProgress{0, {}}, b) == 1.0);
    CHECK(prob_fin(seq, CaseProgress{0, {}}, a) == 0.0);

    auto par = builtin_scenario("parallel", 0.5);
    int k = par.activity_pos("K");
    // sibling still pending
    CHECK(prob_fin(par, CaseProgress{1, {0}}, k) == 0.0);
    // sibling complete: its token is parked at the join
    CHECK(prob_fin(par, CaseProgress{0, {1}}, k) == 1.0);
}

TEST_CASE("prob_fin equals the exhaustive xor-enumeration oracle on simulated states") {
    for (const auto& name : {"n_network", "parallel", "composite", "composite_parallel"}) {
        auto m = builtin_scenario(name, 0.5);
        Simulation sim(m, 99);
        RandomPolicy policy(1);
        policy.reset(99);
        int checked = 0;
        auto step = sim.advance_to_next_decision(300.0);
        while (step == AdvanceResult::DecisionPoint && checked < 4000) {
            for (const auto& [r, kid] : sim.possible_assignments()) {
                auto progress = sim.case_progress_excluding(kid);
                int act = sim.instance(kid).activity;
                double lib = prob_fin(m, progress, act);
                double oracle = oracle_prob_fin(m, progress, act);
                REQUIRE(lib == doctest::Approx(oracle).epsilon(1e-12));
                ++checked;
            }
            DecisionContext ctx{sim, m, sim.options()};
            auto d = policy.decide(ctx, sim.policy_rng());
            sim.apply_assignment(d.resource, d.instance);
            step = sim.advance_to_next_decision(300.0);
        }
        CHECK(checked > 50);
    }
}

TEST_CASE("prob_fin in the n_network choice is 1 after the chosen branch") {
    auto m = builtin_scenario("n_network", 0.5);
    // a case's only instance is I (or J): completing it ends the case
    CHECK(prob_fin(m, CaseProgress{0, {}}, m.activity_pos("I")) == 1.0);
    CHECK(prob_fin(m, CaseProgress{0, {}}, m.activity_pos("J")) == 1.0);
}

TEST_CASE("serialize / load round trip reproduces the model") {
    for (const auto& name : builtin_scenario_names()) {
        auto m = builtin_scenario(name, 0.5);
        auto text = serialize(m);
        auto m2 = load_model(text);
        CHECK(serialize(m2) == text);
        CHECK(m2.fingerprint() == m.fingerprint());
        CHECK(m2.arrivals.rate == m.arrivals.rate);
        REQUIRE(m2.service_mean.size() == m.service_mean.size());
        for (std::size_t r = 0; r < m.service_mean.size(); ++r)
            for (std::size_t a = 0; a < m.service_mean[r].size(); ++a) {
                if (std::isnan(m.service_mean[r][a]))
                    CHECK(std::isnan(m2.service_mean[r][a]));
                else
                    CHECK(m2.service_mean[r][a] == m.service_mean[r][a]);
            }
    }
}

TEST_CASE("shipped scenario files match the builtin catalog") {
    for (const auto& name : builtin_scenario_names()) {
        auto path = testutil::scenarios_dir() + "/" + name + ".json";
        auto from_file = load_model_file(path);
        auto builtin = builtin_scenario(name, 0.5);
        CHECK(from_file.fingerprint() == builtin.fingerprint());
        CHECK(serialize(from_file) == serialize(builtin));
    }
}

TEST_CASE("the shipped n_network file declares the expected eligibility") {
    auto m = load_model_file(testutil::scenarios_dir() + "/n_network.json");
    int i = m.activity_pos("I"), j = m.activity_pos("J");
    REQUIRE(i >= 0);
    REQUIRE(j >= 0);
    CHECK(m.eligible[i] == std::vector<int>{m.resource_pos("r10")});
    CHECK(m.eligible[j] ==
          std::vector<int>{m.resource_pos("r9"), m.resource_pos("r10")});
}

TEST_CASE("pattern arrivals validate the declared mean and bounds") {
    auto spec = default_arrival_pattern(0.5);
    CHECK(spec.pattern.lambda_max == 0.88);
    CHECK(spec.pattern.curve_average() == doctest::Approx(spec.pattern.mean_rate).epsilon(1e-9));
    CHECK(std::fabs(spec.pattern.curve_average() - 0.5) < 0.005);

    auto m = builtin_scenario("low_utilization", 0.5);
    m.arrivals = spec;
    CHECK(validate(m).empty());

    m.arrivals.pattern.mean_rate = 0.7; // curve no longer averages to the declared rate
    auto issues = validate(m);
    CHECK(!issues.empty());
}

TEST_CASE("pattern rate interpolation is piecewise linear with wraparound") {
    auto spec = default_arrival_pattern(0.5);
    const auto& p = spec.pattern;
    CHECK(p.rate_at(0.0) == doctest::Approx(0.18));
    CHECK(p.rate_at(50.0) == doctest::Approx(0.88));
    CHECK(p.rate_at(25.0) == doctest::Approx(0.5 * (0.18 + 0.88)));
    CHECK(p.rate_at(225.0) == doctest::Approx(0.5 * (0.20 + 0.18))); // wrap segment
    CHECK(p.rate_at(250.0) == doctest::Approx(p.rate_at(0.0)));      // periodic
    CHECK(p.rate_at(-25.0) == doctest::Approx(p.rate_at(225.0)));
}
