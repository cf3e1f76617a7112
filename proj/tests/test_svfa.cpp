#include <doctest.h>

#include <cstdio>

#include "bpsim/policies.hpp"
#include "bpsim/scenarios.hpp"
#include "bpsim/svfa.hpp"
#include "helpers.hpp"

using namespace bpsim;

namespace {

// Three activities spawned together, one resource; means 2.0 / 1.0 / 3.0.
ProcessModel three_way_model() {
    return load_model(R"({
      "name": "three_way",
      "activities": ["X", "Y", "Z"],
      "resources": ["r1"],
      "eligibility": {"X": ["r1"], "Y": ["r1"], "Z": ["r1"]},
      "service_means": [
        {"resource": "r1", "activity": "X", "mean": 2.0},
        {"resource": "r1", "activity": "Y", "mean": 1.0},
        {"resource": "r1", "activity": "Z", "mean": 3.0}
      ],
      "routing": [
        {"type": "start", "id": "start", "to": "split"},
        {"type": "and_split", "id": "split", "to": ["X", "Y", "Z"]},
        {"type": "activity", "id": "X", "to": "join"},
        {"type": "activity", "id": "Y", "to": "join"},
        {"type": "activity", "id": "Z", "to": "join"},
        {"type": "and_join", "id": "join", "to": "end"},
        {"type": "end", "id": "end"}
      ],
      "arrivals": {"constant": 0.1}
    })");
}

WeightVector weights(double w1, double w2, double w3, double w4, double w5, double w6,
                     double w7) {
    return WeightVector(w1, w2, w3, w4, w5, w6, w7);
}

} // namespace

TEST_CASE("features of the only pair in the system") {
    auto m = testutil::mm1_model(0.5, 1.0);
    Simulation sim(m, 3);
    REQUIRE(sim.advance_to_next_decision(1e9) == AdvanceResult::DecisionPoint);
    auto pairs = sim.possible_assignments();
    REQUIRE(pairs.size() == 1);
    auto f = compute_features(sim, m, pairs[0].first, pairs[0].second);
    CHECK(f.activity_rank == 1);
    CHECK(f.resource_rank == 1);
    CHECK(f.mean_assignment == 1.0);
    CHECK(f.var_assignment == 1.0); // exponential: variance = mean^2
    CHECK(f.queue_length == 1);
    CHECK(f.prob_fin == 1.0); // single-activity case finishes on completion
}

TEST_CASE("activity rank sorts waiting work by the resource's mean") {
    auto m = three_way_model();
    Simulation sim(m, 5);
    REQUIRE(sim.advance_to_next_decision(1e9) == AdvanceResult::DecisionPoint);
    REQUIRE(sim.total_waiting() == 3);
    int x = m.activity_pos("X"), y = m.activity_pos("Y"), z = m.activity_pos("Z");
    long kx = sim.waiting_queue(x).front();
    long ky = sim.waiting_queue(y).front();
    long kz = sim.waiting_queue(z).front();
    CHECK(compute_features(sim, m, 0, kz).activity_rank == 3); // mean 3.0: two cheaper queues
    CHECK(compute_features(sim, m, 0, ky).activity_rank == 1);
    CHECK(compute_features(sim, m, 0, kx).activity_rank == 2);
    CHECK(compute_features(sim, m, 0, kx).var_assignment == 4.0); // mean 2.0
}

TEST_CASE("resource rank counts strictly faster idle eligible resources") {
    auto m = testutil::two_stage_model(0.5, 1.0, 1.0);
    m.service_mean[1][0] = 2.0; // r2 slower at A
    m.service_mean[1][1] = 2.0;
    Simulation sim(m, 3);
    REQUIRE(sim.advance_to_next_decision(1e9) == AdvanceResult::DecisionPoint);
    long k = sim.possible_assignments()[0].second;
    CHECK(compute_features(sim, m, 0, k).resource_rank == 1);
    CHECK(compute_features(sim, m, 1, k).resource_rank == 2);
}

TEST_CASE("compute_features rejects infeasible pairs") {
    auto m = testutil::mm1_model(0.5, 1.0);
    Simulation sim(m, 3);
    REQUIRE(sim.advance_to_next_decision(1e9) == AdvanceResult::DecisionPoint);
    auto pairs = sim.possible_assignments();
    sim.apply_assignment(pairs[0].first, pairs[0].second);
    CHECK_THROWS_AS(compute_features(sim, m, pairs[0].first, pairs[0].second), InfeasiblePair);
}

TEST_CASE("score arithmetic follows the weighted feature sum") {
    FeatureVector f;
    f.mean_assignment = 2.0;
    f.var_assignment = 4.0;
    f.activity_rank = 1;
    f.resource_rank = 2;
    f.prob_fin = 1.0;
    f.queue_length = 3;

    CHECK(score(weights(0, 0, 0, 0, 0, 0, 0), f) == 0.0);
    CHECK(score(weights(1, 0, 0, 0, 0, 0, 0), FeatureVector{1.7, 0, 1, 1, 0, 0}) == 1.7);
    // 2 + 4 + 1 + 2 - 1 - 3 = 5
    CHECK(score(weights(1, 1, 1, 1, 1, 1, 0), f) == 5.0);
}

TEST_CASE("score scales linearly in the weights, argmin unchanged") {
    // scaling w1..w6 and the threshold together preserves every decision
    auto m = builtin_scenario("slow_server", 0.5);
    Simulation sim(m, 41);
    auto w1 = weights(1.0, 0.5, 2.0, 0.25, 3.0, 0.75, 25.0);
    auto w2 = weights(4.0, 2.0, 8.0, 1.0, 12.0, 3.0, 100.0); // everything 4x
    SvfaPolicy p1(w1), p2(w2);
    p1.reset(41);
    p2.reset(41);
    auto step = sim.advance_to_next_decision(300.0);
    int checked = 0;
    while (step == AdvanceResult::DecisionPoint) {
        DecisionContext ctx{sim, m, sim.options()};
        auto d1 = p1.decide(ctx, sim.policy_rng());
        auto d2 = p2.decide(ctx, sim.policy_rng());
        REQUIRE(d1.is_postpone == d2.is_postpone);
        if (!d1.is_postpone) {
            REQUIRE(d1.resource == d2.resource);
            REQUIRE(d1.instance == d2.instance);
            sim.apply_assignment(d1.resource, d1.instance);
            step = sim.advance_to_next_decision(300.0);
        } else {
            step = sim.postpone(300.0);
        }
        ++checked;
    }
    CHECK(checked > 100);
}

TEST_CASE("svfa with mean-only weights replicates spt decision for decision") {
    for (const auto& name : {"low_utilization", "high_utilization", "slow_server",
                             "slow_downstream", "n_network", "parallel"}) {
        auto m = builtin_scenario(name, 0.5);
        SimOptions opts;
        opts.record_trace = true;
        for (std::uint64_t seed = 100; seed < 105; ++seed) {
            SptPolicy spt;
            SvfaPolicy svfa(weights(1, 0, 0, 0, 0, 0, 100));
            auto a = run_episode(m, spt, 300.0, seed, opts);
            auto b = run_episode(m, svfa, 300.0, seed, opts);
            REQUIRE(a.trace.size() == b.trace.size());
            REQUIRE(a.trace == b.trace);
            REQUIRE(a.mean_cycle_time == b.mean_cycle_time);
        }
    }
}

TEST_CASE("svfa with zero weights and zero threshold always postpones") {
    auto m = testutil::mm1_model(0.5, 1.0);
    SvfaPolicy svfa(weights(0, 0, 0, 0, 0, 0, 0)); // score 0 is not < 0
    auto stats = run_episode(m, svfa, 100.0, 7);
    CHECK(stats.assignments == 0);
    CHECK(stats.completed == 0);
    CHECK(stats.postpones > 0);
}

TEST_CASE("threshold gates assignment: scores {3,5} with w7 = 4 assigns the 3") {
    auto m = testutil::two_stage_model(0.5, 3.0, 3.0);
    m.service_mean[1][0] = 5.0;
    m.service_mean[1][1] = 5.0;
    Simulation sim(m, 3);
    REQUIRE(sim.advance_to_next_decision(1e9) == AdvanceResult::DecisionPoint);
    REQUIRE(sim.options().size() == 2);
    SvfaPolicy svfa(weights(1, 0, 0, 0, 0, 0, 4.0));
    DecisionContext ctx{sim, m, sim.options()};
    auto d = svfa.decide(ctx, sim.policy_rng());
    CHECK_FALSE(d.is_postpone);
    CHECK(d.resource == 0); // the mean-3 resource

    // with w7 = 3 the best score is not strictly below the threshold
    SvfaPolicy gated(weights(1, 0, 0, 0, 0, 0, 3.0));
    auto d2 = gated.decide(ctx, sim.policy_rng());
    CHECK(d2.is_postpone);
}

TEST_CASE("queue-length-only weights implement longest queue first") {
    auto m = builtin_scenario("slow_downstream", 0.5);
    Simulation sim(m, 19);
    // let work pile up without assigning, then ask svfa
    auto step = sim.advance_to_next_decision(200.0);
    for (int i = 0; i < 40 && step == AdvanceResult::DecisionPoint; ++i) step = sim.postpone(200.0);
    REQUIRE(step == AdvanceResult::DecisionPoint);
    SvfaPolicy svfa(weights(0, 0, 0, 0, 0, 1, 100));
    DecisionContext ctx{sim, m, sim.options()};
    auto d = svfa.decide(ctx, sim.policy_rng());
    REQUIRE_FALSE(d.is_postpone);
    long chosen_len = sim.waiting_count(sim.instance(d.instance).activity);
    for (const auto& o : sim.options()) CHECK(chosen_len >= o.queue_length);
}

TEST_CASE("svfa policy agrees with a brute-force argmin over compute_features") {
    // prob_fin weight on, so the per-instance feature matters
    auto w = weights(1.0, 0.2, 0.5, 0.3, 2.0, 0.4, 100.0);
    for (const auto& name : {"parallel", "composite_parallel"}) {
        auto m = builtin_scenario(name, 0.5);
        Simulation sim(m, 23);
        SvfaPolicy svfa(w);
        svfa.reset(23);
        auto step = sim.advance_to_next_decision(250.0);
        int checked = 0;
        while (step == AdvanceResult::DecisionPoint) {
            DecisionContext ctx{sim, m, sim.options()};
            auto d = svfa.decide(ctx, sim.policy_rng());

            // reference: instance-level argmin with the global tie rule
            double best_score = 0.0;
            int best_r = -1;
            long best_k = -1;
            for (const auto& [r, k] : sim.possible_assignments()) {
                auto f = compute_features(sim, m, r, k);
                double s = score(w, f);
                const auto& inst = sim.instance(k);
                bool better = best_k < 0 || s < best_score;
                if (!better && s == best_score) {
                    const auto& binst = sim.instance(best_k);
                    if (r != best_r) better = r < best_r;
                    else if (inst.activity != binst.activity) better = inst.activity < binst.activity;
                    else if (inst.creation_time != binst.creation_time)
                        better = inst.creation_time < binst.creation_time;
                }
                if (better) {
                    best_score = s;
                    best_r = r;
                    best_k = k;
                }
            }
            REQUIRE_FALSE(d.is_postpone);
            REQUIRE(d.resource == best_r);
            REQUIRE(score(w, compute_features(sim, m, d.resource, d.instance)) ==
                    doctest::Approx(best_score).epsilon(1e-12));
            sim.apply_assignment(d.resource, d.instance);
            step = sim.advance_to_next_decision(250.0);
            ++checked;
        }
        CHECK(checked > 50);
    }
}

TEST_CASE("rank bounds hold across fuzzed states") {
    auto m = builtin_scenario("composite", 0.5);
    Simulation sim(m, 61);
    RandomPolicy rp(2);
    rp.reset(61);
    long checked = 0;
    auto step = sim.advance_to_next_decision(400.0);
    while (step == AdvanceResult::DecisionPoint && checked < 100000) {
        for (const auto& [r, k] : sim.possible_assignments()) {
            auto f = compute_features(sim, m, r, k);
            CHECK(f.activity_rank >= 1);
            CHECK(f.activity_rank <= sim.total_waiting());
            CHECK(f.resource_rank >= 1);
            CHECK(f.resource_rank <= sim.idle_resource_count());
            CHECK(f.prob_fin >= 0.0);
            CHECK(f.prob_fin <= 1.0);
            ++checked;
        }
        DecisionContext ctx{sim, m, sim.options()};
        auto d = rp.decide(ctx, sim.policy_rng());
        sim.apply_assignment(d.resource, d.instance);
        step = sim.advance_to_next_decision(400.0);
    }
    CHECK(checked > 1000);
}

TEST_CASE("weights reject values outside [0, 100]") {
    CHECK_THROWS_AS(weights(-1, 0, 0, 0, 0, 0, 0), Error);
    CHECK_THROWS_AS(weights(0, 0, 0, 0, 0, 0, 101), Error);
    CHECK_THROWS_AS(WeightVector::from_vector({1, 2, 3}), Error);
}

TEST_CASE("weights file round trip") {
    WeightVector w(1.5, 0.25, 3.0, 4.75, 5.0, 6.125, 99.5);
    std::string path = "/tmp/bpsim_test_weights.json";
    save_weights(w, path);
    auto w2 = load_weights(path);
    for (int i = 0; i < 7; ++i) CHECK(w2.w[i] == w.w[i]);
    std::remove(path.c_str());
}
