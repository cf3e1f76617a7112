#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "bpsim/sim.hpp"

namespace bpsim {

/// A policy's answer at a decision point: one assignment from the offered
/// set, or postpone.
struct Decision {
    bool is_postpone = false;
    int resource = -1;
    long instance = -1;

    static Decision assign(int resource, long instance) { return {false, resource, instance}; }
    static Decision postpone() { return {true, -1, -1}; }
};

struct DecisionContext {
    Simulation& sim;
    const ProcessModel& model;
    const std::vector<AssignmentOption>& options; // non-empty at a decision point
};

/// A resource allocation policy: maps an execution state (with at least one
/// possible assignment) to an assignment or postpone. Implementations must
/// never return an assignment outside the offered set.
class Policy {
  public:
    virtual ~Policy() = default;
    virtual Decision decide(const DecisionContext& ctx, Rng& policy_rng) = 0;
    /// Called once per episode before the first decision.
    virtual void reset(std::uint64_t /*episode_seed*/) {}
    virtual std::string name() const = 0;
};

using PolicyPtr = std::unique_ptr<Policy>;

/// Runs one rollout: repeatedly advances the simulation to a decision point,
/// consults the policy until it postpones or no assignment is possible, and
/// stops at the horizon, where open cases are truncated into the statistics.
inline EpisodeStats run_episode(const ProcessModel& model, Policy& policy, double horizon,
                                std::uint64_t seed, SimOptions opts = {}) {
    Simulation sim(model, seed, opts);
    policy.reset(seed);
    auto step = sim.advance_to_next_decision(horizon);
    while (step == AdvanceResult::DecisionPoint) {
        DecisionContext ctx{sim, model, sim.options()};
        Decision d = policy.decide(ctx, sim.policy_rng());
        if (d.is_postpone) {
            step = sim.postpone(horizon);
        } else {
            sim.apply_assignment(d.resource, d.instance);
            step = sim.advance_to_next_decision(horizon);
        }
    }
    return sim.finish(horizon);
}

} // namespace bpsim
