#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "bpsim/matching.hpp"
#include "bpsim/policy.hpp"

namespace bpsim {

namespace detail {

// Global tie rule used by every deterministic policy: lower resource index,
// then lower activity index, then earlier instance creation (queue fronts are
// already the earliest-created instance of their activity).
inline bool option_tie_less(const AssignmentOption& a, const AssignmentOption& b) {
    if (a.resource != b.resource) return a.resource < b.resource;
    if (a.activity != b.activity) return a.activity < b.activity;
    return a.front_creation < b.front_creation;
}

} // namespace detail

/// Shortest Processing Time: the possible assignment with the lowest expected
/// processing time wins; never postpones.
class SptPolicy final : public Policy {
  public:
    Decision decide(const DecisionContext& ctx, Rng&) override {
        const AssignmentOption* best = nullptr;
        for (const auto& o : ctx.options) {
            if (!best || o.mean < best->mean ||
                (o.mean == best->mean && detail::option_tie_less(o, *best)))
                best = &o;
        }
        return Decision::assign(best->resource, best->front_instance);
    }
    std::string name() const override { return "spt"; }
};

/// First In, First Out: serves the waiting instance whose case has been in
/// the process the longest among instances with an eligible idle resource;
/// picks the idle eligible resource with the lowest mean for that activity.
class FifoPolicy final : public Policy {
  public:
    Decision decide(const DecisionContext& ctx, Rng&) override {
        long best_instance = -1;
        int best_activity = -1;
        double best_arrival = 0.0;
        long best_case = -1;
        std::uint64_t scanned = 0;
        for (const auto& o : ctx.options) {
            if ((scanned >> o.activity) & 1ULL) continue;
            scanned |= 1ULL << o.activity;
            for (long k : ctx.sim.waiting_queue(o.activity)) {
                const auto& inst = ctx.sim.instance(k);
                const auto& c = ctx.sim.case_data(inst.case_id);
                if (best_instance < 0 || c.arrival < best_arrival ||
                    (c.arrival == best_arrival &&
                     (c.id < best_case || (c.id == best_case && k < best_instance)))) {
                    best_instance = k;
                    best_activity = o.activity;
                    best_arrival = c.arrival;
                    best_case = c.id;
                }
            }
        }
        // cheapest idle eligible resource for the chosen activity
        int best_r = -1;
        for (const auto& o : ctx.options) {
            if (o.activity != best_activity) continue;
            if (best_r < 0 || o.mean < ctx.model.mean(best_r, best_activity)) best_r = o.resource;
        }
        return Decision::assign(best_r, best_instance);
    }
    std::string name() const override { return "fifo"; }
};

/// Uniformly random possible assignment (uniform over the instance-level set
/// D, so activities are weighted by their queue length); never postpones.
class RandomPolicy final : public Policy {
  public:
    explicit RandomPolicy(std::uint64_t seed = 0) : own_seed_(seed), rng_(seed) {}

    void reset(std::uint64_t episode_seed) override {
        rng_ = Rng(splitmix64(episode_seed) ^ own_seed_);
    }

    Decision decide(const DecisionContext& ctx, Rng&) override {
        long total = 0;
        for (const auto& o : ctx.options) total += o.queue_length;
        long pick = static_cast<long>(rng_.integer(static_cast<std::uint64_t>(total)));
        for (const auto& o : ctx.options) {
            if (pick < o.queue_length) {
                long k = ctx.sim.waiting_queue(o.activity)[static_cast<std::size_t>(pick)];
                return Decision::assign(o.resource, k);
            }
            pick -= o.queue_length;
        }
        return Decision::assign(ctx.options.back().resource, ctx.options.back().front_instance);
    }
    std::string name() const override { return "random"; }

  private:
    std::uint64_t own_seed_;
    Rng rng_;
};

/// Per-decision min-cost maximum-cardinality matching between idle resources
/// and waiting instances (edge cost = expected processing time). The matched
/// pairs are emitted one at a time; the matching is recomputed whenever an
/// event has changed (K, R+) since it was computed.
class MatchingPolicy final : public Policy {
  public:
    void reset(std::uint64_t) override {
        pending_.clear();
        cached_version_ = -1;
    }

    Decision decide(const DecisionContext& ctx, Rng&) override {
        if (ctx.sim.event_version() != cached_version_ || pending_.empty()) recompute(ctx);
        while (!pending_.empty()) {
            auto [r, k] = pending_.back();
            pending_.pop_back();
            if (ctx.sim.is_idle(r) && ctx.sim.instance(k).state == InstanceState::Waiting)
                return Decision::assign(r, k);
        }
        // matching can leave nothing actionable only if options changed under us
        const auto& o = ctx.options.front();
        return Decision::assign(o.resource, o.front_instance);
    }
    std::string name() const override { return "matching"; }

  private:
    void recompute(const DecisionContext& ctx) {
        pending_.clear();
        cached_version_ = ctx.sim.event_version();

        // left = idle resources present in the options; right = waiting
        // instances, at most |left| per activity since a matching cannot use
        // more (instances of one activity are cost-interchangeable).
        std::vector<int> lefts;
        for (const auto& o : ctx.options)
            if (lefts.empty() || lefts.back() != o.resource) lefts.push_back(o.resource);
        std::vector<long> rights;
        std::vector<int> right_activity;
        std::uint64_t scanned = 0;
        for (const auto& o : ctx.options) {
            if ((scanned >> o.activity) & 1ULL) continue;
            scanned |= 1ULL << o.activity;
            const auto& q = ctx.sim.waiting_queue(o.activity);
            std::size_t take = std::min(q.size(), lefts.size());
            for (std::size_t i = 0; i < take; ++i) {
                rights.push_back(q[i]);
                right_activity.push_back(o.activity);
            }
        }

        std::vector<MatchEdge> edges;
        for (std::size_t li = 0; li < lefts.size(); ++li)
            for (std::size_t ri = 0; ri < rights.size(); ++ri)
                if (ctx.model.is_eligible(lefts[li], right_activity[ri]))
                    edges.push_back({static_cast<int>(li), static_cast<int>(ri),
                                     ctx.model.mean(lefts[li], right_activity[ri])});

        auto matched = min_cost_matching(static_cast<int>(lefts.size()),
                                         static_cast<int>(rights.size()), edges);
        // emit in reverse so pop_back() yields ascending resource order
        for (auto it = matched.rbegin(); it != matched.rend(); ++it)
            pending_.emplace_back(lefts[it->first], rights[it->second]);
    }

    std::vector<std::pair<int, long>> pending_;
    long cached_version_ = -1;
};

inline PolicyPtr spt_policy() { return std::make_unique<SptPolicy>(); }
inline PolicyPtr fifo_policy() { return std::make_unique<FifoPolicy>(); }
inline PolicyPtr random_policy(std::uint64_t seed = 0) {
    return std::make_unique<RandomPolicy>(seed);
}
inline PolicyPtr matching_policy() { return std::make_unique<MatchingPolicy>(); }

} // namespace bpsim
