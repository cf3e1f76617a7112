#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "bpsim/errors.hpp"

namespace bpsim {

/// An activity of the process. `index` is the 1-based position in the model's
/// fixed activity ordering.
struct Activity {
    std::string id;
    int index = 0;
};

struct Resource {
    std::string id;
    int index = 0;
};

enum class NodeType { Start, ActivityNode, XorSplit, AndSplit, AndJoin, End };

struct RoutingNode {
    NodeType type = NodeType::Start;
    std::string id;
    int activity = -1;            // position into ProcessModel::activities, ActivityNode only
    std::vector<int> next;        // successor node positions
    std::vector<double> prob;     // XorSplit branch probabilities, aligned with next
};

struct RoutingGraph {
    std::vector<RoutingNode> nodes;
    int start = -1;

    // derived, filled by finalize()
    std::vector<int> in_degree;
    std::vector<int> join_arity;  // tokens an AndJoin waits for before firing
    std::vector<int> join_slot;   // node -> dense index among AndJoin nodes, -1 otherwise
    int join_count = 0;
    std::vector<int> node_of_activity; // activity -> node position

    int node_index(std::string_view id) const {
        for (std::size_t i = 0; i < nodes.size(); ++i)
            if (nodes[i].id == id) return static_cast<int>(i);
        return -1;
    }

    void finalize(int activity_count) {
        in_degree.assign(nodes.size(), 0);
        join_slot.assign(nodes.size(), -1);
        node_of_activity.assign(activity_count, -1);
        join_count = 0;
        start = -1;
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            const auto& n = nodes[i];
            if (n.type == NodeType::Start) start = static_cast<int>(i);
            if (n.type == NodeType::AndJoin) join_slot[i] = join_count++;
            if (n.type == NodeType::ActivityNode && n.activity >= 0 &&
                n.activity < activity_count)
                node_of_activity[n.activity] = static_cast<int>(i);
            for (int s : n.next)
                if (s >= 0 && s < static_cast<int>(nodes.size())) in_degree[s]++;
        }
        compute_join_arity();
    }

  private:
    // A join waits for one token per concurrently token-bearing incoming
    // branch. Edges that are alternatives of the same XOR deliver at most one
    // token between them, so the wait count is the maximum, over XOR
    // outcomes, of the incoming edges whose source is reachable from start.
    void compute_join_arity() {
        join_arity = in_degree;
        if (start < 0) return;
        std::vector<int> xors;
        std::size_t outcomes = 1;
        for (std::size_t i = 0; i < nodes.size(); ++i)
            if (nodes[i].type == NodeType::XorSplit) {
                xors.push_back(static_cast<int>(i));
                outcomes *= std::max<std::size_t>(nodes[i].next.size(), 1);
                if (outcomes > 4096) return; // too many outcomes: keep edge counts
            }
        std::vector<int> arity(nodes.size(), 0);
        std::vector<int> count(nodes.size(), 0);
        std::vector<std::size_t> choice(xors.size(), 0);
        bool more = true;
        while (more) {
            // reachability under this outcome (joins pass through)
            std::vector<char> seen(nodes.size(), 0);
            std::vector<int> stack = {start};
            seen[start] = 1;
            while (!stack.empty()) {
                int v = stack.back();
                stack.pop_back();
                const auto& n = nodes[v];
                if (n.type == NodeType::XorSplit) {
                    std::size_t x = 0;
                    while (xors[x] != v) ++x;
                    int s = n.next[choice[x]];
                    if (!seen[s]) {
                        seen[s] = 1;
                        stack.push_back(s);
                    }
                } else {
                    for (int s : n.next)
                        if (!seen[s]) {
                            seen[s] = 1;
                            stack.push_back(s);
                        }
                }
            }
            std::fill(count.begin(), count.end(), 0);
            for (std::size_t i = 0; i < nodes.size(); ++i) {
                if (!seen[i]) continue;
                for (int s : nodes[i].next)
                    if (nodes[s].type == NodeType::AndJoin) count[s]++;
            }
            for (std::size_t i = 0; i < nodes.size(); ++i)
                arity[i] = std::max(arity[i], count[i]);

            more = false;
            for (std::size_t d = 0; d < xors.size(); ++d) {
                if (++choice[d] < nodes[xors[d]].next.size()) {
                    more = true;
                    break;
                }
                choice[d] = 0;
            }
        }
        for (std::size_t i = 0; i < nodes.size(); ++i)
            if (nodes[i].type == NodeType::AndJoin && arity[i] > 0) join_arity[i] = arity[i];
    }
};

/// Piecewise-linear arrival-rate curve over one repeating period. Used to
/// simulate a non-homogeneous Poisson process by thinning: candidates are
/// drawn at lambda_max and accepted with probability rate(phase)/lambda_max.
struct PatternArrivals {
    double period = 0.0;
    double lambda_max = 0.0;
    double mean_rate = 0.0;                      // declared long-run average rate
    std::vector<std::pair<double, double>> curve; // (phase, rate) knots, phases in [0, period)

    double rate_at(double phase) const {
        if (curve.empty()) return 0.0;
        phase = std::fmod(phase, period);
        if (phase < 0) phase += period;
        // find surrounding knots; the curve wraps around the period
        std::size_t i = 0;
        while (i + 1 < curve.size() && curve[i + 1].first <= phase) ++i;
        double p0 = curve[i].first, r0 = curve[i].second;
        double p1, r1;
        if (i + 1 < curve.size()) {
            p1 = curve[i + 1].first;
            r1 = curve[i + 1].second;
        } else {
            p1 = curve.front().first + period;
            r1 = curve.front().second;
        }
        if (phase < p0) { // before first knot: wrap from the last knot
            double pl = curve.back().first - period, rl = curve.back().second;
            return rl + (r0 - rl) * (phase - pl) / (p0 - pl);
        }
        if (p1 == p0) return r0;
        return r0 + (r1 - r0) * (phase - p0) / (p1 - p0);
    }

    /// Exact time average of the piecewise-linear curve over one period.
    double curve_average() const {
        if (curve.empty() || period <= 0.0) return 0.0;
        double area = 0.0;
        for (std::size_t i = 0; i < curve.size(); ++i) {
            double p0 = curve[i].first, r0 = curve[i].second;
            double p1 = (i + 1 < curve.size()) ? curve[i + 1].first : curve.front().first + period;
            double r1 = (i + 1 < curve.size()) ? curve[i + 1].second : curve.front().second;
            area += 0.5 * (r0 + r1) * (p1 - p0);
        }
        return area / period;
    }
};

struct ArrivalSpec {
    enum class Kind { Constant, Pattern };
    Kind kind = Kind::Constant;
    double rate = 0.0; // Constant only
    PatternArrivals pattern;

    static ArrivalSpec constant(double lambda) {
        ArrivalSpec s;
        s.kind = Kind::Constant;
        s.rate = lambda;
        return s;
    }
    static ArrivalSpec from_pattern(PatternArrivals p) {
        ArrivalSpec s;
        s.kind = Kind::Pattern;
        s.pattern = std::move(p);
        return s;
    }

    double mean_rate() const {
        return kind == Kind::Constant ? rate : pattern.mean_rate;
    }
};

/// Static structure of a business process: activities, resources, who may do
/// what, how long it takes, how cases route, and how cases arrive.
/// Immutable after load; safe to share read-only across simulations.
struct ProcessModel {
    std::string name;
    std::vector<Activity> activities;
    std::vector<Resource> resources;
    std::vector<std::vector<int>> eligible;      // activity -> sorted resource positions
    std::vector<std::uint64_t> eligible_mask;    // activity -> resource bitmask
    std::vector<std::uint64_t> resource_mask;    // resource -> activity bitmask
    std::vector<std::vector<double>> service_mean; // [resource][activity], NaN if unset
    RoutingGraph routing;
    ArrivalSpec arrivals;

    int activity_count() const { return static_cast<int>(activities.size()); }
    int resource_count() const { return static_cast<int>(resources.size()); }

    int activity_pos(std::string_view id) const {
        for (std::size_t i = 0; i < activities.size(); ++i)
            if (activities[i].id == id) return static_cast<int>(i);
        return -1;
    }
    int resource_pos(std::string_view id) const {
        for (std::size_t i = 0; i < resources.size(); ++i)
            if (resources[i].id == id) return static_cast<int>(i);
        return -1;
    }

    bool is_eligible(int resource, int activity) const {
        return (eligible_mask[activity] >> resource) & 1ULL;
    }

    double mean(int resource, int activity) const { return service_mean[resource][activity]; }

    /// Exponential service times: variance is the squared mean.
    double variance(int resource, int activity) const {
        double m = mean(resource, activity);
        return m * m;
    }

    std::size_t eligible_pair_count() const {
        std::size_t n = 0;
        for (const auto& e : eligible) n += e.size();
        return n;
    }

    /// Rebuilds the derived lookup structures from activities/resources/
    /// eligible/routing. Call after constructing or mutating the model by hand.
    void finalize() {
        eligible_mask.assign(activities.size(), 0);
        resource_mask.assign(resources.size(), 0);
        for (std::size_t a = 0; a < eligible.size() && a < activities.size(); ++a) {
            std::sort(eligible[a].begin(), eligible[a].end());
            for (int r : eligible[a]) {
                if (r < 0 || r >= resource_count()) continue;
                eligible_mask[a] |= 1ULL << r;
                resource_mask[r] |= 1ULL << a;
            }
        }
        routing.finalize(activity_count());
    }

    /// Structural hash over orderings, eligibility and routing. Checkpoints
    /// carry this so a trained policy is never applied to a mismatched model.
    std::uint64_t fingerprint() const {
        std::uint64_t h = 1469598103934665603ULL;
        auto mix = [&h](std::string_view s) {
            for (char c : s) {
                h ^= static_cast<unsigned char>(c);
                h *= 1099511628211ULL;
            }
            h ^= 0xff;
            h *= 1099511628211ULL;
        };
        for (const auto& a : activities) mix(a.id);
        for (const auto& r : resources) mix(r.id);
        for (std::size_t a = 0; a < eligible.size(); ++a)
            for (int r : eligible[a]) {
                h ^= static_cast<std::uint64_t>(a) * 131 + static_cast<std::uint64_t>(r);
                h *= 1099511628211ULL;
            }
        for (const auto& n : routing.nodes) {
            h ^= static_cast<std::uint64_t>(n.type);
            h *= 1099511628211ULL;
            mix(n.id);
            for (int s : n.next) {
                h ^= static_cast<std::uint64_t>(s) + 0x9e37;
                h *= 1099511628211ULL;
            }
        }
        return h;
    }
};

namespace detail {

// Walks tokens through the graph treating activities as pass-through,
// enumerating every XOR outcome. Returns false if some outcome never drains
// to zero tokens (unbalanced split/join) or exceeds the step budget (cycle).
inline bool drains_on_all_paths(const RoutingGraph& g, std::vector<int> fill,
                                std::vector<int> stack, int live, int budget) {
    while (!stack.empty()) {
        if (--budget < 0) return false;
        int node = stack.back();
        stack.pop_back();
        const auto& n = g.nodes[node];
        switch (n.type) {
        case NodeType::Start:
        case NodeType::ActivityNode:
            if (n.next.empty()) return false;
            stack.push_back(n.next[0]);
            break;
        case NodeType::XorSplit: {
            for (std::size_t b = 0; b < n.next.size(); ++b) {
                auto st = stack;
                st.push_back(n.next[b]);
                if (!drains_on_all_paths(g, fill, std::move(st), live, budget)) return false;
            }
            return true;
        }
        case NodeType::AndSplit:
            live += static_cast<int>(n.next.size()) - 1;
            for (int s : n.next) stack.push_back(s);
            break;
        case NodeType::AndJoin:
            if (++fill[node] == g.join_arity[node]) {
                fill[node] = 0;
                live -= g.join_arity[node] - 1;
                if (n.next.empty()) return false;
                stack.push_back(n.next[0]);
            }
            break;
        case NodeType::End:
            --live;
            break;
        }
    }
    return live == 0;
}

} // namespace detail

/// Checks every type invariant and returns the list of violations (empty when
/// the model is valid).
inline std::vector<std::string> validate(const ProcessModel& m) {
    std::vector<std::string> issues;
    auto add = [&issues](std::string s) { issues.push_back(std::move(s)); };

    if (m.activities.empty()) add("model has no activities");
    if (m.resources.empty()) add("model has no resources");
    {
        std::unordered_map<std::string, int> seen;
        for (std::size_t i = 0; i < m.activities.size(); ++i) {
            if (++seen[m.activities[i].id] > 1) add("duplicate activity id: " + m.activities[i].id);
            if (m.activities[i].index != static_cast<int>(i) + 1)
                add("activity indices must be contiguous from 1: " + m.activities[i].id);
        }
        seen.clear();
        for (std::size_t i = 0; i < m.resources.size(); ++i) {
            if (++seen[m.resources[i].id] > 1) add("duplicate resource id: " + m.resources[i].id);
            if (m.resources[i].index != static_cast<int>(i) + 1)
                add("resource indices must be contiguous from 1: " + m.resources[i].id);
        }
    }

    if (m.eligible.size() != m.activities.size()) {
        add("eligibility map does not cover every activity");
    } else {
        for (std::size_t a = 0; a < m.eligible.size(); ++a) {
            if (m.eligible[a].empty())
                add("empty eligibility for activity " + m.activities[a].id);
            for (int r : m.eligible[a])
                if (r < 0 || r >= m.resource_count())
                    add("eligibility references a missing resource for activity " +
                        m.activities[a].id);
        }
    }

    if (m.service_mean.size() != m.resources.size()) {
        add("service time table does not cover every resource");
    } else {
        for (std::size_t a = 0; a < m.eligible.size() && a < m.activities.size(); ++a) {
            for (int r : m.eligible[a]) {
                if (r < 0 || r >= static_cast<int>(m.service_mean.size())) continue;
                double v = m.service_mean[r][a];
                if (!(v > 0.0))
                    add("non-positive mean for eligible pair (" + m.resources[r].id + ", " +
                        m.activities[a].id + ")");
            }
        }
    }

    // routing structure
    const auto& g = m.routing;
    int starts = 0, ends = 0;
    std::vector<int> activity_nodes(m.activities.size(), 0);
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        const auto& n = g.nodes[i];
        for (int s : n.next)
            if (s < 0 || s >= static_cast<int>(g.nodes.size()))
                add("routing node " + n.id + " has a dangling edge");
        switch (n.type) {
        case NodeType::Start:
            ++starts;
            if (n.next.size() != 1) add("start node must have exactly one successor");
            break;
        case NodeType::End:
            ++ends;
            if (!n.next.empty()) add("end node must have no successors");
            break;
        case NodeType::ActivityNode:
            if (n.activity < 0 || n.activity >= m.activity_count())
                add("routing node " + n.id + " references a missing activity");
            else
                activity_nodes[n.activity]++;
            if (n.next.size() != 1) add("activity node " + n.id + " must have exactly one successor");
            break;
        case NodeType::XorSplit: {
            if (n.next.size() < 2) add("xor node " + n.id + " needs at least two branches");
            if (n.prob.size() != n.next.size())
                add("xor node " + n.id + " branch probabilities misaligned");
            double sum = 0.0;
            for (double p : n.prob) {
                if (!(p > 0.0)) add("xor node " + n.id + " has a non-positive branch probability");
                sum += p;
            }
            if (std::fabs(sum - 1.0) > 1e-9)
                add("probabilities must sum to 1 at xor node " + n.id);
            break;
        }
        case NodeType::AndSplit:
            if (n.next.size() < 2) add("and_split " + n.id + " needs at least two branches");
            break;
        case NodeType::AndJoin:
            if (n.next.size() != 1) add("and_join " + n.id + " must have exactly one successor");
            break;
        }
    }
    if (starts != 1) add("routing graph must have exactly one start node");
    if (ends < 1) add("routing graph must have at least one end node");
    for (std::size_t a = 0; a < activity_nodes.size(); ++a)
        if (activity_nodes[a] != 1)
            add("activity " + m.activities[a].id + " must appear exactly once in the routing graph");

    // acyclicity
    if (starts == 1 && issues.empty()) {
        std::vector<int> state(g.nodes.size(), 0); // 0 unvisited, 1 on stack, 2 done
        bool cyclic = false;
        auto dfs = [&](auto&& self, int v) -> void {
            state[v] = 1;
            for (int s : g.nodes[v].next) {
                if (state[s] == 1) cyclic = true;
                else if (state[s] == 0) self(self, s);
                if (cyclic) return;
            }
            state[v] = 2;
        };
        dfs(dfs, g.start);
        if (cyclic) add("routing graph must be acyclic");

        // every and_split must be balanced by a matching and_join: a token
        // dropped at start must drain to zero on every xor outcome
        if (!cyclic) {
            std::vector<int> fill(g.nodes.size(), 0);
            if (!detail::drains_on_all_paths(g, fill, {g.start}, 1, 4096))
                add("routing graph is unbalanced: some path leaves live tokens "
                    "(check and_split / and_join pairing and end reachability)");
        }
    }

    // arrivals
    if (m.arrivals.kind == ArrivalSpec::Kind::Constant) {
        if (!(m.arrivals.rate > 0.0)) add("arrival rate must be positive");
    } else {
        const auto& p = m.arrivals.pattern;
        if (!(p.period > 0.0)) add("arrival pattern period must be positive");
        if (!(p.lambda_max > 0.0)) add("arrival pattern lambda_max must be positive");
        if (p.curve.size() < 1) add("arrival pattern needs at least one curve knot");
        double last = -1.0;
        for (const auto& [phase, rate] : p.curve) {
            if (phase < 0.0 || phase >= p.period) add("arrival pattern knot phase outside [0, period)");
            if (phase <= last) add("arrival pattern knot phases must be strictly increasing");
            last = phase;
            if (!(rate > 0.0)) add("arrival pattern rate must be positive");
            if (rate > p.lambda_max + 1e-12) add("arrival pattern rate exceeds lambda_max");
        }
        if (!p.curve.empty() && p.period > 0.0) {
            double avg = p.curve_average();
            if (!(p.mean_rate > 0.0))
                add("arrival pattern must declare a positive mean rate");
            else if (std::fabs(avg - p.mean_rate) > 0.01 * p.mean_rate)
                add("arrival pattern curve average deviates more than 1% from the declared mean rate");
        }
    }

    return issues;
}

inline void validate_or_throw(const ProcessModel& m) {
    auto issues = validate(m);
    if (!issues.empty()) throw ValidationError(std::move(issues));
}

/// Routing progress of one case, as needed to decide whether executing one
/// more instance can finish the case.
struct CaseProgress {
    int other_active_instances = 0; // waiting or processing instances besides k
    std::vector<int> join_fill;     // tokens parked per AndJoin slot
};

namespace detail {

// Probability that the token released by the completing instance, together
// with the already parked join tokens, drains the case to zero live tokens
// without spawning any new activity instance. Recursion enumerates XOR
// branches weighted by probability.
inline double drain_probability(const RoutingGraph& g, std::vector<int>& fill,
                                std::vector<int>& stack, int live) {
    while (!stack.empty()) {
        int node = stack.back();
        stack.pop_back();
        const auto& n = g.nodes[node];
        switch (n.type) {
        case NodeType::ActivityNode:
            return 0.0; // a new instance would be created: case not finished
        case NodeType::Start:
            stack.push_back(n.next[0]);
            break;
        case NodeType::XorSplit: {
            double p = 0.0;
            for (std::size_t b = 0; b < n.next.size(); ++b) {
                auto fill_copy = fill;
                auto stack_copy = stack;
                stack_copy.push_back(n.next[b]);
                p += n.prob[b] * drain_probability(g, fill_copy, stack_copy, live);
            }
            return p;
        }
        case NodeType::AndSplit:
            live += static_cast<int>(n.next.size()) - 1;
            for (int s : n.next) stack.push_back(s);
            break;
        case NodeType::AndJoin: {
            int slot = g.join_slot[node];
            if (++fill[slot] == g.join_arity[node]) {
                fill[slot] = 0;
                live -= g.join_arity[node] - 1;
                stack.push_back(n.next[0]);
            }
            break;
        }
        case NodeType::End:
            --live;
            break;
        }
    }
    return live == 0 ? 1.0 : 0.0;
}

} // namespace detail

/// Probability that completing an instance of `activity` finishes its case,
/// given the case's current progress and the graph's branch probabilities.
inline double prob_fin(const ProcessModel& m, const CaseProgress& progress, int activity) {
    if (activity < 0 || activity >= m.activity_count())
        throw Error("prob_fin: unknown activity position");
    if (progress.other_active_instances > 0) return 0.0;
    const auto& g = m.routing;
    int node = g.node_of_activity[activity];
    if (node < 0) return 0.0;
    std::vector<int> fill = progress.join_fill;
    fill.resize(g.join_count, 0);
    int live = 1; // the completing instance's token
    for (int f : fill) live += f;
    std::vector<int> stack;
    stack.push_back(g.nodes[node].next[0]);
    return detail::drain_probability(g, fill, stack, live);
}

} // namespace bpsim
