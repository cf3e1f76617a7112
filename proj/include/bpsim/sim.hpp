#pragma once

#include <cassert>
#include <cstdint>
#include <deque>
#include <ostream>
#include <queue>
#include <string>
#include <vector>

#include "bpsim/model.hpp"
#include "bpsim/rng.hpp"

namespace bpsim {

enum class Lifecycle { Start, Complete };

/// One row of an event trace: (activity, case, time, resource, lifecycle).
struct Event {
    int activity = -1;
    long case_id = -1;
    double time = 0.0;
    int resource = -1;
    Lifecycle lifecycle = Lifecycle::Start;

    bool operator==(const Event&) const = default;
};

enum class InstanceState { Waiting, Processing, Complete };

struct ActivityInstance {
    long id = -1;
    long case_id = -1;
    int activity = -1;
    int node = -1; // routing node that spawned the instance
    InstanceState state = InstanceState::Waiting;
    double creation_time = 0.0;
    double start_time = 0.0;
    int resource = -1;
};

struct CaseData {
    long id = -1;
    double arrival = 0.0;
    double completion = -1.0; // < 0 while open
    bool open = true;
    int live_tokens = 0;
    int active_instances = 0;     // waiting + processing
    std::vector<int> join_fill;   // per AndJoin slot
};

/// Per-episode outcome: cycle times (completed and truncated cases), resource
/// busy time, accumulated completion reward, and the optional event trace.
struct EpisodeStats {
    struct CaseOutcome {
        long id = -1;
        double arrival = 0.0;
        double cycle = 0.0;
        bool completed = false;
    };
    std::vector<CaseOutcome> cases;
    double horizon = 0.0;
    double mean_cycle_time = 0.0;
    long arrived = 0;
    long completed = 0;
    std::vector<double> busy_time; // per resource
    double reward_total = 0.0;     // sum of 1/(cycle+1) over completed cases
    long assignments = 0;
    long postpones = 0;
    std::vector<Event> trace;

    double utilization(int resource) const {
        return horizon > 0.0 ? busy_time[resource] / horizon : 0.0;
    }
    double max_utilization() const {
        double u = 0.0;
        for (std::size_t r = 0; r < busy_time.size(); ++r) u = std::max(u, utilization(static_cast<int>(r)));
        return u;
    }
};

/// Writes the trace in the documented CSV layout, one event per line.
inline void write_trace_csv(const EpisodeStats& stats, const ProcessModel& model,
                            std::ostream& out) {
    out << "case,activity,resource,lifecycle,time\n";
    char buf[64];
    for (const auto& e : stats.trace) {
        std::snprintf(buf, sizeof(buf), "%.17g", e.time);
        out << e.case_id << ',' << model.activities[e.activity].id << ','
            << (e.resource >= 0 ? model.resources[e.resource].id : std::string("-")) << ','
            << (e.lifecycle == Lifecycle::Start ? "start" : "complete") << ',' << buf << '\n';
    }
}

/// Draws successive arrival times for an ArrivalSpec. The pattern variant
/// thins a homogeneous process at lambda_max, accepting each candidate with
/// probability rate(phase)/lambda_max.
class ArrivalSampler {
  public:
    ArrivalSampler(const ArrivalSpec& spec, Rng rng) : spec_(&spec), rng_(std::move(rng)) {}

    double next(double from) {
        if (spec_->kind == ArrivalSpec::Kind::Constant)
            return from + rng_.exponential_rate(spec_->rate);
        const auto& p = spec_->pattern;
        double t = from;
        for (;;) {
            t += rng_.exponential_rate(p.lambda_max);
            double accept = p.rate_at(t) / p.lambda_max;
            if (rng_.uniform() < accept) return t;
        }
    }

  private:
    const ArrivalSpec* spec_;
    Rng rng_;
};

/// One directly actionable assignment group at a decision point: an idle
/// resource and an activity with a non-empty waiting queue it may serve. The
/// instance-level set D of possible assignments is the expansion of these
/// options over their queues.
struct AssignmentOption {
    int resource = -1;
    int activity = -1;
    double mean = 0.0;
    long queue_length = 0;
    long front_instance = -1;      // earliest created waiting instance
    double front_creation = 0.0;
};

enum class AdvanceResult { DecisionPoint, HorizonReached };

struct SimOptions {
    bool record_trace = false;
};

/// Discrete-event simulation of one business-process episode. Mutable and
/// single-threaded; run independent instances (with distinct seeds) for
/// replication-level parallelism.
///
/// Event order at equal timestamps is deterministic: completions before
/// arrivals, completions FIFO by scheduling order.
class Simulation {
  public:
    Simulation(const ProcessModel& model, std::uint64_t seed, SimOptions opts = {})
        : model_(&model),
          opts_(opts),
          seed_(seed),
          arrival_sampler_(model.arrivals, Rng::for_stream(seed, RngStream::arrivals)),
          rng_service_(Rng::for_stream(seed, RngStream::service)),
          rng_routing_(Rng::for_stream(seed, RngStream::routing)),
          rng_policy_(Rng::for_stream(seed, RngStream::policy)) {
        int r = model.resource_count();
        busy_instance_.assign(r, -1);
        busy_since_.assign(r, 0.0);
        busy_accum_.assign(r, 0.0);
        idle_count_ = r;
        waiting_.resize(model.activity_count());
        eligible_activities_.resize(r);
        for (int i = 0; i < r; ++i)
            for (int a = 0; a < model.activity_count(); ++a)
                if (model.is_eligible(i, a)) eligible_activities_[i].push_back(a);
        schedule_arrival(arrival_sampler_.next(0.0));
    }

    const ProcessModel& model() const { return *model_; }
    double now() const { return t_; }
    std::uint64_t seed() const { return seed_; }
    Rng& policy_rng() { return rng_policy_; }

    /// Monotone counter bumped once per processed event. Lets policies cache
    /// work across the several assignments of one decision point.
    long event_version() const { return event_version_; }

    // ------------------------------------------------------------------
    // execution state accessors (Def. 5 view)
    // ------------------------------------------------------------------
    bool is_idle(int resource) const { return busy_instance_[resource] < 0; }
    int idle_resource_count() const { return idle_count_; }
    long busy_instance(int resource) const { return busy_instance_[resource]; }
    long waiting_count(int activity) const { return static_cast<long>(waiting_[activity].size()); }
    long total_waiting() const { return total_waiting_; }
    const std::deque<long>& waiting_queue(int activity) const { return waiting_[activity]; }
    const ActivityInstance& instance(long id) const { return instances_[id]; }
    const CaseData& case_data(long id) const { return cases_[id]; }
    long open_case_count() const { return open_cases_; }
    long arrived_count() const { return arrived_; }
    long completed_count() const { return completed_; }

    CaseProgress case_progress_excluding(long instance_id) const {
        const auto& inst = instances_[instance_id];
        const auto& c = cases_[inst.case_id];
        return CaseProgress{c.active_instances - 1, c.join_fill};
    }

    bool has_possible_assignment() const {
        if (total_waiting_ == 0 || idle_count_ == 0) return false;
        std::uint64_t waiting_mask = 0;
        for (std::size_t a = 0; a < waiting_.size(); ++a)
            if (!waiting_[a].empty()) waiting_mask |= 1ULL << a;
        for (int r = 0; r < model_->resource_count(); ++r)
            if (is_idle(r) && (model_->resource_mask[r] & waiting_mask)) return true;
        return false;
    }

    /// Aggregated decision surface; rebuilt on demand, ordered by
    /// (resource index, activity index).
    const std::vector<AssignmentOption>& options() {
        if (options_dirty_) {
            options_.clear();
            for (int r = 0; r < model_->resource_count(); ++r) {
                if (!is_idle(r)) continue;
                for (int a : eligible_activities_[r]) {
                    if (waiting_[a].empty()) continue;
                    long front = waiting_[a].front();
                    options_.push_back({r, a, model_->mean(r, a),
                                        static_cast<long>(waiting_[a].size()), front,
                                        instances_[front].creation_time});
                }
            }
            options_dirty_ = false;
        }
        return options_;
    }

    /// The instance-level set D of Def. 6, materialized. Intended for tests
    /// and small states; policies should consume options() instead.
    std::vector<std::pair<int, long>> possible_assignments() const {
        std::vector<std::pair<int, long>> d;
        for (int r = 0; r < model_->resource_count(); ++r) {
            if (!is_idle(r)) continue;
            for (std::size_t a = 0; a < waiting_.size(); ++a) {
                if (!model_->is_eligible(r, static_cast<int>(a))) continue;
                for (long k : waiting_[a]) d.emplace_back(r, k);
            }
        }
        return d;
    }

    // ------------------------------------------------------------------
    // transitions
    // ------------------------------------------------------------------

    /// Assigns resource r to waiting instance k (Def. 7): k leaves K, r moves
    /// to the busy set, and a completion event is scheduled at
    /// t + Exp(mean(r, activity(k))). The clock does not move.
    void apply_assignment(int resource, long instance_id) {
        if (resource < 0 || resource >= model_->resource_count() || !is_idle(resource))
            throw InfeasibleAssignment("resource is not available");
        if (instance_id < 0 || instance_id >= static_cast<long>(instances_.size()))
            throw InfeasibleAssignment("unknown instance");
        auto& inst = instances_[instance_id];
        if (inst.state != InstanceState::Waiting)
            throw InfeasibleAssignment("instance is not waiting");
        if (!model_->is_eligible(resource, inst.activity))
            throw InfeasibleAssignment("resource not eligible for " +
                                       model_->activities[inst.activity].id);

        auto& q = waiting_[inst.activity];
        if (!q.empty() && q.front() == instance_id) {
            q.pop_front();
        } else {
            for (auto it = q.begin(); it != q.end(); ++it)
                if (*it == instance_id) {
                    q.erase(it);
                    break;
                }
        }
        --total_waiting_;

        inst.state = InstanceState::Processing;
        inst.start_time = t_;
        inst.resource = resource;
        busy_instance_[resource] = instance_id;
        busy_since_[resource] = t_;
        --idle_count_;
        ++assignments_;
        if (opts_.record_trace)
            trace_.push_back({inst.activity, inst.case_id, t_, resource, Lifecycle::Start});

        double service = rng_service_.exponential_mean(model_->mean(resource, inst.activity));
        push_event(t_ + service, EventKind::Completion, instance_id);
        options_dirty_ = true;
    }

    /// Processes events (completions, arrivals, case routing) until at least
    /// one assignment is possible or the horizon is reached.
    AdvanceResult advance_to_next_decision(double horizon) {
        for (;;) {
            if (has_possible_assignment()) return AdvanceResult::DecisionPoint;
            if (events_.empty() || events_.top().time >= horizon) {
                t_ = horizon;
                return AdvanceResult::HorizonReached;
            }
            process_next_event();
        }
    }

    /// Deliberately makes no assignment: evolves until (K, R+) differs from
    /// its value at the call, then continues to the next decision point.
    AdvanceResult postpone(double horizon) {
        ++postpones_;
        long v0 = state_change_version_;
        while (state_change_version_ == v0) {
            if (events_.empty() || events_.top().time >= horizon) {
                t_ = horizon;
                return AdvanceResult::HorizonReached;
            }
            process_next_event();
        }
        return advance_to_next_decision(horizon);
    }

    /// Completion reward accumulated since the last call (sum over cases
    /// completed of 1/(cycle+1)).
    double take_reward() {
        double r = reward_accum_;
        reward_accum_ = 0.0;
        return r;
    }

    /// Finalizes the episode at the horizon: open cases are truncated and
    /// contribute (horizon - arrival) to the cycle-time statistics, busy
    /// resources contribute their elapsed processing to busy time.
    EpisodeStats finish(double horizon) {
        EpisodeStats s;
        s.horizon = horizon;
        s.arrived = arrived_;
        s.completed = completed_;
        s.assignments = assignments_;
        s.postpones = postpones_;
        s.reward_total = reward_total_;
        s.busy_time = busy_accum_;
        for (int r = 0; r < model_->resource_count(); ++r)
            if (!is_idle(r)) s.busy_time[r] += horizon - busy_since_[r];
        s.cases.reserve(cases_.size());
        double sum = 0.0;
        for (const auto& c : cases_) {
            double cycle = c.open ? horizon - c.arrival : c.completion - c.arrival;
            s.cases.push_back({c.id, c.arrival, cycle, !c.open});
            sum += cycle;
        }
        s.mean_cycle_time = cases_.empty() ? 0.0 : sum / static_cast<double>(cases_.size());
        s.trace = std::move(trace_);
        return s;
    }

    static double completion_reward(double cycle_time) { return 1.0 / (cycle_time + 1.0); }

  private:
    enum class EventKind : int { Completion = 0, Arrival = 1 };

    struct SimEvent {
        double time;
        EventKind kind;
        std::uint64_t seq;
        long payload; // instance id for completions
        bool operator>(const SimEvent& o) const {
            if (time != o.time) return time > o.time;
            if (kind != o.kind) return kind > o.kind;
            return seq > o.seq;
        }
    };

    void push_event(double time, EventKind kind, long payload) {
        events_.push({time, kind, event_seq_++, payload});
    }

    void schedule_arrival(double time) { push_event(time, EventKind::Arrival, -1); }

    void process_next_event() {
        SimEvent ev = events_.top();
        events_.pop();
        t_ = ev.time;
        ++event_version_;
        if (ev.kind == EventKind::Arrival) {
            long cid = static_cast<long>(cases_.size());
            cases_.push_back({cid, t_, -1.0, true, 1, 0,
                              std::vector<int>(model_->routing.join_count, 0)});
            ++arrived_;
            ++open_cases_;
            propagate_tokens(cases_.back(), {model_->routing.start});
            schedule_arrival(arrival_sampler_.next(t_));
            ++state_change_version_;
        } else {
            long kid = ev.payload;
            auto& inst = instances_[kid];
            assert(inst.state == InstanceState::Processing);
            int r = inst.resource;
            busy_accum_[r] += t_ - busy_since_[r];
            busy_instance_[r] = -1;
            ++idle_count_;
            inst.state = InstanceState::Complete;
            if (opts_.record_trace)
                trace_.push_back({inst.activity, inst.case_id, t_, r, Lifecycle::Complete});
            auto& c = cases_[inst.case_id];
            --c.active_instances;
            propagate_tokens(c, {model_->routing.nodes[inst.node].next[0]});
            ++state_change_version_;
        }
        options_dirty_ = true;
    }

    // Moves case tokens through the routing graph, spawning waiting instances
    // at activity nodes, duplicating at and_splits, synchronizing at
    // and_joins, and completing the case when its last token reaches an end.
    void propagate_tokens(CaseData& c, std::vector<int> stack) {
        const auto& g = model_->routing;
        while (!stack.empty()) {
            int node = stack.back();
            stack.pop_back();
            const auto& n = g.nodes[node];
            switch (n.type) {
            case NodeType::Start:
                stack.push_back(n.next[0]);
                break;
            case NodeType::ActivityNode: {
                long kid = static_cast<long>(instances_.size());
                instances_.push_back({kid, c.id, n.activity, node, InstanceState::Waiting, t_,
                                      0.0, -1});
                waiting_[n.activity].push_back(kid);
                ++total_waiting_;
                ++c.active_instances;
                break;
            }
            case NodeType::XorSplit: {
                double u = rng_routing_.uniform();
                double acc = 0.0;
                int chosen = n.next.back();
                for (std::size_t b = 0; b < n.next.size(); ++b) {
                    acc += n.prob[b];
                    if (u < acc) {
                        chosen = n.next[b];
                        break;
                    }
                }
                stack.push_back(chosen);
                break;
            }
            case NodeType::AndSplit:
                c.live_tokens += static_cast<int>(n.next.size()) - 1;
                for (int s : n.next) stack.push_back(s);
                break;
            case NodeType::AndJoin: {
                int slot = g.join_slot[node];
                if (++c.join_fill[slot] == g.join_arity[node]) {
                    c.join_fill[slot] = 0;
                    c.live_tokens -= g.join_arity[node] - 1;
                    stack.push_back(n.next[0]);
                }
                break;
            }
            case NodeType::End:
                if (--c.live_tokens == 0) {
                    assert(c.active_instances == 0);
                    c.open = false;
                    c.completion = t_;
                    --open_cases_;
                    ++completed_;
                    double reward = completion_reward(c.completion - c.arrival);
                    reward_accum_ += reward;
                    reward_total_ += reward;
                }
                break;
            }
        }
    }

    const ProcessModel* model_;
    SimOptions opts_;
    std::uint64_t seed_;
    ArrivalSampler arrival_sampler_;
    Rng rng_service_;
    Rng rng_routing_;
    Rng rng_policy_;

    double t_ = 0.0;
    std::vector<CaseData> cases_;
    std::vector<ActivityInstance> instances_;
    std::vector<std::deque<long>> waiting_;
    long total_waiting_ = 0;
    std::vector<long> busy_instance_;
    std::vector<double> busy_since_;
    std::vector<double> busy_accum_;
    int idle_count_ = 0;
    long open_cases_ = 0;
    long arrived_ = 0;
    long completed_ = 0;
    long assignments_ = 0;
    long postpones_ = 0;
    double reward_accum_ = 0.0;
    double reward_total_ = 0.0;
    std::vector<Event> trace_;

    std::priority_queue<SimEvent, std::vector<SimEvent>, std::greater<>> events_;
    std::uint64_t event_seq_ = 0;
    long event_version_ = 0;
    long state_change_version_ = 0;

    std::vector<AssignmentOption> options_;
    bool options_dirty_ = true;
    std::vector<std::vector<int>> eligible_activities_; // per resource, cached
};

} // namespace bpsim
