#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "bpsim/policy.hpp"

namespace bpsim {

/// The six hand-crafted assignment features behind the score function.
struct FeatureVector {
    double mean_assignment = 0.0; // expected processing time of (r, k)
    double var_assignment = 0.0;  // its variance (= mean^2, exponential service)
    int activity_rank = 1;        // rank of k among waiting instances servable by r
    int resource_rank = 1;        // rank of r among idle resources eligible for k
    double prob_fin = 0.0;        // probability the assignment completes the case
    long queue_length = 0;        // waiting instances of k's activity
};

/// The seven learned weights w1..w7; w7 is the postpone threshold. All
/// weights live in [0, 100].
struct WeightVector {
    std::array<double, 7> w{};

    static constexpr double kLow = 0.0;
    static constexpr double kHigh = 100.0;

    WeightVector() = default;
    WeightVector(double w1, double w2, double w3, double w4, double w5, double w6, double w7)
        : w{w1, w2, w3, w4, w5, w6, w7} {
        check();
    }
    static WeightVector from_vector(const std::vector<double>& v) {
        if (v.size() != 7) throw Error("weight vector must have 7 entries");
        WeightVector wv;
        for (int i = 0; i < 7; ++i) wv.w[i] = v[i];
        wv.check();
        return wv;
    }

    double threshold() const { return w[6]; }

    void check() const {
        for (double x : w)
            if (!(x >= kLow && x <= kHigh))
                throw Error("weights must lie in [0, 100]");
    }
};

namespace detail {

inline int activity_rank(const Simulation& sim, const ProcessModel& m, int resource,
                         int activity) {
    // competition ranking: 1 + number of waiting instances servable by r whose
    // mean is strictly lower
    double my_mean = m.mean(resource, activity);
    long below = 0;
    for (int a = 0; a < m.activity_count(); ++a) {
        if (!m.is_eligible(resource, a)) continue;
        if (m.mean(resource, a) < my_mean) below += sim.waiting_count(a);
    }
    return static_cast<int>(below) + 1;
}

inline int resource_rank(const Simulation& sim, const ProcessModel& m, int resource,
                         int activity) {
    double my_mean = m.mean(resource, activity);
    int below = 0;
    for (int r = 0; r < m.resource_count(); ++r) {
        if (r == resource || !sim.is_idle(r) || !m.is_eligible(r, activity)) continue;
        if (m.mean(r, activity) < my_mean) ++below;
    }
    return below + 1;
}

} // namespace detail

/// Computes the feature vector of one possible assignment (r, k).
inline FeatureVector compute_features(const Simulation& sim, const ProcessModel& m, int resource,
                                      long instance_id) {
    if (resource < 0 || resource >= m.resource_count() || !sim.is_idle(resource))
        throw InfeasiblePair("resource is not available");
    const auto& inst = sim.instance(instance_id);
    if (inst.state != InstanceState::Waiting || !m.is_eligible(resource, inst.activity))
        throw InfeasiblePair("instance is not a waiting instance servable by the resource");

    FeatureVector f;
    f.mean_assignment = m.mean(resource, inst.activity);
    f.var_assignment = m.variance(resource, inst.activity);
    f.activity_rank = detail::activity_rank(sim, m, resource, inst.activity);
    f.resource_rank = detail::resource_rank(sim, m, resource, inst.activity);
    f.prob_fin = prob_fin(m, sim.case_progress_excluding(instance_id), inst.activity);
    f.queue_length = sim.waiting_count(inst.activity);
    return f;
}

/// The linear score of an assignment. Lower is better; the first four terms
/// add (cheap, well-ranked work) and the last two subtract (finishing cases
/// and draining long queues are desirable).
inline double score(const WeightVector& w, const FeatureVector& f) {
    return w.w[0] * f.mean_assignment + w.w[1] * f.var_assignment +
           w.w[2] * static_cast<double>(f.activity_rank) +
           w.w[3] * static_cast<double>(f.resource_rank) - w.w[4] * f.prob_fin -
           w.w[5] * static_cast<double>(f.queue_length);
}

/// Score-based policy: scores every possible assignment, makes the lowest-
/// scoring one if that score is strictly below the threshold w7, postpones
/// otherwise. Assignments are made one at a time; scores are recomputed on
/// the new state.
class SvfaPolicy final : public Policy {
  public:
    explicit SvfaPolicy(WeightVector weights) : w_(weights) {}

    const WeightVector& weights() const { return w_; }

    void reset(std::uint64_t) override { prob_fin_cache_.clear(); }

    Decision decide(const DecisionContext& ctx, Rng&) override {
        const bool need_prob_fin = w_.w[4] != 0.0;
        double best_score = 0.0;
        int best_resource = -1, best_activity = -1;
        long best_instance = -1;
        double best_creation = 0.0;

        for (const auto& o : ctx.options) {
            double base = w_.w[0] * o.mean + w_.w[1] * o.mean * o.mean +
                          w_.w[2] * detail::activity_rank(ctx.sim, ctx.model, o.resource, o.activity) +
                          w_.w[3] * detail::resource_rank(ctx.sim, ctx.model, o.resource, o.activity) -
                          w_.w[5] * static_cast<double>(o.queue_length);

            // among instances of one activity only prob_fin varies; pick the
            // instance maximizing it (ties: earliest creation = queue order)
            long pick = o.front_instance;
            double pick_creation = o.front_creation;
            double pf = 0.0;
            if (need_prob_fin) {
                double best_pf = -1.0;
                for (long k : ctx.sim.waiting_queue(o.activity)) {
                    double p = cached_prob_fin(ctx, k);
                    if (p > best_pf) {
                        best_pf = p;
                        pick = k;
                        pick_creation = ctx.sim.instance(k).creation_time;
                        if (p >= 1.0) break;
                    }
                }
                pf = best_pf;
            }
            double s = base - w_.w[4] * pf;

            bool better = best_instance < 0 || s < best_score;
            if (!better && s == best_score) {
                if (o.resource != best_resource) better = o.resource < best_resource;
                else if (o.activity != best_activity) better = o.activity < best_activity;
                else better = pick_creation < best_creation;
            }
            if (better) {
                best_score = s;
                best_resource = o.resource;
                best_activity = o.activity;
                best_instance = pick;
                best_creation = pick_creation;
            }
        }

        if (best_score < w_.threshold()) return Decision::assign(best_resource, best_instance);
        return Decision::postpone();
    }

    std::string name() const override { return "svfa"; }

  private:
    double cached_prob_fin(const DecisionContext& ctx, long instance_id) {
        auto progress = ctx.sim.case_progress_excluding(instance_id);
        if (progress.other_active_instances > 0) return 0.0;
        int activity = ctx.sim.instance(instance_id).activity;
        std::uint64_t key = static_cast<std::uint64_t>(activity) * 1099511628211ULL;
        for (std::size_t j = 0; j < progress.join_fill.size(); ++j)
            key = (key ^ (static_cast<std::uint64_t>(progress.join_fill[j]) + j * 131 + 1)) *
                  1099511628211ULL;
        auto it = prob_fin_cache_.find(key);
        if (it != prob_fin_cache_.end()) return it->second;
        double p = prob_fin(ctx.model, progress, activity);
        prob_fin_cache_.emplace(key, p);
        return p;
    }

    WeightVector w_;
    std::unordered_map<std::uint64_t, double> prob_fin_cache_;
};

inline PolicyPtr svfa_policy(const WeightVector& w) { return std::make_unique<SvfaPolicy>(w); }

/// Weights file: seven labeled reals.
inline void save_weights(const WeightVector& w, const std::string& path) {
    nlohmann::ordered_json doc;
    for (int i = 0; i < 7; ++i) doc["w" + std::to_string(i + 1)] = w.w[i];
    std::ofstream out(path);
    if (!out) throw IoError("cannot write weights file " + path);
    out << doc.dump(2) << "\n";
}

inline WeightVector load_weights(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open weights file " + path);
    nlohmann::json doc;
    try {
        in >> doc;
        WeightVector w;
        for (int i = 0; i < 7; ++i) w.w[i] = doc.at("w" + std::to_string(i + 1)).get<double>();
        w.check();
        return w;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("weights file: ") + e.what());
    }
}

} // namespace bpsim
