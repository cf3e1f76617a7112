#pragma once

#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "bpsim/policy.hpp"
#include "bpsim/stats.hpp"

namespace bpsim {

using PolicyFactory = std::function<PolicyPtr()>;

/// Replicated evaluation of one (model, policy) pair: per-replication mean
/// cycle times, their grand mean, the 95% CI half-width, and mean per-
/// resource utilization.
struct EvalReport {
    std::string policy;
    std::string model;
    double lambda = 0.0;
    int n = 0;
    double horizon = 0.0;
    std::uint64_t base_seed = 0;
    std::vector<double> rep_means;     // one entry per replication
    double mean = 0.0;
    double ci_half = 0.0;
    std::vector<double> utilization;   // per resource, averaged over replications
};

struct Comparison {
    std::string a;
    std::string b;
    double t = 0.0;
    double df = 0.0;
    double p = 1.0;
    bool significant = false; // p < 0.05: the two methods differ
};

/// Runs n seeded episodes (seeds base_seed .. base_seed+n-1) and aggregates.
/// Replications are independent; `jobs` > 1 runs them on worker threads with
/// one policy instance each. Results are indexed by seed, so the report is a
/// pure function of (model, policy, n, horizon, base_seed).
inline EvalReport evaluate(const ProcessModel& model, const PolicyFactory& make_policy, int n,
                           double horizon, std::uint64_t base_seed, int jobs = 1) {
    if (n < 2) throw Error("evaluate needs n >= 2 replications");
    EvalReport rep;
    rep.model = model.name;
    rep.lambda = model.arrivals.mean_rate();
    rep.n = n;
    rep.horizon = horizon;
    rep.base_seed = base_seed;
    rep.rep_means.resize(n);
    rep.utilization.assign(model.resource_count(), 0.0);

    std::vector<std::vector<double>> utils(n);
    auto run_range = [&](int lo, int hi) {
        auto policy = make_policy();
        for (int i = lo; i < hi; ++i) {
            auto stats = run_episode(model, *policy, horizon,
                                     base_seed + static_cast<std::uint64_t>(i));
            rep.rep_means[i] = stats.mean_cycle_time;
            utils[i].resize(model.resource_count());
            for (int r = 0; r < model.resource_count(); ++r)
                utils[i][r] = stats.utilization(r);
        }
    };

    jobs = std::max(1, std::min(jobs, n));
    if (jobs == 1) {
        run_range(0, n);
    } else {
        std::vector<std::thread> workers;
        int chunk = (n + jobs - 1) / jobs;
        for (int j = 0; j < jobs; ++j) {
            int lo = j * chunk, hi = std::min(n, lo + chunk);
            if (lo >= hi) break;
            workers.emplace_back(run_range, lo, hi);
        }
        for (auto& w : workers) w.join();
    }

    {
        auto policy = make_policy();
        rep.policy = policy->name();
    }
    rep.mean = stats::mean(rep.rep_means);
    rep.ci_half = stats::ci95_half_width(rep.rep_means);
    for (int i = 0; i < n; ++i)
        for (int r = 0; r < model.resource_count(); ++r) rep.utilization[r] += utils[i][r] / n;
    return rep;
}

inline EvalReport evaluate(const ProcessModel& model, Policy& policy, int n, double horizon,
                           std::uint64_t base_seed) {
    if (n < 2) throw Error("evaluate needs n >= 2 replications");
    EvalReport rep;
    rep.policy = policy.name();
    rep.model = model.name;
    rep.lambda = model.arrivals.mean_rate();
    rep.n = n;
    rep.horizon = horizon;
    rep.base_seed = base_seed;
    rep.utilization.assign(model.resource_count(), 0.0);
    for (int i = 0; i < n; ++i) {
        auto stats = run_episode(model, policy, horizon, base_seed + static_cast<std::uint64_t>(i));
        rep.rep_means.push_back(stats.mean_cycle_time);
        for (int r = 0; r < model.resource_count(); ++r)
            rep.utilization[r] += stats.utilization(r) / n;
    }
    rep.mean = stats::mean(rep.rep_means);
    rep.ci_half = stats::ci95_half_width(rep.rep_means);
    return rep;
}

/// Student's t-test between the replication samples of two reports.
inline Comparison compare(const EvalReport& a, const EvalReport& b, bool welch = false) {
    if (a.rep_means.size() < 2 || b.rep_means.size() < 2)
        throw Error("compare needs raw replication samples on both sides");
    Comparison c;
    c.a = a.policy;
    c.b = b.policy;
    auto t = stats::two_sample_t_test(a.rep_means, b.rep_means, welch);
    c.t = t.t;
    c.df = t.df;
    c.p = t.p;
    c.significant = c.p < 0.05;
    return c;
}

/// Tied-best marking: the best method plus every method whose p-value
/// against the best is >= 0.05.
inline std::vector<bool> tied_best_flags(const std::vector<EvalReport>& reports,
                                         bool welch = false) {
    std::vector<bool> flags(reports.size(), false);
    if (reports.empty()) return flags;
    std::size_t best = 0;
    for (std::size_t i = 1; i < reports.size(); ++i)
        if (reports[i].mean < reports[best].mean) best = i;
    flags[best] = true;
    for (std::size_t i = 0; i < reports.size(); ++i) {
        if (i == best) continue;
        flags[i] = compare(reports[i], reports[best], welch).p >= 0.05;
    }
    return flags;
}

struct SweepCell {
    double lambda = 0.0;
    EvalReport report;
};

/// Evaluates every (lambda, policy) combination. `make_model` builds the
/// model for a rate; `policies_for` supplies the policy set per rate, which
/// is where per-rate (re)training hooks in when a training directive is
/// supplied.
inline std::vector<SweepCell> sweep(
    const std::function<ProcessModel(double)>& make_model, const std::vector<double>& lambdas,
    const std::function<std::vector<PolicyFactory>(double, const ProcessModel&)>& policies_for,
    int n, double horizon, std::uint64_t base_seed, int jobs = 1) {
    std::vector<SweepCell> cells;
    for (double lambda : lambdas) {
        ProcessModel model = make_model(lambda);
        for (const auto& factory : policies_for(lambda, model))
            cells.push_back({lambda, evaluate(model, factory, n, horizon, base_seed, jobs)});
    }
    return cells;
}

// ---------------------------------------------------------------------------
// CSV export / import. Doubles are written with %.17g so a re-import
// reproduces the values exactly.
// ---------------------------------------------------------------------------

namespace detail {

inline std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace detail

/// Summary layout: one row per report.
inline void export_summary_csv(const std::vector<EvalReport>& reports, std::ostream& out) {
    out << "model,policy,lambda,n,horizon,base_seed,mean_cycle_time,ci95_half,max_utilization\n";
    for (const auto& r : reports) {
        double max_util = 0.0;
        for (double u : r.utilization) max_util = std::max(max_util, u);
        out << r.model << ',' << r.policy << ',' << detail::fmt_double(r.lambda) << ',' << r.n
            << ',' << detail::fmt_double(r.horizon) << ',' << r.base_seed << ','
            << detail::fmt_double(r.mean) << ',' << detail::fmt_double(r.ci_half) << ','
            << detail::fmt_double(max_util) << '\n';
    }
}

/// Long layout: one row per (model, policy, lambda, replication), plot-ready.
inline void export_long_csv(const std::vector<EvalReport>& reports, std::ostream& out) {
    out << "model,policy,lambda,replication,mean_cycle_time\n";
    for (const auto& r : reports)
        for (std::size_t i = 0; i < r.rep_means.size(); ++i)
            out << r.model << ',' << r.policy << ',' << detail::fmt_double(r.lambda) << ',' << i
                << ',' << detail::fmt_double(r.rep_means[i]) << '\n';
}

inline void export_comparisons_csv(const std::vector<Comparison>& comparisons,
                                   std::ostream& out) {
    out << "a,b,t,df,p,significant\n";
    for (const auto& c : comparisons)
        out << c.a << ',' << c.b << ',' << detail::fmt_double(c.t) << ','
            << detail::fmt_double(c.df) << ',' << detail::fmt_double(c.p) << ','
            << (c.significant ? 1 : 0) << '\n';
}

inline void export_to_file(const std::function<void(std::ostream&)>& writer,
                           const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    writer(out);
    if (!out) throw IoError("failed writing " + path);
}

/// Re-imports a long-layout CSV into skeleton reports (model, policy, lambda,
/// replication means). Groups consecutive rows by (model, policy, lambda).
inline std::vector<EvalReport> import_long_csv(std::istream& in) {
    std::vector<EvalReport> reports;
    std::string line;
    if (!std::getline(in, line) || line.find("model,policy,lambda") != 0)
        throw ParseError("long csv: unexpected header");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string model, policy, lambda_s, rep_s, value_s;
        if (!std::getline(ss, model, ',') || !std::getline(ss, policy, ',') ||
            !std::getline(ss, lambda_s, ',') || !std::getline(ss, rep_s, ',') ||
            !std::getline(ss, value_s, ','))
            throw ParseError("long csv: malformed row: " + line);
        double lambda = std::stod(lambda_s);
        double value = std::stod(value_s);
        if (reports.empty() || reports.back().model != model ||
            reports.back().policy != policy || reports.back().lambda != lambda) {
            EvalReport r;
            r.model = model;
            r.policy = policy;
            r.lambda = lambda;
            reports.push_back(std::move(r));
        }
        reports.back().rep_means.push_back(value);
    }
    for (auto& r : reports) {
        r.n = static_cast<int>(r.rep_means.size());
        r.mean = stats::mean(r.rep_means);
        r.ci_half = r.n >= 2 ? stats::ci95_half_width(r.rep_means) : 0.0;
    }
    return reports;
}

} // namespace bpsim
