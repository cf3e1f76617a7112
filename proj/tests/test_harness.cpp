#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "bpsim/harness.hpp"
#include "bpsim/policy_factory.hpp"
#include "bpsim/policies.hpp"
#include "bpsim/scenarios.hpp"
#include "bpsim/stats.hpp"
#include "helpers.hpp"

using namespace bpsim;

TEST_CASE("student t machinery matches tabulated values") {
    CHECK(stats::student_t_quantile(0.975, 20) == doctest::Approx(2.086).epsilon(1e-3));
    CHECK(stats::student_t_quantile(0.975, 10) == doctest::Approx(2.228).epsilon(1e-3));
    CHECK(stats::student_t_quantile(0.975, 1) == doctest::Approx(12.706).epsilon(1e-3));
    CHECK(stats::student_t_cdf(0.0, 7) == doctest::Approx(0.5));
    CHECK(stats::student_t_cdf(1.812, 10) == doctest::Approx(0.95).epsilon(1e-3));
    // two-sided p at the 0.05 quantile is 0.05
    CHECK(stats::student_t_two_sided_p(2.086, 20) == doctest::Approx(0.05).epsilon(1e-3));
    // quantile inverts the cdf
    for (double p : {0.6, 0.8, 0.95, 0.999})
        CHECK(stats::student_t_cdf(stats::student_t_quantile(p, 13), 13) ==
              doctest::Approx(p).epsilon(1e-9));
}

TEST_CASE("t test on hand-checkable samples") {
    std::vector<double> a = {1.0, 2.0, 3.0};
    auto r = stats::two_sample_t_test(a, a);
    CHECK(r.t == 0.0);
    CHECK(r.p == doctest::Approx(1.0));

    // constant equal samples: degenerate variance, p = 1
    std::vector<double> c1 = {2.0, 2.0, 2.0}, c2 = {2.0, 2.0, 2.0};
    r = stats::two_sample_t_test(c1, c2);
    CHECK(r.p == 1.0);

    // clearly separated normals
    Rng rng(5);
    std::vector<double> x, y;
    for (int i = 0; i < 100; ++i) {
        x.push_back(rng.normal());
        y.push_back(5.0 + rng.normal());
    }
    r = stats::two_sample_t_test(x, y);
    CHECK(r.p < 1e-10);

    auto welch = stats::two_sample_t_test(x, y, true);
    CHECK(welch.p < 1e-10);
}

TEST_CASE("ci half width is zero for identical samples and shrinks like 1/sqrt(n)") {
    CHECK(stats::ci95_half_width({3.0, 3.0}) == 0.0);

    // quadrupling n roughly halves the half-width (averaged over 20 repeats)
    auto m = testutil::mm1_model(0.5, 1.0);
    double ratio_sum = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
        SptPolicy spt;
        std::vector<double> small, large;
        std::uint64_t base = 10000 + rep * 500;
        for (int i = 0; i < 100; ++i) {
            double v = run_episode(m, spt, 400.0, base + i).mean_cycle_time;
            if (i < 25) small.push_back(v);
            large.push_back(v);
        }
        ratio_sum += stats::ci95_half_width(small) / stats::ci95_half_width(large);
    }
    double mean_ratio = ratio_sum / 20.0; // ideal: 2.0
    CHECK(mean_ratio > 1.4);
    CHECK(mean_ratio < 2.6);
}

TEST_CASE("evaluate aggregates seeded replications and is reproducible") {
    auto m = builtin_scenario("low_utilization", 0.5);
    auto factory = [] { return spt_policy(); };
    auto a = evaluate(m, factory, 10, 300.0, 42);
    auto b = evaluate(m, factory, 10, 300.0, 42);
    CHECK(a.rep_means == b.rep_means);
    CHECK(a.mean == doctest::Approx(stats::mean(a.rep_means)));
    CHECK(a.n == 10);
    CHECK(a.policy == "spt");
    CHECK(a.model == "low_utilization");
    CHECK(a.lambda == 0.5);

    // parallel execution gives identical numbers
    auto c = evaluate(m, factory, 10, 300.0, 42, 2);
    CHECK(c.rep_means == a.rep_means);
    for (std::size_t r = 0; r < a.utilization.size(); ++r)
        CHECK(c.utilization[r] == doctest::Approx(a.utilization[r]).epsilon(1e-12));

    CHECK_THROWS_AS(evaluate(m, factory, 1, 300.0, 42), Error);
}

TEST_CASE("common random numbers: same base seed gives identical arrival streams") {
    auto m = builtin_scenario("high_utilization", 0.5);
    SptPolicy spt;
    RandomPolicy rnd(3);
    auto a = run_episode(m, spt, 300.0, 77);
    auto b = run_episode(m, rnd, 300.0, 77);
    REQUIRE(a.arrived == b.arrived);
    for (std::size_t i = 0; i < a.cases.size(); ++i)
        CHECK(a.cases[i].arrival == b.cases[i].arrival);
}

TEST_CASE("compare flags significance and tied_best marks statistical ties") {
    auto m = builtin_scenario("high_utilization", 0.5);
    auto spt = evaluate(m, [] { return spt_policy(); }, 30, 1000.0, 7);
    auto rnd = evaluate(m, [] { return random_policy(1); }, 30, 1000.0, 7);
    auto cmp = compare(spt, rnd);
    CHECK(cmp.p >= 0.0);
    CHECK(cmp.p <= 1.0);
    CHECK(cmp.a == "spt");
    CHECK(cmp.b == "random");

    auto self = compare(spt, spt);
    CHECK(self.p == doctest::Approx(1.0));
    CHECK_FALSE(self.significant);

    auto flags = tied_best_flags({spt, spt, rnd});
    CHECK(flags[0]);
    CHECK(flags[1]); // identical to the best: tied
}

TEST_CASE("sweep with one policy and one rate equals evaluate") {
    auto make_model = [](double lambda) { return builtin_scenario("low_utilization", lambda); };
    auto policies_for = [](double, const ProcessModel&) {
        std::vector<PolicyFactory> fs;
        fs.push_back([] { return spt_policy(); });
        return fs;
    };
    auto cells = sweep(make_model, {0.5}, policies_for, 5, 200.0, 11);
    REQUIRE(cells.size() == 1);
    auto direct = evaluate(make_model(0.5), [] { return spt_policy(); }, 5, 200.0, 11);
    CHECK(cells[0].report.rep_means == direct.rep_means);
    CHECK(cells[0].lambda == 0.5);
}

TEST_CASE("csv export and re-import reproduce the values") {
    auto m = builtin_scenario("low_utilization", 0.5);
    std::vector<EvalReport> reports;
    reports.push_back(evaluate(m, [] { return spt_policy(); }, 5, 200.0, 3));
    reports.push_back(evaluate(m, [] { return fifo_policy(); }, 5, 200.0, 3));

    std::ostringstream out;
    export_long_csv(reports, out);
    std::istringstream in(out.str());
    auto back = import_long_csv(in);
    REQUIRE(back.size() == reports.size());
    for (std::size_t i = 0; i < reports.size(); ++i) {
        CHECK(back[i].policy == reports[i].policy);
        CHECK(back[i].rep_means == reports[i].rep_means); // exact via %.17g
        CHECK(back[i].mean == doctest::Approx(reports[i].mean).epsilon(1e-12));
    }

    // empty table: header only
    std::ostringstream empty;
    export_long_csv({}, empty);
    CHECK(empty.str() == "model,policy,lambda,replication,mean_cycle_time\n");

    std::ostringstream sum;
    export_summary_csv(reports, sum);
    std::string text = sum.str();
    long lines = std::count(text.begin(), text.end(), '\n');
    CHECK(lines == 3); // header + 2 reports
}

TEST_CASE("a six-scenario five-policy table has thirty summary rows") {
    std::vector<EvalReport> reports;
    for (const auto& name : {"low_utilization", "high_utilization", "slow_server",
                             "slow_downstream", "n_network", "parallel"}) {
        auto m = builtin_scenario(name, 0.5);
        for (const auto& spec : {"spt", "fifo", "random", "matching"}) {
            auto factory = [&] { return make_policy(spec, m); };
            reports.push_back(evaluate(m, factory, 2, 100.0, 5));
        }
        reports.push_back(evaluate(m, [] { return svfa_policy(WeightVector(1, 0, 0, 0, 0, 0, 100)); },
                                   2, 100.0, 5));
    }
    std::ostringstream out;
    export_summary_csv(reports, out);
    std::string text = out.str();
    long lines = std::count(text.begin(), text.end(), '\n');
    CHECK(lines == 31); // header + 6 x 5
}
