#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "bpsim/errors.hpp"

namespace bpsim::stats {

inline double mean(const std::vector<double>& xs) {
    if (xs.empty()) return 0.0;
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

/// Unbiased sample variance (n-1 denominator).
inline double sample_variance(const std::vector<double>& xs) {
    if (xs.size() < 2) return 0.0;
    double m = mean(xs);
    double s = 0.0;
    for (double x : xs) s += (x - m) * (x - m);
    return s / static_cast<double>(xs.size() - 1);
}

inline double normal_pdf(double x) {
    return std::exp(-0.5 * x * x) / 2.5066282746310002;
}

inline double normal_cdf(double x) {
    return 0.5 * std::erfc(-x / 1.4142135623730951);
}

namespace detail {

// Continued fraction for the regularized incomplete beta function.
inline double betacf(double a, double b, double x) {
    constexpr int kMaxIter = 300;
    constexpr double kEps = 3e-14;
    constexpr double kFpMin = 1e-300;
    double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return h;
}

} // namespace detail

/// Regularized incomplete beta function I_x(a, b).
inline double inc_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    double bt = std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                         a * std::log(x) + b * std::log1p(-x));
    if (x < (a + 1.0) / (a + b + 2.0)) return bt * detail::betacf(a, b, x) / a;
    return 1.0 - bt * detail::betacf(b, a, 1.0 - x) / b;
}

inline double student_t_cdf(double t, double df) {
    if (df <= 0.0) return std::numeric_limits<double>::quiet_NaN();
    double x = df / (df + t * t);
    double p = 0.5 * inc_beta(0.5 * df, 0.5, x);
    return t > 0.0 ? 1.0 - p : p;
}

/// Two-sided p-value for an observed t statistic.
inline double student_t_two_sided_p(double t, double df) {
    if (!std::isfinite(t)) return 0.0;
    return inc_beta(0.5 * df, 0.5, df / (df + t * t));
}

/// Quantile of the Student t distribution, p in (0, 1). Bisection on the CDF.
inline double student_t_quantile(double p, double df) {
    if (p <= 0.0 || p >= 1.0) throw Error("t quantile requires p in (0,1)");
    if (p == 0.5) return 0.0;
    bool upper = p > 0.5;
    double target = upper ? p : 1.0 - p;
    double lo = 0.0, hi = 1.0;
    while (student_t_cdf(hi, df) < target) hi *= 2.0;
    for (int i = 0; i < 200; ++i) {
        double mid = 0.5 * (lo + hi);
        if (student_t_cdf(mid, df) < target)
            lo = mid;
        else
            hi = mid;
    }
    double q = 0.5 * (lo + hi);
    return upper ? q : -q;
}

struct TTestResult {
    double t = 0.0;
    double df = 0.0;
    double p = 1.0;
};

/// Student's two-sample t-test with pooled variance. Welch's variant uses
/// per-sample variances and the Satterthwaite df.
inline TTestResult two_sample_t_test(const std::vector<double>& a, const std::vector<double>& b,
                                     bool welch = false) {
    if (a.size() < 2 || b.size() < 2) throw Error("t-test needs at least 2 samples per group");
    double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    double ma = mean(a), mb = mean(b);
    double va = sample_variance(a), vb = sample_variance(b);
    TTestResult r;
    if (welch) {
        double se2 = va / na + vb / nb;
        if (se2 == 0.0) {
            r.t = 0.0;
            r.df = na + nb - 2.0;
            r.p = (ma == mb) ? 1.0 : 0.0;
            return r;
        }
        r.t = (ma - mb) / std::sqrt(se2);
        r.df = se2 * se2 /
               ((va / na) * (va / na) / (na - 1.0) + (vb / nb) * (vb / nb) / (nb - 1.0));
    } else {
        double sp2 = ((na - 1.0) * va + (nb - 1.0) * vb) / (na + nb - 2.0);
        r.df = na + nb - 2.0;
        if (sp2 == 0.0) {
            // degenerate: both samples constant
            r.t = 0.0;
            r.p = (ma == mb) ? 1.0 : 0.0;
            if (ma != mb) r.t = std::numeric_limits<double>::infinity();
            return r;
        }
        r.t = (ma - mb) / std::sqrt(sp2 * (1.0 / na + 1.0 / nb));
    }
    r.p = student_t_two_sided_p(r.t, r.df);
    return r;
}

/// Half-width of the 95% confidence interval on the mean of xs.
inline double ci95_half_width(const std::vector<double>& xs) {
    if (xs.size() < 2) return 0.0;
    double s = std::sqrt(sample_variance(xs));
    double q = student_t_quantile(0.975, static_cast<double>(xs.size() - 1));
    return q * s / std::sqrt(static_cast<double>(xs.size()));
}

} // namespace bpsim::stats
