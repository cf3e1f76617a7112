#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <vector>

#include "bpsim/rng.hpp"
#include "bpsim/stats.hpp"
#include "bpsim/svfa.hpp"

namespace bpsim {

struct BOConfig {
    int trials = 20;          // total objective evaluations
    int initial_design = 10;  // space-filling random points before the GP kicks in
    int sims_per_trial = 5000; // episodes per objective evaluation (SVFA training)
    double horizon = 5000.0;
    std::uint64_t seed = 0;
    double lower = 0.0;
    double upper = 100.0;
    bool random_search_only = false; // ablation: skip the surrogate entirely
    int acquisition_candidates = 2048;

    void check() const {
        if (initial_design < 2) throw Error("BO initial design needs at least 2 points");
        if (trials < initial_design)
            throw Error("BO needs trials >= initial design size");
        if (sims_per_trial < 1) throw Error("BO needs at least 1 simulation per trial");
        if (!(upper > lower)) throw Error("BO bounds must satisfy lower < upper");
    }
};

struct TrialRecord {
    int trial = 0;
    std::vector<double> x;
    double objective = 0.0;
    double incumbent = 0.0; // best objective observed up to and including this trial
};

struct BOResult {
    std::vector<double> best_x;
    double best_objective = 0.0;
    std::vector<TrialRecord> history;
    bool surrogate_failed = false;
};

namespace detail {

/// Gaussian process with a stationary squared-exponential kernel and an
/// observation-noise term. Inputs must already be scaled to the unit cube;
/// targets are standardized internally. Hyperparameters are chosen by
/// maximizing the marginal likelihood over a fixed grid.
class GaussianProcess {
  public:
    void fit(const std::vector<std::vector<double>>& xs, const std::vector<double>& ys) {
        n_ = static_cast<int>(xs.size());
        x_ = xs;
        y_mean_ = stats::mean(ys);
        y_std_ = std::sqrt(stats::sample_variance(ys));
        if (!(y_std_ > 1e-12)) y_std_ = 1.0;
        y_.resize(n_);
        for (int i = 0; i < n_; ++i) y_[i] = (ys[i] - y_mean_) / y_std_;

        static const double lengths[] = {0.05, 0.1, 0.2, 0.35, 0.6, 1.0, 1.75, 3.0};
        static const double signals[] = {0.25, 1.0, 4.0, 16.0, 64.0, 256.0};
        static const double noises[] = {1e-9, 1e-7, 1e-5, 1e-3, 1e-2, 5e-2};

        double best_ml = -std::numeric_limits<double>::infinity();
        double best_l = 0.0, best_s = 0.0, best_n = 0.0;
        bool any = false;
        for (double l : lengths)
            for (double s : signals)
                for (double nz : noises) {
                    double ml;
                    if (!try_fit(l, s, nz, ml)) continue;
                    any = true;
                    if (ml > best_ml) {
                        best_ml = ml;
                        best_l = l;
                        best_s = s;
                        best_n = nz;
                    }
                }
        if (!any) throw Error("GP fit failed for every hyperparameter choice");

        // local multiplicative refinement around the grid optimum
        for (int round = 0; round < 12; ++round) {
            bool improved = false;
            const double step = 1.4;
            double* dims[3] = {&best_l, &best_s, &best_n};
            const double lo[3] = {0.01, 0.01, 1e-10};
            const double hi[3] = {10.0, 1e4, 1.0};
            for (int d = 0; d < 3; ++d) {
                for (double factor : {step, 1.0 / step}) {
                    double v = std::clamp(*dims[d] * factor, lo[d], hi[d]);
                    if (v == *dims[d]) continue;
                    double saved = *dims[d];
                    *dims[d] = v;
                    double ml;
                    if (try_fit(best_l, best_s, best_n, ml) && ml > best_ml) {
                        best_ml = ml;
                        improved = true;
                    } else {
                        *dims[d] = saved;
                    }
                }
            }
            if (!improved) break;
        }

        double ml;
        if (!try_fit(best_l, best_s, best_n, ml))
            throw Error("GP fit failed at the selected hyperparameters");
    }

    void predict(const std::vector<double>& x, double& mu, double& sigma) const {
        std::vector<double> k(n_);
        for (int i = 0; i < n_; ++i) k[i] = kernel(x_[i], x);
        double m = 0.0;
        for (int i = 0; i < n_; ++i) m += k[i] * alpha_[i];
        // solve L v = k for the predictive variance
        std::vector<double> v = k;
        for (int i = 0; i < n_; ++i) {
            for (int j = 0; j < i; ++j) v[i] -= chol_[i * n_ + j] * v[j];
            v[i] /= chol_[i * n_ + i];
        }
        double var = signal_;
        for (int i = 0; i < n_; ++i) var -= v[i] * v[i];
        var = std::max(var, 1e-12);
        mu = m * y_std_ + y_mean_;
        sigma = std::sqrt(var) * y_std_;
    }

  private:
    double kernel(const std::vector<double>& a, const std::vector<double>& b) const {
        double d2 = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) d2 += (a[i] - b[i]) * (a[i] - b[i]);
        return signal_ * std::exp(-0.5 * d2 / (length_ * length_));
    }

    bool try_fit(double l, double s, double nz, double& log_ml) {
        double saved_l = length_, saved_s = signal_, saved_n = noise_;
        length_ = l;
        signal_ = s;
        noise_ = nz;
        std::vector<double> K(static_cast<std::size_t>(n_) * n_);
        for (int i = 0; i < n_; ++i)
            for (int j = 0; j <= i; ++j) {
                double v = kernel(x_[i], x_[j]);
                if (i == j) v += noise_ + 1e-10;
                K[i * n_ + j] = v;
            }
        // in-place Cholesky of the lower triangle
        for (int i = 0; i < n_; ++i) {
            for (int j = 0; j <= i; ++j) {
                double sum = K[i * n_ + j];
                for (int p = 0; p < j; ++p) sum -= K[i * n_ + p] * K[j * n_ + p];
                if (i == j) {
                    if (!(sum > 0.0)) {
                        length_ = saved_l;
                        signal_ = saved_s;
                        noise_ = saved_n;
                        return false;
                    }
                    K[i * n_ + j] = std::sqrt(sum);
                } else {
                    K[i * n_ + j] = sum / K[j * n_ + j];
                }
            }
        }
        // alpha = K^-1 y via forward + back substitution
        std::vector<double> a(y_);
        for (int i = 0; i < n_; ++i) {
            for (int j = 0; j < i; ++j) a[i] -= K[i * n_ + j] * a[j];
            a[i] /= K[i * n_ + i];
        }
        for (int i = n_ - 1; i >= 0; --i) {
            for (int j = i + 1; j < n_; ++j) a[i] -= K[j * n_ + i] * a[j];
            a[i] /= K[i * n_ + i];
        }
        double ml = 0.0;
        for (int i = 0; i < n_; ++i) ml -= 0.5 * y_[i] * a[i];
        for (int i = 0; i < n_; ++i) ml -= std::log(K[i * n_ + i]);
        ml -= 0.5 * n_ * std::log(6.283185307179586);
        if (!std::isfinite(ml)) {
            length_ = saved_l;
            signal_ = saved_s;
            noise_ = saved_n;
            return false;
        }
        chol_ = std::move(K);
        alpha_ = std::move(a);
        log_ml = ml;
        return true;
    }

    int n_ = 0;
    std::vector<std::vector<double>> x_;
    std::vector<double> y_;
    double y_mean_ = 0.0, y_std_ = 1.0;
    double length_ = 0.25, signal_ = 1.0, noise_ = 1e-4;
    std::vector<double> chol_;
    std::vector<double> alpha_;
};

inline double expected_improvement(double mu, double sigma, double best) {
    if (sigma <= 0.0) return std::max(best - mu, 0.0);
    double z = (best - mu) / sigma;
    return (best - mu) * stats::normal_cdf(z) + sigma * stats::normal_pdf(z);
}

/// Latin hypercube sample of `count` points in the unit cube.
inline std::vector<std::vector<double>> latin_hypercube(int count, int dim, Rng& rng) {
    std::vector<std::vector<double>> pts(count, std::vector<double>(dim));
    std::vector<int> strata(count);
    for (int d = 0; d < dim; ++d) {
        std::iota(strata.begin(), strata.end(), 0);
        for (int i = count - 1; i > 0; --i)
            std::swap(strata[i], strata[rng.integer(static_cast<std::uint64_t>(i) + 1)]);
        for (int i = 0; i < count; ++i)
            pts[i][d] = (strata[i] + rng.uniform()) / static_cast<double>(count);
    }
    return pts;
}

} // namespace detail

/// Minimizes a (possibly noisy) objective over [lower, upper]^dim with a
/// space-filling initial design followed by GP-surrogate / expected-
/// improvement proposals. Returns the incumbent: the lowest observed point.
/// A surrogate failure is not fatal; remaining trials fall back to random
/// search.
inline BOResult bayes_optimize(const std::function<double(const std::vector<double>&)>& objective,
                               int dim, const BOConfig& config) {
    config.check();
    int init = std::min(config.initial_design, config.trials);
    Rng rng(splitmix64(config.seed) ^ 0xb0b0ULL);

    auto to_domain = [&config](const std::vector<double>& u) {
        std::vector<double> x(u.size());
        for (std::size_t i = 0; i < u.size(); ++i)
            x[i] = config.lower + (config.upper - config.lower) * u[i];
        return x;
    };

    BOResult result;
    std::vector<std::vector<double>> unit_xs;
    std::vector<double> ys;
    double best = std::numeric_limits<double>::infinity();

    auto evaluate_point = [&](std::vector<double> u) {
        auto x = to_domain(u);
        double y = objective(x);
        unit_xs.push_back(std::move(u));
        ys.push_back(y);
        if (y < best) {
            best = y;
            result.best_x = x;
            result.best_objective = y;
        }
        result.history.push_back(
            {static_cast<int>(ys.size()), x, y, best});
    };

    for (auto& u : detail::latin_hypercube(init, dim, rng)) evaluate_point(std::move(u));

    for (int trial = init; trial < config.trials; ++trial) {
        std::vector<double> proposal;
        if (!config.random_search_only && !result.surrogate_failed) {
            try {
                detail::GaussianProcess gp;
                gp.fit(unit_xs, ys);
                double best_ei = -1.0;
                std::vector<double> cand(dim);
                for (int c = 0; c < config.acquisition_candidates; ++c) {
                    if (c < config.acquisition_candidates / 4 && !unit_xs.empty()) {
                        // a quarter of the candidates jitter around the incumbent
                        const auto& inc = unit_xs[static_cast<std::size_t>(
                            std::min_element(ys.begin(), ys.end()) - ys.begin())];
                        for (int d = 0; d < dim; ++d)
                            cand[d] = std::clamp(inc[d] + 0.05 * rng.normal(), 0.0, 1.0);
                    } else {
                        for (int d = 0; d < dim; ++d) cand[d] = rng.uniform();
                    }
                    double mu, sigma;
                    gp.predict(cand, mu, sigma);
                    double ei = detail::expected_improvement(mu, sigma, best);
                    if (ei > best_ei) {
                        best_ei = ei;
                        proposal = cand;
                    }
                }
            } catch (const Error&) {
                result.surrogate_failed = true;
            }
        }
        if (proposal.empty()) {
            proposal.resize(dim);
            for (int d = 0; d < dim; ++d) proposal[d] = rng.uniform();
        }
        evaluate_point(std::move(proposal));
    }
    return result;
}

/// Trains SVFA weights by Bayesian optimization: the objective of a weight
/// vector is the mean cycle time over `sims_per_trial` episodes. Episode
/// seeds repeat across trials (common random numbers), so trial objectives
/// are directly comparable.
inline BOResult train_svfa(const ProcessModel& model, const BOConfig& config) {
    auto objective = [&model, &config](const std::vector<double>& x) {
        SvfaPolicy policy(WeightVector::from_vector(x));
        double sum = 0.0;
        for (int i = 0; i < config.sims_per_trial; ++i) {
            auto stats = run_episode(model, policy, config.horizon,
                                     config.seed + static_cast<std::uint64_t>(i));
            sum += stats.mean_cycle_time;
        }
        return sum / static_cast<double>(config.sims_per_trial);
    };
    return bayes_optimize(objective, 7, config);
}

} // namespace bpsim
