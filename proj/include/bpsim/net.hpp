#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <vector>

#include "bpsim/errors.hpp"
#include "bpsim/rng.hpp"

namespace bpsim {

/// Two hidden tanh layers feeding an action head (masked categorical logits)
/// and a scalar value head. Parameters live in one flat vector so the
/// optimizer and checkpoints can treat the network as a plain array.
///
/// Layout: W1 [h x in], b1 [h], W2 [h x h], b2 [h], Wa [out x h], ba [out],
/// Wv [h], bv [1].
class PolicyNet {
  public:
    PolicyNet() = default;
    PolicyNet(int n_inputs, int n_actions, int hidden = 128)
        : n_in_(n_inputs), n_act_(n_actions), h_(hidden) {
        params_.assign(param_count(), 0.0);
    }

    int inputs() const { return n_in_; }
    int actions() const { return n_act_; }
    int hidden() const { return h_; }

    std::size_t param_count() const {
        return static_cast<std::size_t>(h_) * n_in_ + h_ +
               static_cast<std::size_t>(h_) * h_ + h_ +
               static_cast<std::size_t>(n_act_) * h_ + n_act_ + h_ + 1;
    }

    std::vector<double>& params() { return params_; }
    const std::vector<double>& params() const { return params_; }

    /// Xavier-uniform hidden layers; action head scaled down so the initial
    /// policy is near uniform.
    void init(Rng& rng) {
        auto fill = [&rng](double* p, std::size_t n, double a) {
            for (std::size_t i = 0; i < n; ++i) p[i] = rng.uniform(-a, a);
        };
        double* p = params_.data();
        fill(p + off_w1(), static_cast<std::size_t>(h_) * n_in_, std::sqrt(6.0 / (n_in_ + h_)));
        fill(p + off_w2(), static_cast<std::size_t>(h_) * h_, std::sqrt(6.0 / (h_ + h_)));
        fill(p + off_wa(), static_cast<std::size_t>(n_act_) * h_,
             0.01 * std::sqrt(6.0 / (h_ + n_act_)));
        fill(p + off_wv(), static_cast<std::size_t>(h_), std::sqrt(6.0 / (h_ + 1)));
    }

    struct Forward {
        std::vector<double> h1, h2;
        std::vector<double> logits;
        std::vector<double> probs; // exactly 0 on masked actions
        std::vector<double> logp;  // -inf on masked actions
        double value = 0.0;
    };

    Forward forward(const std::vector<double>& obs, const std::vector<std::uint8_t>& mask) const {
        Forward f;
        const double* p = params_.data();
        f.h1.resize(h_);
        for (int i = 0; i < h_; ++i) {
            const double* w = p + off_w1() + static_cast<std::size_t>(i) * n_in_;
            double s = p[off_b1() + i];
            for (int j = 0; j < n_in_; ++j) s += w[j] * obs[j];
            f.h1[i] = std::tanh(s);
        }
        f.h2.resize(h_);
        for (int i = 0; i < h_; ++i) {
            const double* w = p + off_w2() + static_cast<std::size_t>(i) * h_;
            double s = p[off_b2() + i];
            for (int j = 0; j < h_; ++j) s += w[j] * f.h1[j];
            f.h2[i] = std::tanh(s);
        }
        f.logits.resize(n_act_);
        for (int i = 0; i < n_act_; ++i) {
            const double* w = p + off_wa() + static_cast<std::size_t>(i) * h_;
            double s = p[off_ba() + i];
            for (int j = 0; j < h_; ++j) s += w[j] * f.h2[j];
            f.logits[i] = s;
        }
        {
            const double* w = p + off_wv();
            double s = p[off_bv()];
            for (int j = 0; j < h_; ++j) s += w[j] * f.h2[j];
            f.value = s;
        }
        masked_softmax(f.logits, mask, f.probs, f.logp);
        return f;
    }

    /// Restricts the softmax to feasible actions: masked probabilities are
    /// exactly zero, feasible ones sum to one.
    static void masked_softmax(const std::vector<double>& logits,
                               const std::vector<std::uint8_t>& mask, std::vector<double>& probs,
                               std::vector<double>& logp) {
        const std::size_t n = logits.size();
        probs.assign(n, 0.0);
        logp.assign(n, -std::numeric_limits<double>::infinity());
        double hi = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i)
            if (mask[i] && logits[i] > hi) hi = logits[i];
        if (!std::isfinite(hi)) throw Error("masked_softmax: no feasible action");
        double z = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            if (mask[i]) z += std::exp(logits[i] - hi);
        double logz = std::log(z);
        for (std::size_t i = 0; i < n; ++i) {
            if (!mask[i]) continue;
            logp[i] = logits[i] - hi - logz;
            probs[i] = std::exp(logp[i]);
        }
    }

    /// Accumulates parameter gradients for one sample, given upstream
    /// gradients w.r.t. the logits and the value. `grad` must have
    /// param_count() entries.
    void backward(const std::vector<double>& obs, const Forward& f,
                  const std::vector<double>& dlogits, double dvalue,
                  std::vector<double>& grad) const {
        const double* p = params_.data();
        double* g = grad.data();

        std::vector<double> dh2(h_, 0.0);
        for (int i = 0; i < n_act_; ++i) {
            double d = dlogits[i];
            if (d == 0.0) continue;
            const double* w = p + off_wa() + static_cast<std::size_t>(i) * h_;
            double* gw = g + off_wa() + static_cast<std::size_t>(i) * h_;
            for (int j = 0; j < h_; ++j) {
                gw[j] += d * f.h2[j];
                dh2[j] += d * w[j];
            }
            g[off_ba() + i] += d;
        }
        if (dvalue != 0.0) {
            const double* w = p + off_wv();
            double* gw = g + off_wv();
            for (int j = 0; j < h_; ++j) {
                gw[j] += dvalue * f.h2[j];
                dh2[j] += dvalue * w[j];
            }
            g[off_bv()] += dvalue;
        }

        std::vector<double> dpre2(h_);
        for (int i = 0; i < h_; ++i) dpre2[i] = dh2[i] * (1.0 - f.h2[i] * f.h2[i]);

        std::vector<double> dh1(h_, 0.0);
        for (int i = 0; i < h_; ++i) {
            double d = dpre2[i];
            if (d == 0.0) continue;
            const double* w = p + off_w2() + static_cast<std::size_t>(i) * h_;
            double* gw = g + off_w2() + static_cast<std::size_t>(i) * h_;
            for (int j = 0; j < h_; ++j) {
                gw[j] += d * f.h1[j];
                dh1[j] += d * w[j];
            }
            g[off_b2() + i] += d;
        }

        for (int i = 0; i < h_; ++i) {
            double d = dh1[i] * (1.0 - f.h1[i] * f.h1[i]);
            if (d == 0.0) continue;
            double* gw = g + off_w1() + static_cast<std::size_t>(i) * n_in_;
            for (int j = 0; j < n_in_; ++j) gw[j] += d * obs[j];
            g[off_b1() + i] += d;
        }
    }

  private:
    std::size_t off_w1() const { return 0; }
    std::size_t off_b1() const { return off_w1() + static_cast<std::size_t>(h_) * n_in_; }
    std::size_t off_w2() const { return off_b1() + h_; }
    std::size_t off_b2() const { return off_w2() + static_cast<std::size_t>(h_) * h_; }
    std::size_t off_wa() const { return off_b2() + h_; }
    std::size_t off_ba() const { return off_wa() + static_cast<std::size_t>(n_act_) * h_; }
    std::size_t off_wv() const { return off_ba() + n_act_; }
    std::size_t off_bv() const { return off_wv() + h_; }

    int n_in_ = 0, n_act_ = 0, h_ = 0;
    std::vector<double> params_;
};

/// Adam optimizer over a flat parameter vector.
class Adam {
  public:
    explicit Adam(std::size_t n, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : m_(n, 0.0), v_(n, 0.0), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(std::vector<double>& params, const std::vector<double>& grad, double lr) {
        ++t_;
        double c1 = 1.0 - std::pow(beta1_, t_);
        double c2 = 1.0 - std::pow(beta2_, t_);
        for (std::size_t i = 0; i < params.size(); ++i) {
            m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
            v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
            params[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
        }
    }

  private:
    std::vector<double> m_, v_;
    double beta1_, beta2_, eps_;
    long t_ = 0;
};

} // namespace bpsim
