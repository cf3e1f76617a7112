#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bpsim/net.hpp"
#include "bpsim/policy.hpp"

namespace bpsim {

/// The fixed action list of a model: every eligible (resource, activity)
/// pair in (resource index, activity index) order, plus postpone as the last
/// index. Choosing a pair assigns the resource to the longest-waiting
/// instance of that activity.
struct ActionSpace {
    std::vector<std::pair<int, int>> pairs; // (resource, activity)

    static ActionSpace for_model(const ProcessModel& m) {
        ActionSpace s;
        for (int r = 0; r < m.resource_count(); ++r)
            for (int a = 0; a < m.activity_count(); ++a)
                if (m.is_eligible(r, a)) s.pairs.emplace_back(r, a);
        return s;
    }

    int size() const { return static_cast<int>(pairs.size()) + 1; }
    int postpone_index() const { return static_cast<int>(pairs.size()); }

    int index_of(int resource, int activity) const {
        for (std::size_t i = 0; i < pairs.size(); ++i)
            if (pairs[i].first == resource && pairs[i].second == activity)
                return static_cast<int>(i);
        return -1;
    }
};

enum class ObsVariant { Plain, Temporal };

/// Observation length: 2|R| + |A|, plus one arrival-phase entry for the
/// temporal variant.
inline int observation_size(const ProcessModel& m, ObsVariant v) {
    return 2 * m.resource_count() + m.activity_count() + (v == ObsVariant::Temporal ? 1 : 0);
}

/// Encodes the execution state: per-resource availability bits, per-resource
/// normalized assigned-activity index, per-activity queue length divided by
/// 100 (capped at 1), and optionally the arrival-pattern phase.
inline void encode_state(const Simulation& sim, const ProcessModel& m, ObsVariant v,
                         std::vector<double>& out) {
    int R = m.resource_count(), A = m.activity_count();
    out.assign(static_cast<std::size_t>(observation_size(m, v)), 0.0);
    for (int r = 0; r < R; ++r) {
        long k = sim.busy_instance(r);
        if (k < 0) {
            out[r] = 1.0;
        } else {
            int j = sim.instance(k).activity + 1; // 1-based activity index
            out[R + r] = static_cast<double>(j) / static_cast<double>(A);
        }
    }
    for (int a = 0; a < A; ++a)
        out[2 * R + a] = std::min(static_cast<double>(sim.waiting_count(a)) / 100.0, 1.0);
    if (v == ObsVariant::Temporal) {
        double period = m.arrivals.pattern.period;
        out[2 * R + A] = period > 0.0 ? std::fmod(sim.now(), period) / period : 0.0;
    }
}

/// 1 for each pair in the possible-assignment set D, 0 otherwise; the
/// postpone bit is always 1.
inline void feasibility_mask(const Simulation& sim, const ActionSpace& as,
                             std::vector<std::uint8_t>& out) {
    out.assign(static_cast<std::size_t>(as.size()), 0);
    for (std::size_t i = 0; i < as.pairs.size(); ++i) {
        auto [r, a] = as.pairs[i];
        if (sim.is_idle(r) && sim.waiting_count(a) > 0) out[i] = 1;
    }
    out[as.pairs.size()] = 1;
}

/// All Table-style PPO hyperparameters plus the conventional defaults the
/// paper leaves unpinned. Everything is overridable.
struct PPOConfig {
    double clip = 0.2;
    long rollout_steps = 25600;   // on-policy samples per update
    int minibatch = 256;
    double lr = 3e-5;
    bool linear_lr_decay = true;
    double gamma = 0.999;
    double max_steps = 2e7;       // total decision steps
    double gae_lambda = 0.95;
    double ent_coef = 0.0;
    double vf_coef = 0.5;
    int epochs = 10;
    double grad_clip = 0.5;
    bool normalize_advantage = true;
    long eval_interval_steps = 25600;
    int eval_episodes = 3;
    bool checkpoint_best = true;
    double horizon = 5000.0;
    double postpone_penalty = 0.0;
    ObsVariant variant = ObsVariant::Plain;
    int hidden = 128;

    void check() const {
        if (!(clip > 0.0 && clip < 1.0)) throw Error("ppo: clip must be in (0,1)");
        if (rollout_steps <= 0 || minibatch <= 0 || epochs <= 0)
            throw Error("ppo: rollout, minibatch and epochs must be positive");
        if (!(lr >= 0.0) || !(gamma > 0.0) || !(max_steps > 0.0) || !(horizon > 0.0))
            throw Error("ppo: invalid schedule values");
    }
};

/// Paper-scale preset: the tuned hyperparameters, 2e7-step budget.
inline PPOConfig ppo_paper_preset() { return PPOConfig{}; }

/// Desk-scale preset: same architecture, smaller budget and a faster schedule
/// so training finishes in minutes on a laptop CPU.
inline PPOConfig ppo_desk_preset() {
    PPOConfig c;
    c.lr = 3e-4;
    c.epochs = 4;
    c.max_steps = 1e6;
    return c;
}

/// Gym-style wrapper that turns the simulation into an episodic MDP: actions
/// are the fixed action list, the reward of a step is the sum of 1/(cycle+1)
/// over the cases completed while that action's transition evolved (plus the
/// optional postpone penalty), and an episode ends at the horizon.
class MdpEnv {
  public:
    MdpEnv(const ProcessModel& model, ObsVariant variant, double horizon,
           double postpone_penalty = 0.0)
        : model_(&model),
          actions_(ActionSpace::for_model(model)),
          variant_(variant),
          horizon_(horizon),
          penalty_(postpone_penalty) {
        if (variant_ == ObsVariant::Temporal && model.arrivals.kind != ArrivalSpec::Kind::Pattern)
            throw Error("temporal observation variant requires pattern arrivals");
    }

    const ActionSpace& actions() const { return actions_; }
    const ProcessModel& model() const { return *model_; }
    Simulation& sim() { return *sim_; }
    const Simulation& sim() const { return *sim_; }

    /// Starts a fresh episode; returns false when the horizon was hit before
    /// the first decision point (degenerate episode).
    bool reset(std::uint64_t seed) {
        sim_ = std::make_unique<Simulation>(*model_, seed);
        done_ = sim_->advance_to_next_decision(horizon_) == AdvanceResult::HorizonReached;
        episode_reward_ = 0.0;
        episode_steps_ = 0;
        sim_->take_reward();
        return !done_;
    }

    void observe(std::vector<double>& obs, std::vector<std::uint8_t>& mask) const {
        encode_state(*sim_, *model_, variant_, obs);
        feasibility_mask(*sim_, actions_, mask);
    }

    struct StepResult {
        double reward = 0.0;
        bool done = false;
    };

    StepResult step(int action) {
        if (done_) throw Error("step called on a finished episode");
        StepResult res;
        if (action == actions_.postpone_index()) {
            auto r = sim_->postpone(horizon_);
            res.reward = sim_->take_reward() + penalty_;
            done_ = r == AdvanceResult::HorizonReached;
        } else {
            if (action < 0 || action >= actions_.size())
                throw InfeasibleAction("action index out of range");
            auto [r, a] = actions_.pairs[static_cast<std::size_t>(action)];
            if (!sim_->is_idle(r) || sim_->waiting_count(a) == 0)
                throw InfeasibleAction("masked action selected");
            sim_->apply_assignment(r, sim_->waiting_queue(a).front());
            auto adv = sim_->advance_to_next_decision(horizon_);
            res.reward = sim_->take_reward();
            done_ = adv == AdvanceResult::HorizonReached;
        }
        res.done = done_;
        episode_reward_ += res.reward;
        ++episode_steps_;
        return res;
    }

    bool done() const { return done_; }
    double episode_reward() const { return episode_reward_; }
    long episode_steps() const { return episode_steps_; }
    EpisodeStats finish() { return sim_->finish(horizon_); }

  private:
    const ProcessModel* model_;
    ActionSpace actions_;
    ObsVariant variant_;
    double horizon_;
    double penalty_;
    std::unique_ptr<Simulation> sim_;
    bool done_ = true;
    double episode_reward_ = 0.0;
    long episode_steps_ = 0;
};

struct TrainLogRow {
    long episode = 0;
    long steps = 0;
    double total_reward = 0.0;
    double mean_cycle_time = 0.0;
};

struct TrainResult {
    PolicyNet net;               // best checkpoint (or final when not evaluating)
    std::vector<TrainLogRow> log;
    double best_eval_cycle = std::numeric_limits<double>::infinity();
    long steps_trained = 0;
    long episodes = 0;
};

namespace detail {

inline double eval_greedy_cycle(const ProcessModel& model, const PolicyNet& net,
                                const PPOConfig& cfg, std::uint64_t eval_seed_base) {
    double sum = 0.0;
    std::vector<double> obs;
    std::vector<std::uint8_t> mask;
    for (int e = 0; e < cfg.eval_episodes; ++e) {
        MdpEnv env(model, cfg.variant, cfg.horizon, cfg.postpone_penalty);
        if (!env.reset(eval_seed_base + static_cast<std::uint64_t>(e))) {
            sum += env.finish().mean_cycle_time;
            continue;
        }
        while (!env.done()) {
            env.observe(obs, mask);
            auto f = net.forward(obs, mask);
            int best = -1;
            for (std::size_t i = 0; i < f.probs.size(); ++i)
                if (mask[i] && (best < 0 || f.probs[i] > f.probs[static_cast<std::size_t>(best)]))
                    best = static_cast<int>(i);
            env.step(best);
        }
        sum += env.finish().mean_cycle_time;
    }
    return sum / cfg.eval_episodes;
}

} // namespace detail

/// From-scratch maskable PPO: collects fixed-length on-policy rollouts
/// (episodes reset at the horizon), computes GAE advantages, and runs
/// clipped-surrogate minibatch updates with a linearly decaying learning
/// rate. Periodically evaluates greedily and keeps the best checkpoint.
inline TrainResult ppo_train(const ProcessModel& model, const PPOConfig& cfg, std::uint64_t seed,
                             std::ostream* progress = nullptr) {
    cfg.check();
    MdpEnv env(model, cfg.variant, cfg.horizon, cfg.postpone_penalty);
    const int n_obs = observation_size(model, cfg.variant);
    const int n_act = env.actions().size();

    Rng init_rng(splitmix64(seed) ^ 0x11171ULL);
    Rng sample_rng(splitmix64(seed) ^ 0x5a5a5ULL);
    std::uint64_t eval_seed_base = splitmix64(seed ^ 0xe7a1ULL);

    TrainResult out;
    out.net = PolicyNet(n_obs, n_act, cfg.hidden);
    out.net.init(init_rng);
    PolicyNet net = out.net;

    Adam adam(net.param_count());
    std::vector<double> grad(net.param_count(), 0.0);

    const long T = cfg.rollout_steps;
    std::vector<double> obs_buf(static_cast<std::size_t>(T) * n_obs);
    std::vector<std::uint8_t> mask_buf(static_cast<std::size_t>(T) * n_act);
    std::vector<int> act_buf(T);
    std::vector<double> logp_buf(T), val_buf(T), rew_buf(T);
    std::vector<std::uint8_t> done_buf(T);
    std::vector<double> adv(T), ret(T);

    std::vector<double> obs(n_obs);
    std::vector<std::uint8_t> mask(n_act);

    long episode_counter = 0;
    while (!env.reset(seed + static_cast<std::uint64_t>(episode_counter++))) {}

    long steps = 0;
    while (steps < static_cast<long>(cfg.max_steps)) {
        // ---- collect one rollout ----
        for (long t = 0; t < T; ++t) {
            env.observe(obs, mask);
            auto f = net.forward(obs, mask);
            double u = sample_rng.uniform();
            int action = n_act - 1;
            double acc = 0.0;
            for (int i = 0; i < n_act; ++i) {
                acc += f.probs[i];
                if (u < acc) {
                    action = i;
                    break;
                }
            }
            std::copy(obs.begin(), obs.end(), obs_buf.begin() + t * n_obs);
            std::copy(mask.begin(), mask.end(), mask_buf.begin() + t * n_act);
            act_buf[t] = action;
            logp_buf[t] = f.logp[action];
            val_buf[t] = f.value;

            auto sr = env.step(action);
            rew_buf[t] = sr.reward;
            done_buf[t] = sr.done ? 1 : 0;
            if (sr.done) {
                auto stats = env.finish();
                out.log.push_back({out.episodes++, env.episode_steps(), env.episode_reward(),
                                   stats.mean_cycle_time});
                if (progress)
                    (*progress) << "episode " << out.episodes << " steps " << env.episode_steps()
                                << " reward " << env.episode_reward() << " mean_cycle "
                                << stats.mean_cycle_time << "\n";
                while (!env.reset(seed + static_cast<std::uint64_t>(episode_counter++))) {}
            }
        }
        steps += T;
        out.steps_trained = steps;

        // ---- GAE ----
        double boot = 0.0;
        if (!done_buf[T - 1]) {
            env.observe(obs, mask);
            boot = net.forward(obs, mask).value;
        }
        double lastgae = 0.0;
        for (long t = T - 1; t >= 0; --t) {
            double nonterminal = done_buf[t] ? 0.0 : 1.0;
            double next_v = (t == T - 1) ? boot : val_buf[t + 1];
            double delta = rew_buf[t] + cfg.gamma * next_v * nonterminal - val_buf[t];
            lastgae = delta + cfg.gamma * cfg.gae_lambda * nonterminal * lastgae;
            adv[t] = lastgae;
            ret[t] = adv[t] + val_buf[t];
        }

        double lr = cfg.lr;
        if (cfg.linear_lr_decay)
            lr *= std::max(0.0, 1.0 - static_cast<double>(steps) / cfg.max_steps);

        // ---- clipped-surrogate updates ----
        std::vector<long> idx(T);
        for (long i = 0; i < T; ++i) idx[i] = i;
        std::vector<double> sample_obs(n_obs);
        std::vector<std::uint8_t> sample_mask(n_act);
        std::vector<double> dlogits(n_act);
        for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
            for (long i = T - 1; i > 0; --i)
                std::swap(idx[i], idx[sample_rng.integer(static_cast<std::uint64_t>(i) + 1)]);
            for (long start = 0; start + cfg.minibatch <= T; start += cfg.minibatch) {
                std::fill(grad.begin(), grad.end(), 0.0);
                double adv_mean = 0.0, adv_sq = 0.0;
                if (cfg.normalize_advantage) {
                    for (long b = 0; b < cfg.minibatch; ++b) adv_mean += adv[idx[start + b]];
                    adv_mean /= cfg.minibatch;
                    for (long b = 0; b < cfg.minibatch; ++b) {
                        double d = adv[idx[start + b]] - adv_mean;
                        adv_sq += d * d;
                    }
                    adv_sq = std::sqrt(adv_sq / cfg.minibatch) + 1e-8;
                } else {
                    adv_sq = 1.0;
                }

                double loss = 0.0;
                for (long b = 0; b < cfg.minibatch; ++b) {
                    long t = idx[start + b];
                    std::copy(obs_buf.begin() + t * n_obs, obs_buf.begin() + (t + 1) * n_obs,
                              sample_obs.begin());
                    std::copy(mask_buf.begin() + t * n_act, mask_buf.begin() + (t + 1) * n_act,
                              sample_mask.begin());
                    auto f = net.forward(sample_obs, sample_mask);
                    int a = act_buf[t];
                    double advantage = (adv[t] - adv_mean) / adv_sq;
                    double ratio = std::exp(f.logp[a] - logp_buf[t]);
                    double unclipped = ratio * advantage;
                    double clipped =
                        std::clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip) * advantage;
                    loss += -std::min(unclipped, clipped);
                    // gradient flows only when the unclipped branch is active
                    double dlp = (unclipped <= clipped) ? -advantage * ratio : 0.0;

                    double entropy = 0.0;
                    if (cfg.ent_coef != 0.0) {
                        for (int i = 0; i < n_act; ++i)
                            if (sample_mask[i] && f.probs[i] > 0.0)
                                entropy -= f.probs[i] * f.logp[i];
                        loss += -cfg.ent_coef * entropy;
                    }

                    for (int i = 0; i < n_act; ++i) {
                        if (!sample_mask[i]) {
                            dlogits[i] = 0.0;
                            continue;
                        }
                        double d = dlp * ((i == a ? 1.0 : 0.0) - f.probs[i]);
                        if (cfg.ent_coef != 0.0)
                            d += cfg.ent_coef * f.probs[i] * (f.logp[i] + entropy);
                        dlogits[i] = d;
                    }
                    double verr = f.value - ret[t];
                    loss += cfg.vf_coef * verr * verr;
                    double dvalue = 2.0 * cfg.vf_coef * verr;
                    net.backward(sample_obs, f, dlogits, dvalue, grad);
                }
                if (!std::isfinite(loss))
                    throw NonFiniteLoss("ppo update produced a non-finite loss at step " +
                                        std::to_string(steps));
                double inv = 1.0 / static_cast<double>(cfg.minibatch);
                double norm2 = 0.0;
                for (auto& g : grad) {
                    g *= inv;
                    norm2 += g * g;
                }
                if (cfg.grad_clip > 0.0) {
                    double norm = std::sqrt(norm2);
                    if (norm > cfg.grad_clip) {
                        double scale = cfg.grad_clip / norm;
                        for (auto& g : grad) g *= scale;
                    }
                }
                adam.step(net.params(), grad, lr);
            }
        }

        // ---- periodic greedy evaluation, keep the best ----
        if (cfg.checkpoint_best &&
            (steps % cfg.eval_interval_steps == 0 || steps >= static_cast<long>(cfg.max_steps))) {
            double cycle = detail::eval_greedy_cycle(model, net, cfg, eval_seed_base);
            if (cycle < out.best_eval_cycle) {
                out.best_eval_cycle = cycle;
                out.net = net;
            }
            if (progress)
                (*progress) << "eval at " << steps << " steps: mean_cycle " << cycle
                            << " (best " << out.best_eval_cycle << ")\n";
        }
    }
    if (!cfg.checkpoint_best) out.net = net;
    return out;
}

/// Wraps a trained network as a Policy: encode, mask, forward, then argmax
/// (greedy) or a draw from the masked distribution (sample). The chosen pair
/// maps back to the longest-waiting instance of the activity.
class DrlPolicy final : public Policy {
  public:
    enum class Mode { Greedy, Sample };

    DrlPolicy(PolicyNet net, const ProcessModel& model, ObsVariant variant,
              Mode mode = Mode::Greedy)
        : net_(std::move(net)),
          actions_(ActionSpace::for_model(model)),
          variant_(variant),
          mode_(mode) {
        if (net_.inputs() != observation_size(model, variant))
            throw Error("checkpoint does not match the model's observation size");
        if (net_.actions() != actions_.size())
            throw Error("checkpoint does not match the model's action space");
    }

    Decision decide(const DecisionContext& ctx, Rng& policy_rng) override {
        encode_state(ctx.sim, ctx.model, variant_, obs_);
        feasibility_mask(ctx.sim, actions_, mask_);
        auto f = net_.forward(obs_, mask_);
        int action;
        if (mode_ == Mode::Greedy) {
            action = -1;
            for (int i = 0; i < actions_.size(); ++i)
                if (mask_[i] && (action < 0 || f.probs[i] > f.probs[action])) action = i;
        } else {
            double u = policy_rng.uniform();
            action = actions_.size() - 1;
            double acc = 0.0;
            for (int i = 0; i < actions_.size(); ++i) {
                acc += f.probs[i];
                if (u < acc) {
                    action = i;
                    break;
                }
            }
        }
        if (action == actions_.postpone_index()) return Decision::postpone();
        auto [r, a] = actions_.pairs[static_cast<std::size_t>(action)];
        return Decision::assign(r, ctx.sim.waiting_queue(a).front());
    }

    std::string name() const override { return "drl"; }

  private:
    PolicyNet net_;
    ActionSpace actions_;
    ObsVariant variant_;
    Mode mode_;
    std::vector<double> obs_;
    std::vector<std::uint8_t> mask_;
};

inline constexpr int kCheckpointFormatVersion = 1;

/// Checkpoint file: versioned header, model fingerprint, flat parameter
/// array, config echo.
inline void save_checkpoint(const std::string& path, const PolicyNet& net,
                            const ProcessModel& model, const PPOConfig& cfg) {
    nlohmann::ordered_json doc;
    doc["format_version"] = kCheckpointFormatVersion;
    doc["model_fingerprint"] = model.fingerprint();
    doc["model_name"] = model.name;
    doc["inputs"] = net.inputs();
    doc["actions"] = net.actions();
    doc["hidden"] = net.hidden();
    doc["variant"] = cfg.variant == ObsVariant::Temporal ? "temporal" : "plain";
    doc["config"] = {{"clip", cfg.clip},
                     {"rollout_steps", cfg.rollout_steps},
                     {"minibatch", cfg.minibatch},
                     {"lr", cfg.lr},
                     {"gamma", cfg.gamma},
                     {"max_steps", cfg.max_steps},
                     {"gae_lambda", cfg.gae_lambda},
                     {"ent_coef", cfg.ent_coef},
                     {"vf_coef", cfg.vf_coef},
                     {"epochs", cfg.epochs},
                     {"postpone_penalty", cfg.postpone_penalty},
                     {"horizon", cfg.horizon}};
    doc["params"] = net.params();
    std::ofstream out(path);
    if (!out) throw IoError("cannot write checkpoint " + path);
    out << doc.dump() << "\n";
}

struct Checkpoint {
    PolicyNet net;
    std::uint64_t fingerprint = 0;
    ObsVariant variant = ObsVariant::Plain;
};

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open checkpoint " + path);
    nlohmann::json doc;
    try {
        in >> doc;
        if (doc.at("format_version").get<int>() != kCheckpointFormatVersion)
            throw Error("unsupported checkpoint format version");
        Checkpoint c;
        c.net = PolicyNet(doc.at("inputs").get<int>(), doc.at("actions").get<int>(),
                          doc.at("hidden").get<int>());
        c.net.params() = doc.at("params").get<std::vector<double>>();
        if (c.net.params().size() != c.net.param_count())
            throw Error("checkpoint parameter count mismatch");
        c.fingerprint = doc.at("model_fingerprint").get<std::uint64_t>();
        c.variant = doc.at("variant").get<std::string>() == "temporal" ? ObsVariant::Temporal
                                                                       : ObsVariant::Plain;
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("checkpoint: ") + e.what());
    }
}

/// Loads a checkpoint and binds it to a model, refusing fingerprint
/// mismatches.
inline PolicyPtr drl_policy_from_checkpoint(const std::string& path, const ProcessModel& model,
                                            DrlPolicy::Mode mode = DrlPolicy::Mode::Greedy) {
    auto c = load_checkpoint(path);
    if (c.fingerprint != model.fingerprint())
        throw Error("checkpoint was trained on a different model (fingerprint mismatch)");
    return std::make_unique<DrlPolicy>(std::move(c.net), model, c.variant, mode);
}

} // namespace bpsim
