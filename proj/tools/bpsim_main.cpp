// bpsim command line: simulate business processes, train resource-allocation
// policies (SVFA via Bayesian optimization, maskable PPO), and run replicated
// evaluations and arrival-rate sweeps. Every command is driven entirely by
// flags and a seed, and writes a manifest sufficient to reproduce its outputs.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

#include "bpsim/bayesopt.hpp"
#include "bpsim/drl.hpp"
#include "bpsim/harness.hpp"
#include "bpsim/model_io.hpp"
#include "bpsim/policy_factory.hpp"
#include "bpsim/scenarios.hpp"
#include "bpsim/version.hpp"

namespace fs = std::filesystem;
using namespace bpsim;

namespace {

struct SeedOpt {
    std::uint64_t value = 0;
    bool explicit_seed = false;
    bool no_seed = false;

    void add_to(CLI::App* cmd) {
        auto* opt = cmd->add_option("--seed", value,
                                    "master seed (all randomness derives from it)");
        opt->each([this](const std::string&) { explicit_seed = true; });
        cmd->add_flag("--no-seed", no_seed, "run without a fixed seed (draws one at random)");
    }

    std::uint64_t resolve() {
        if (explicit_seed) return value;
        if (!no_seed)
            throw Error("a --seed is required for reproducibility; pass --no-seed to opt out");
        std::random_device rd;
        value = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
        return value;
    }
};

struct ModelOpt {
    std::string model = "low_utilization";
    double lambda = 0.5;
    std::string arrivals = "default"; // default|constant|pattern

    void add_to(CLI::App* cmd) {
        cmd->add_option("--model", model, "builtin scenario name or path to a scenario file")
            ->required();
        cmd->add_option("--lambda", lambda, "arrival rate for builtin scenarios (default 0.5)");
        cmd->add_option("--arrivals", arrivals,
                        "constant | pattern (pattern uses the shipped repeating curve)")
            ->check(CLI::IsMember({"default", "constant", "pattern"}));
    }

    ProcessModel resolve() const {
        ProcessModel m;
        bool builtin = false;
        for (const auto& n : builtin_scenario_names())
            if (n == model) builtin = true;
        if (builtin) {
            m = builtin_scenario(model, lambda);
        } else {
            m = load_model_file(model);
        }
        if (arrivals == "constant") {
            m.arrivals = ArrivalSpec::constant(lambda);
        } else if (arrivals == "pattern") {
            m.arrivals = default_arrival_pattern(lambda);
        }
        validate_or_throw(m);
        return m;
    }
};

nlohmann::ordered_json base_manifest(const std::string& command, int argc, char** argv,
                                     std::uint64_t seed, bool explicit_seed) {
    nlohmann::ordered_json doc;
    doc["tool"] = "bpsim";
    doc["version"] = kVersion;
    doc["command"] = command;
    auto args = nlohmann::json::array();
    for (int i = 0; i < argc; ++i) args.push_back(argv[i]);
    doc["argv"] = args;
    doc["seed"] = seed;
    doc["seed_explicit"] = explicit_seed;
    return doc;
}

void write_manifest(const nlohmann::ordered_json& doc, const fs::path& dir) {
    std::ofstream out(dir / "manifest.json");
    if (!out) throw IoError("cannot write manifest in " + dir.string());
    out << doc.dump(2) << "\n";
}

fs::path ensure_dir(const std::string& dir) {
    fs::path p(dir);
    fs::create_directories(p);
    return p;
}

// generic --set key=value overrides for the PPO and BO configs
void apply_override(PPOConfig& cfg, const std::string& key, const std::string& value) {
    auto d = [&] { return std::stod(value); };
    auto l = [&] { return std::stol(value); };
    if (key == "clip") cfg.clip = d();
    else if (key == "rollout_steps") cfg.rollout_steps = l();
    else if (key == "minibatch") cfg.minibatch = static_cast<int>(l());
    else if (key == "lr") cfg.lr = d();
    else if (key == "linear_lr_decay") cfg.linear_lr_decay = l() != 0;
    else if (key == "gamma") cfg.gamma = d();
    else if (key == "max_steps") cfg.max_steps = d();
    else if (key == "gae_lambda") cfg.gae_lambda = d();
    else if (key == "ent_coef") cfg.ent_coef = d();
    else if (key == "vf_coef") cfg.vf_coef = d();
    else if (key == "epochs") cfg.epochs = static_cast<int>(l());
    else if (key == "grad_clip") cfg.grad_clip = d();
    else if (key == "normalize_advantage") cfg.normalize_advantage = l() != 0;
    else if (key == "eval_interval_steps") cfg.eval_interval_steps = l();
    else if (key == "eval_episodes") cfg.eval_episodes = static_cast<int>(l());
    else if (key == "hidden") cfg.hidden = static_cast<int>(l());
    else if (key == "horizon") cfg.horizon = d();
    else throw Error("unknown ppo override key: " + key);
}

void apply_override(BOConfig& cfg, const std::string& key, const std::string& value) {
    auto d = [&] { return std::stod(value); };
    auto l = [&] { return std::stol(value); };
    if (key == "trials") cfg.trials = static_cast<int>(l());
    else if (key == "initial_design") cfg.initial_design = static_cast<int>(l());
    else if (key == "sims_per_trial" || key == "sims") cfg.sims_per_trial = static_cast<int>(l());
    else if (key == "horizon") cfg.horizon = d();
    else if (key == "acquisition_candidates") cfg.acquisition_candidates = static_cast<int>(l());
    else if (key == "random_search_only") cfg.random_search_only = l() != 0;
    else throw Error("unknown bo override key: " + key);
}

template <typename Config>
void apply_overrides(Config& cfg, const std::vector<std::string>& sets) {
    for (const auto& kv : sets) {
        auto eq = kv.find('=');
        if (eq == std::string::npos) throw Error("--set expects key=value, got: " + kv);
        apply_override(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
}

std::vector<double> parse_lambdas(const std::string& spec) {
    // either "0.3:0.6:0.05" (inclusive range) or "0.3,0.4,0.5"
    std::vector<double> out;
    if (spec.find(':') != std::string::npos) {
        double lo, hi, step;
        if (std::sscanf(spec.c_str(), "%lf:%lf:%lf", &lo, &hi, &step) != 3 || step <= 0)
            throw Error("bad --lambdas range: " + spec);
        for (double v = lo; v <= hi + 1e-9; v += step) out.push_back(std::round(v * 1e6) / 1e6);
    } else {
        std::stringstream ss(spec);
        std::string tok;
        while (std::getline(ss, tok, ',')) out.push_back(std::stod(tok));
    }
    if (out.empty()) throw Error("no arrival rates in --lambdas");
    return out;
}

int cmd_simulate(const ModelOpt& model_opt, SeedOpt& seed_opt, const std::string& policy_spec,
                 double horizon, const std::string& trace_path, const std::string& out_dir,
                 int argc, char** argv) {
    auto model = model_opt.resolve();
    auto seed = seed_opt.resolve();
    auto policy = make_policy(policy_spec, model);
    SimOptions opts;
    opts.record_trace = !trace_path.empty();
    auto stats = run_episode(model, *policy, horizon, seed, opts);

    std::cout << "model " << model.name << "\n"
              << "policy " << policy->name() << "\n"
              << "seed " << seed << "\n"
              << "horizon " << stats.horizon << "\n"
              << "arrived " << stats.arrived << "\n"
              << "completed " << stats.completed << "\n"
              << "truncated " << (stats.arrived - stats.completed) << "\n"
              << "mean_cycle_time " << stats.mean_cycle_time << "\n"
              << "reward_total " << stats.reward_total << "\n"
              << "assignments " << stats.assignments << "\n"
              << "postpones " << stats.postpones << "\n";
    for (int r = 0; r < model.resource_count(); ++r)
        std::cout << "utilization_" << model.resources[r].id << " " << stats.utilization(r)
                  << "\n";

    if (!trace_path.empty()) {
        std::ofstream out(trace_path, std::ios::binary);
        if (!out) throw IoError("cannot write trace " + trace_path);
        write_trace_csv(stats, model, out);
    }
    // every artifact directory carries a manifest; a bare --trace writes it
    // next to the trace file
    std::string manifest_dir = out_dir;
    if (manifest_dir.empty() && !trace_path.empty())
        manifest_dir = fs::path(trace_path).parent_path().string();
    if (manifest_dir.empty() && !trace_path.empty()) manifest_dir = ".";
    if (!manifest_dir.empty()) {
        auto dir = ensure_dir(manifest_dir);
        auto doc = base_manifest("simulate", argc, argv, seed, seed_opt.explicit_seed);
        doc["model"] = model.name;
        doc["policy"] = policy_spec;
        doc["horizon"] = horizon;
        if (!trace_path.empty()) doc["outputs"] = {trace_path};
        write_manifest(doc, dir);
    }
    return 0;
}

int cmd_train_svfa(const ModelOpt& model_opt, SeedOpt& seed_opt, BOConfig cfg,
                   const std::string& out_dir, int argc, char** argv) {
    auto model = model_opt.resolve();
    cfg.seed = seed_opt.resolve();
    auto dir = ensure_dir(out_dir);

    auto result = train_svfa(model, cfg);

    save_weights(WeightVector::from_vector(result.best_x), (dir / "weights.json").string());
    {
        std::ofstream hist(dir / "history.csv", std::ios::binary);
        hist << "trial,w1,w2,w3,w4,w5,w6,w7,objective,incumbent\n";
        char buf[64];
        for (const auto& t : result.history) {
            hist << t.trial;
            for (double w : t.x) {
                std::snprintf(buf, sizeof(buf), "%.17g", w);
                hist << ',' << buf;
            }
            std::snprintf(buf, sizeof(buf), "%.17g", t.objective);
            hist << ',' << buf;
            std::snprintf(buf, sizeof(buf), "%.17g", t.incumbent);
            hist << ',' << buf << '\n';
        }
    }
    auto doc = base_manifest("train svfa", argc, argv, cfg.seed, seed_opt.explicit_seed);
    doc["model"] = model.name;
    doc["config"] = {{"trials", cfg.trials},
                     {"initial_design", cfg.initial_design},
                     {"sims_per_trial", cfg.sims_per_trial},
                     {"horizon", cfg.horizon},
                     {"random_search_only", cfg.random_search_only}};
    doc["outputs"] = {"weights.json", "history.csv"};
    doc["best_objective"] = result.best_objective;
    doc["surrogate_failed"] = result.surrogate_failed;
    write_manifest(doc, dir);

    std::cout << "trained svfa weights on " << model.name << " (" << cfg.trials << " trials, "
              << cfg.sims_per_trial << " sims/trial)\n"
              << "best mean cycle time " << result.best_objective << "\n"
              << "weights -> " << (dir / "weights.json").string() << "\n";
    return 0;
}

int cmd_train_drl(const ModelOpt& model_opt, SeedOpt& seed_opt, const PPOConfig& flags,
                  const std::string& preset, bool temporal, const std::string& out_dir,
                  bool quiet, const std::vector<std::string>& sets, int argc, char** argv) {
    PPOConfig cfg = preset == "desk" ? ppo_desk_preset() : ppo_paper_preset();
    if (flags.max_steps > 0) cfg.max_steps = flags.max_steps;
    cfg.horizon = flags.horizon;
    cfg.postpone_penalty = flags.postpone_penalty;
    cfg.variant = temporal ? ObsVariant::Temporal : ObsVariant::Plain;
    apply_overrides(cfg, sets);
    cfg.check();

    auto model = model_opt.resolve();
    auto seed = seed_opt.resolve();
    auto dir = ensure_dir(out_dir);

    auto result = ppo_train(model, cfg, seed, quiet ? nullptr : &std::cerr);

    save_checkpoint((dir / "checkpoint.json").string(), result.net, model, cfg);
    {
        std::ofstream log(dir / "training_log.csv", std::ios::binary);
        log << "episode,steps,total_reward,mean_cycle_time\n";
        char buf[64];
        for (const auto& row : result.log) {
            log << row.episode << ',' << row.steps << ',';
            std::snprintf(buf, sizeof(buf), "%.17g", row.total_reward);
            log << buf << ',';
            std::snprintf(buf, sizeof(buf), "%.17g", row.mean_cycle_time);
            log << buf << '\n';
        }
    }
    auto doc = base_manifest("train drl", argc, argv, seed, seed_opt.explicit_seed);
    doc["model"] = model.name;
    doc["preset"] = preset;
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
                     {"horizon", cfg.horizon},
                     {"postpone_penalty", cfg.postpone_penalty},
                     {"temporal_feature", temporal},
                     {"hidden", cfg.hidden}};
    doc["outputs"] = {"checkpoint.json", "training_log.csv"};
    doc["steps_trained"] = result.steps_trained;
    doc["episodes"] = result.episodes;
    doc["best_eval_cycle"] = result.best_eval_cycle;
    write_manifest(doc, dir);

    std::cout << "trained drl policy on " << model.name << " for " << result.steps_trained
              << " steps (" << result.episodes << " episodes)\n"
              << "best greedy eval mean cycle time " << result.best_eval_cycle << "\n"
              << "checkpoint -> " << (dir / "checkpoint.json").string() << "\n";
    return 0;
}

int cmd_evaluate(const ModelOpt& model_opt, SeedOpt& seed_opt,
                 const std::vector<std::string>& policy_specs, int n, double horizon, int jobs,
                 bool welch, const std::string& out_dir, int argc, char** argv) {
    auto model = model_opt.resolve();
    auto seed = seed_opt.resolve();

    std::vector<EvalReport> reports;
    for (const auto& spec : policy_specs) {
        auto factory = [&model, &spec] { return make_policy(spec, model); };
        auto rep = evaluate(model, factory, n, horizon, seed, jobs);
        rep.policy = spec;
        reports.push_back(std::move(rep));
    }
    auto flags = tied_best_flags(reports, welch);

    std::vector<Comparison> comparisons;
    for (std::size_t i = 0; i < reports.size(); ++i)
        for (std::size_t j = i + 1; j < reports.size(); ++j)
            comparisons.push_back(compare(reports[i], reports[j], welch));

    std::cout << "model " << model.name << "  lambda " << model.arrivals.mean_rate() << "  n "
              << n << "  horizon " << horizon << "\n";
    for (std::size_t i = 0; i < reports.size(); ++i) {
        const auto& r = reports[i];
        std::cout << "  " << r.policy << ": mean_cycle_time " << r.mean << " (+-" << r.ci_half
                  << ")" << (flags[i] ? "  [best]" : "") << "\n";
    }
    for (const auto& c : comparisons)
        std::cout << "  " << c.a << " vs " << c.b << ": t " << c.t << "  p " << c.p
                  << (c.significant ? "  (significant)" : "") << "\n";

    if (!out_dir.empty()) {
        auto dir = ensure_dir(out_dir);
        export_to_file([&](std::ostream& o) { export_summary_csv(reports, o); },
                       (dir / "summary.csv").string());
        export_to_file([&](std::ostream& o) { export_long_csv(reports, o); },
                       (dir / "replications.csv").string());
        export_to_file([&](std::ostream& o) { export_comparisons_csv(comparisons, o); },
                       (dir / "comparisons.csv").string());
        auto doc = base_manifest("evaluate", argc, argv, seed, seed_opt.explicit_seed);
        doc["model"] = model.name;
        doc["policies"] = policy_specs;
        doc["n"] = n;
        doc["horizon"] = horizon;
        doc["welch"] = welch;
        doc["outputs"] = {"summary.csv", "replications.csv", "comparisons.csv"};
        write_manifest(doc, dir);
    }
    return 0;
}

int cmd_sweep(const ModelOpt& model_opt, SeedOpt& seed_opt, const std::string& lambda_spec,
              const std::vector<std::string>& policy_specs, const std::string& train_svfa_spec,
              int n, double horizon, int jobs, const std::string& out_dir, int argc,
              char** argv) {
    auto lambdas = parse_lambdas(lambda_spec);
    auto seed = seed_opt.resolve();

    bool builtin = false;
    for (const auto& name : builtin_scenario_names())
        if (name == model_opt.model) builtin = true;
    if (!builtin) throw Error("sweep requires a builtin scenario name (the rate is varied)");

    auto make_model = [&](double lambda) {
        auto m = builtin_scenario(model_opt.model, lambda);
        if (model_opt.arrivals == "pattern") m.arrivals = default_arrival_pattern(lambda);
        return m;
    };

    BOConfig svfa_cfg;
    bool train_svfa_flag = !train_svfa_spec.empty();
    if (train_svfa_flag) {
        std::stringstream ss(train_svfa_spec);
        std::string tok;
        std::vector<std::string> sets;
        while (std::getline(ss, tok, ',')) sets.push_back(tok);
        apply_overrides(svfa_cfg, sets);
        svfa_cfg.horizon = horizon;
    }

    std::vector<EvalReport> all;
    for (double lambda : lambdas) {
        auto model = make_model(lambda);
        for (const auto& spec : policy_specs) {
            auto factory = [&model, &spec] { return make_policy(spec, model); };
            auto rep = evaluate(model, factory, n, horizon, seed, jobs);
            rep.policy = spec;
            std::cout << model.name << " lambda " << lambda << " " << spec << ": mean "
                      << rep.mean << " (+-" << rep.ci_half << ") max_util "
                      << *std::max_element(rep.utilization.begin(), rep.utilization.end())
                      << "\n";
            all.push_back(std::move(rep));
        }
        if (train_svfa_flag) {
            // per-rate training directive: refit the weights at this lambda
            BOConfig cfg = svfa_cfg;
            cfg.seed = splitmix64(seed ^ static_cast<std::uint64_t>(lambda * 1e6));
            auto trained = train_svfa(model, cfg);
            auto w = WeightVector::from_vector(trained.best_x);
            auto factory = [&model, &w] { return svfa_policy(w); };
            auto rep = evaluate(model, factory, n, horizon, seed, jobs);
            rep.policy = "svfa-trained";
            std::cout << model.name << " lambda " << lambda << " svfa-trained: mean " << rep.mean
                      << " (+-" << rep.ci_half << ")\n";
            all.push_back(std::move(rep));
        }
    }

    if (!out_dir.empty()) {
        auto dir = ensure_dir(out_dir);
        export_to_file([&](std::ostream& o) { export_summary_csv(all, o); },
                       (dir / "sweep_summary.csv").string());
        export_to_file([&](std::ostream& o) { export_long_csv(all, o); },
                       (dir / "sweep_replications.csv").string());
        auto doc = base_manifest("sweep", argc, argv, seed, seed_opt.explicit_seed);
        doc["model"] = model_opt.model;
        doc["lambdas"] = lambdas;
        doc["policies"] = policy_specs;
        doc["n"] = n;
        doc["horizon"] = horizon;
        if (train_svfa_flag) doc["train_svfa"] = train_svfa_spec;
        doc["outputs"] = {"sweep_summary.csv", "sweep_replications.csv"};
        write_manifest(doc, dir);
    }
    return 0;
}

int cmd_export(const std::string& in_path, const std::string& out_path) {
    std::ifstream in(in_path);
    if (!in) throw IoError("cannot open " + in_path);
    auto reports = import_long_csv(in);
    export_to_file([&](std::ostream& o) { export_summary_csv(reports, o); }, out_path);
    std::cout << "wrote " << reports.size() << " summary rows to " << out_path << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"bpsim: business process simulation and resource allocation policy learning"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    // ---- simulate ----
    auto* sim_cmd = app.add_subcommand("simulate", "run one episode and print its statistics");
    ModelOpt sim_model;
    SeedOpt sim_seed;
    std::string sim_policy = "spt";
    double sim_horizon = 5000.0;
    std::string sim_trace, sim_out;
    sim_model.add_to(sim_cmd);
    sim_seed.add_to(sim_cmd);
    sim_cmd->add_option("--policy", sim_policy,
                        "spt|fifo|random|matching|svfa:<weights>|drl:<checkpoint>");
    sim_cmd->add_option("--horizon", sim_horizon, "episode length in time units");
    sim_cmd->add_option("--trace", sim_trace, "write the event trace CSV here");
    sim_cmd->add_option("--out", sim_out, "directory for the run manifest");

    // ---- train ----
    auto* train_cmd = app.add_subcommand("train", "train a policy");
    train_cmd->require_subcommand(1);

    auto* svfa_cmd = train_cmd->add_subcommand("svfa", "Bayesian optimization of the weights");
    ModelOpt svfa_model;
    SeedOpt svfa_seed;
    BOConfig svfa_cfg;
    std::string svfa_out = "svfa_run";
    std::vector<std::string> svfa_sets;
    svfa_model.add_to(svfa_cmd);
    svfa_seed.add_to(svfa_cmd);
    svfa_cmd->add_option("--trials", svfa_cfg.trials, "objective evaluations (default 20)");
    svfa_cmd->add_option("--initial-design", svfa_cfg.initial_design,
                         "space-filling points before the surrogate");
    svfa_cmd->add_option("--sims-per-trial", svfa_cfg.sims_per_trial,
                         "episodes per objective evaluation (default 5000)");
    svfa_cmd->add_option("--horizon", svfa_cfg.horizon, "episode length (default 5000)");
    svfa_cmd->add_flag("--random-search", svfa_cfg.random_search_only,
                       "skip the surrogate (ablation)");
    svfa_cmd->add_option("--set", svfa_sets, "override bo config keys, key=value");
    svfa_cmd->add_option("--out", svfa_out, "output directory");

    auto* drl_cmd = train_cmd->add_subcommand("drl", "maskable PPO");
    ModelOpt drl_model;
    SeedOpt drl_seed;
    PPOConfig drl_flags;
    drl_flags.max_steps = 0; // filled from the preset unless --max-steps given
    std::string drl_out = "drl_run";
    std::string drl_preset = "paper";
    bool drl_temporal = false;
    bool drl_quiet = false;
    std::vector<std::string> drl_sets;
    drl_model.add_to(drl_cmd);
    drl_seed.add_to(drl_cmd);
    drl_cmd->add_option("--max-steps", drl_flags.max_steps, "training budget in decision steps");
    drl_cmd->add_option("--horizon", drl_flags.horizon, "episode length (default 5000)");
    drl_cmd->add_option("--postpone-penalty", drl_flags.postpone_penalty,
                        "reward added to every postpone action (e.g. -0.1)");
    drl_cmd->add_flag("--temporal-feature", drl_temporal,
                      "append the arrival-pattern phase to the observation");
    drl_cmd->add_option("--preset", drl_preset, "desk | paper")
        ->check(CLI::IsMember({"desk", "paper"}));
    drl_cmd->add_flag("--quiet", drl_quiet, "suppress per-episode progress on stderr");
    drl_cmd->add_option("--set", drl_sets, "override ppo config keys, key=value");
    drl_cmd->add_option("--out", drl_out, "output directory");

    // ---- evaluate ----
    auto* eval_cmd = app.add_subcommand("evaluate", "replicated evaluation with t-tests");
    ModelOpt eval_model;
    SeedOpt eval_seed;
    std::vector<std::string> eval_policies;
    int eval_n = 100;
    double eval_horizon = 5000.0;
    int eval_jobs = 1;
    bool eval_welch = false;
    std::string eval_out;
    eval_model.add_to(eval_cmd);
    eval_seed.add_to(eval_cmd);
    eval_cmd->add_option("--policy", eval_policies, "policy specs (repeatable)")->required();
    eval_cmd->add_option("--n", eval_n, "replications per policy (default 100)");
    eval_cmd->add_option("--horizon", eval_horizon, "episode length (default 5000)");
    eval_cmd->add_option("--jobs", eval_jobs, "worker threads for replications");
    eval_cmd->add_flag("--welch", eval_welch, "Welch t-test instead of pooled Student");
    eval_cmd->add_option("--out", eval_out, "output directory for CSVs and manifest");

    // ---- sweep ----
    auto* sweep_cmd = app.add_subcommand("sweep", "evaluate across arrival rates");
    ModelOpt sweep_model;
    SeedOpt sweep_seed;
    std::string sweep_lambdas = "0.3:0.6:0.05";
    std::vector<std::string> sweep_policies;
    std::string sweep_train_svfa;
    int sweep_n = 100;
    double sweep_horizon = 5000.0;
    int sweep_jobs = 1;
    std::string sweep_out;
    sweep_model.add_to(sweep_cmd);
    sweep_seed.add_to(sweep_cmd);
    sweep_cmd->add_option("--lambdas", sweep_lambdas, "lo:hi:step or comma list");
    sweep_cmd->add_option("--policy", sweep_policies, "policy specs (repeatable)")->required();
    sweep_cmd->add_option("--train-svfa", sweep_train_svfa,
                          "retrain svfa per rate, e.g. trials=10,sims_per_trial=50");
    sweep_cmd->add_option("--n", sweep_n, "replications per cell");
    sweep_cmd->add_option("--horizon", sweep_horizon, "episode length");
    sweep_cmd->add_option("--jobs", sweep_jobs, "worker threads");
    sweep_cmd->add_option("--out", sweep_out, "output directory");

    // ---- export ----
    auto* export_cmd = app.add_subcommand("export", "recompute a summary CSV from a long CSV");
    std::string export_in, export_out;
    export_cmd->add_option("--in", export_in, "replications.csv (long layout)")->required();
    export_cmd->add_option("--out", export_out, "summary CSV to write")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help / --version
        app.exit(e);
        return 2;
    }

    try {
        if (*sim_cmd)
            return cmd_simulate(sim_model, sim_seed, sim_policy, sim_horizon, sim_trace, sim_out,
                                argc, argv);
        if (*svfa_cmd) {
            apply_overrides(svfa_cfg, svfa_sets);
            svfa_cfg.check();
            return cmd_train_svfa(svfa_model, svfa_seed, svfa_cfg, svfa_out, argc, argv);
        }
        if (*drl_cmd)
            return cmd_train_drl(drl_model, drl_seed, drl_flags, drl_preset, drl_temporal,
                                 drl_out, drl_quiet, drl_sets, argc, argv);
        if (*eval_cmd)
            return cmd_evaluate(eval_model, eval_seed, eval_policies, eval_n, eval_horizon,
                                eval_jobs, eval_welch, eval_out, argc, argv);
        if (*sweep_cmd)
            return cmd_sweep(sweep_model, sweep_seed, sweep_lambdas, sweep_policies,
                             sweep_train_svfa, sweep_n, sweep_horizon, sweep_jobs, sweep_out,
                             argc, argv);
        if (*export_cmd) return cmd_export(export_in, export_out);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n"
                  << "policy specs: spt|fifo|random|matching|svfa:<weights>|drl:<checkpoint>\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
