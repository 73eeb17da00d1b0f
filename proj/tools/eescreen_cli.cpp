// eescreen command-line tool: screen, boost, simulate, evaluate.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "eescreen/eescreen.hpp"

namespace fs = std::filesystem;
using namespace eescreen;

namespace {

enum Exit : int { ok = 0, usage = 2, data = 3, numeric = 4 };

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

int exit_code(ErrorKind k) {
    switch (k) {
        case ErrorKind::degenerate_outcome:
        case ErrorKind::empty_grid:
        case ErrorKind::no_cases:
        case ErrorKind::no_controls:
        case ErrorKind::no_comparable_pairs:
        case ErrorKind::non_bracketing:
            return numeric;
        case ErrorKind::unsupported_model:
            return usage;
        default:
            return data;
    }
}

struct Common {
    unsigned threads = 0;
    std::optional<std::uint64_t> seed;
    fs::path out = ".";
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--threads", c.threads, "worker threads (default: EESCREEN_THREADS or 1)");
    cmd->add_option("--seed", c.seed, "random seed, recorded in the manifest");
    cmd->add_option("--out", c.out, "output directory")->capture_default_str();
}

ModelKind parse_model(const std::string& s) {
    if (s == "cox") return ModelKind::cox_score;
    if (s == "aft") return ModelKind::aft_gehan;
    if (s == "modelfree") return ModelKind::model_free_si;
    if (auto k = parse_model_kind(s)) return *k;
    throw UsageError("unknown model '" + s + "'");
}

ModelSpec make_model(const std::string& name, std::optional<double> t0) {
    ModelSpec m;
    m.kind = parse_model(name);
    if (m.kind == ModelKind::t_year) {
        if (!t0) throw UsageError("--model tyear requires --t0");
        if (!(*t0 > 0)) throw UsageError("--t0 must be positive");
        m.t0 = t0;
    } else if (t0) {
        throw UsageError("--t0 only applies to --model tyear");
    }
    return m;
}

Outcome load_outcome(const fs::path& path, ModelKind kind) {
    if (kind == ModelKind::linear) return load_column(path);
    return load_survival(path);
}

std::string fmt(double v) { return fmt_double(v); }

void finish(RunManifest m, const Common& c, std::chrono::steady_clock::time_point start) {
    m.seed = c.seed;
    m.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_json(c.out / "manifest.json", to_json(m));
}

// ---------------------------------------------------------------------------

struct ScreenArgs {
    Common common;
    fs::path matrix, outcome;
    std::string model;
    std::optional<double> t0, gamma;
    std::optional<std::size_t> top_d;
};

int run_screen(const ScreenArgs& a) {
    const auto start = std::chrono::steady_clock::now();
    const auto model = make_model(a.model, a.t0);
    if (a.top_d && a.gamma) throw UsageError("--top-d and --gamma are mutually exclusive");
    const auto x = standardize(load_matrix(a.matrix));
    const auto o = load_outcome(a.outcome, model.kind);
    const unsigned threads = resolve_threads(a.common.threads);
    const auto stats = screening_stats(model, x, o, threads);

    RetentionRule rule = RetentionRule::top_d(std::min(default_top_d(x.n()), x.p()));
    if (a.top_d) rule = RetentionRule::top_d(*a.top_d);
    if (a.gamma) rule = RetentionRule::threshold(*a.gamma);
    const auto kept = eescreen::eescreen(stats, rule);
    const auto ranking = rank_statistics(stats);

    fs::create_directories(a.common.out);
    const auto csv = a.common.out / "ranking.csv";
    const auto meta = a.common.out / "screening.json";
    write_file(csv, ranking_csv(stats, ranking, kept.indices.size()));
    write_json(meta, screening_metadata(stats, rule, x.n(), kept.indices.size()));
    if (stats.degenerate) std::cerr << "warning: degenerate outcome, all statistics are zero\n";

    RunManifest m;
    m.subcommand = "screen";
    m.config = {{"model", a.model}, {"threads", threads}};
    if (a.t0) m.config["t0"] = *a.t0;
    if (a.top_d) m.config["top_d"] = *a.top_d;
    if (a.gamma) m.config["gamma"] = *a.gamma;
    m.inputs = {a.matrix, a.outcome};
    m.outputs = {csv, meta};
    finish(m, a.common, start);
    std::cout << "retained " << kept.indices.size() << " of " << x.p() << " covariates\n";
    return ok;
}

// ---------------------------------------------------------------------------

struct BoostArgs {
    Common common;
    fs::path matrix, outcome;
    std::string model, tune;
    std::optional<double> t0;
    double epsilon = 0.01;
    std::size_t t_max = 1000;
};

int run_boost(const BoostArgs& a) {
    const auto start = std::chrono::steady_clock::now();
    const auto model = make_model(a.model, a.t0);
    if (!model.has_full_equation()) throw UsageError("boost supports linear, tyear and aft");
    if (!(a.epsilon > 0.0 && a.epsilon <= 0.1)) throw UsageError("--epsilon must lie in (0, 0.1]");
    if (a.t_max < 1) throw UsageError("--t-max must be at least 1");
    std::optional<GcvCriterion> crit;
    if (a.tune.empty()) {
        crit = default_criterion(model.kind);
    } else if (a.tune == "brier") {
        crit = GcvCriterion::brier;
    } else if (a.tune == "gehan") {
        crit = GcvCriterion::gehan;
    } else if (a.tune == "squared") {
        crit = GcvCriterion::squared_error;
    } else if (a.tune != "none") {
        throw UsageError("--tune must be one of brier, gehan, squared, none");
    }
    if (crit == GcvCriterion::brier && model.kind != ModelKind::t_year) throw UsageError("--tune brier needs tyear");
    if (crit == GcvCriterion::gehan && model.kind != ModelKind::aft_gehan) throw UsageError("--tune gehan needs aft");
    if (crit == GcvCriterion::squared_error && model.kind != ModelKind::linear) {
        throw UsageError("--tune squared needs linear");
    }

    const auto x = standardize(load_matrix(a.matrix));
    const auto o = load_outcome(a.outcome, model.kind);
    const unsigned threads = resolve_threads(a.common.threads);
    const auto path = eeboost(model, x, o, {a.epsilon, a.t_max, threads});
    const bool stagnated = path.stop == StopReason::stagnation;

    fs::create_directories(a.common.out);
    const auto pcsv = a.common.out / "path.csv";
    const auto pjson = a.common.out / "path.json";
    const auto cjson = a.common.out / "coefficients.json";
    write_file(pcsv, path_csv(path));
    auto header = path_header(path);
    header["stagnation"] = stagnated;
    write_json(pjson, header);

    json coefs;
    if (crit && path.iterations() > 0) {
        coefs = tuned_json(gcv_tune(path, x, o, *crit), *crit, path.offset);
    } else {
        coefs["criterion"] = crit ? std::string(to_string(*crit)) : "none";
        coefs["t_star"] = path.iterations();
        coefs["offset"] = path.offset;
        coefs["coefficients"] = coefficients_json(materialize(path, path.iterations()));
    }
    coefs["scale"] = "standardized";
    write_json(cjson, coefs);

    if (stagnated) {
        std::cerr << "notice: estimating equation vanished after " << path.iterations()
                  << " iterations; path stopped early\n";
    }
    RunManifest m;
    m.subcommand = "boost";
    m.config = {{"model", a.model}, {"epsilon", a.epsilon}, {"t_max", a.t_max},
                {"tune", crit ? std::string(to_string(*crit)) : "none"}, {"threads", threads}};
    if (a.t0) m.config["t0"] = *a.t0;
    m.inputs = {a.matrix, a.outcome};
    m.outputs = {pcsv, pjson, cjson};
    finish(m, a.common, start);
    std::cout << "iterations " << path.iterations() << ", stop " << to_string(path.stop) << "\n";
    return ok;
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
    Common common;
    fs::path scenario;
    std::vector<std::string> methods;
    std::optional<std::size_t> replications;
    std::optional<std::size_t> export_rep;
};

// Writes one replication's raw covariates, outcome and true coefficients.
int export_replication(const ScenarioConfig& cfg, std::size_t rep, const Common& c,
                       const fs::path& scenario, std::chrono::steady_clock::time_point start) {
    if (rep >= cfg.replications) throw UsageError("--export-rep must be below the replication count");
    const auto truth = default_truth();
    const auto cal = calibrate_scenario(cfg, truth);
    const auto x = gen_covariates(cfg, rep);
    const auto s = gen_outcomes(x, truth, cfg, cal.censoring.lambda, rep);
    fs::create_directories(c.out);
    const auto mat = c.out / "covariates.eemat";
    const auto surv = c.out / "survival.csv";
    const auto tr = c.out / "truth.csv";
    save_matrix(x, mat, MatrixFormat::binary);
    save_survival(s, surv);
    std::string t = "index,value\n";
    for (const auto& [j, b] : truth.beta0) t += std::to_string(j) + ',' + fmt(b) + '\n';
    write_file(tr, t);
    RunManifest m;
    m.subcommand = "simulate";
    m.config = {{"scenario", to_json(cfg)}, {"export_rep", rep}, {"t0", cal.t0}, {"lambda", cal.censoring.lambda}};
    m.inputs = {scenario};
    m.outputs = {mat, surv, tr};
    auto cc = c;
    cc.seed = cfg.base_seed;
    finish(m, cc, start);
    std::cout << "t0 " << fmt(cal.t0) << "\n";
    return ok;
}

int run_simulate(const SimulateArgs& a) {
    const auto start = std::chrono::steady_clock::now();
    auto cfg = load_scenario(a.scenario);
    if (a.common.seed) cfg.base_seed = *a.common.seed;
    if (a.replications) cfg.replications = *a.replications;
    validate(cfg);
    if (a.export_rep) return export_replication(cfg, *a.export_rep, a.common, a.scenario, start);
    std::vector<Method> methods;
    for (const auto& s : a.methods) {
        try {
            methods.push_back(parse_method(s));
        } catch (const Error& e) {
            throw UsageError(e.what());
        }
    }
    if (methods.empty()) throw UsageError("--methods is required");
    const unsigned threads = resolve_threads(a.common.threads);
    const auto summary = run_experiment(cfg, methods, threads);

    fs::create_directories(a.common.out);
    const fs::path& o = a.common.out;
    std::vector<fs::path> outs = {o / "replications.csv", o / "replication_fp_fn.csv", o / "aggregate.json",
                                  o / "fp_fn.csv"};
    write_file(outs[0], replications_csv(summary));
    write_file(outs[1], replication_fp_fn_csv(summary));
    write_json(outs[2], aggregate_json(summary));
    write_file(outs[3], fp_fn_plot_csv(summary));
    if (cfg.post_screen) {
        outs.push_back(o / "replication_post.csv");
        write_file(outs.back(), replication_post_csv(summary));
        outs.push_back(o / "post_screen.csv");
        write_file(outs.back(), post_plot_csv(summary));
    }

    RunManifest m;
    m.subcommand = "simulate";
    m.config = {{"scenario", to_json(cfg)}, {"methods", a.methods}, {"threads", threads}};
    m.inputs = {a.scenario};
    m.outputs = outs;
    auto c = a.common;
    c.seed = cfg.base_seed;
    finish(m, c, start);
    for (const auto& ag : summary.aggregates) {
        std::cout << ag.method << ": median minimum model size " << fmt(ag.median_min_model_size) << " (IQR "
                  << fmt(ag.iqr_min_model_size) << ")\n";
    }
    return ok;
}

// ---------------------------------------------------------------------------

struct EvaluateArgs {
    Common common;
    fs::path outcome, risk, predictions, estimate, truth;
    std::string metric;
    std::optional<double> t0, tau;
};

// Coefficients from a coefficients.json (boost output) or an index,value csv.
SparseCoefs load_coefficients(const fs::path& path) {
    SparseCoefs beta;
    if (path.extension() == ".json") {
        json j;
        try {
            j = json::parse(read_file(path));
            for (const auto& e : j.at("coefficients")) beta[e.at("index").get<std::size_t>()] = e.at("value").get<double>();
        } catch (const json::exception& e) {
            fail(ErrorKind::malformed_file, path.string() + ": " + e.what());
        }
        return beta;
    }
    const auto idx = load_column(path, "index");
    const auto val = load_column(path, "value");
    for (std::size_t k = 0; k < idx.size(); ++k) {
        if (!(idx[k] >= 0) || idx[k] != std::floor(idx[k])) fail(ErrorKind::malformed_file, "index must be a whole number");
        beta[static_cast<std::size_t>(idx[k])] = val[k];
    }
    return beta;
}

int run_evaluate(const EvaluateArgs& a) {
    const auto start = std::chrono::steady_clock::now();
    json result;
    result["metric"] = a.metric;
    RunManifest m;
    m.subcommand = "evaluate";
    m.config = {{"metric", a.metric}};

    if (a.metric == "mse") {
        if (a.estimate.empty() || a.truth.empty()) throw UsageError("--metric mse needs --estimate and --truth");
        result["value"] = mse(load_coefficients(a.estimate), load_coefficients(a.truth));
        m.inputs = {a.estimate, a.truth};
    } else {
        if (a.outcome.empty()) throw UsageError("--metric " + a.metric + " needs --outcome");
        const bool brier_metric = a.metric == "brier";
        if (brier_metric && a.predictions.empty()) throw UsageError("--metric brier needs --predictions");
        if (!brier_metric && a.risk.empty()) throw UsageError("--metric " + a.metric + " needs --risk");
        if ((brier_metric || a.metric == "auc") && !a.t0) throw UsageError("--metric " + a.metric + " needs --t0");
        const auto s = load_survival(a.outcome);
        const auto scores = load_column(brier_metric ? a.predictions : a.risk);
        if (scores.size() != s.size()) fail(ErrorKind::invalid_argument, "score and outcome row counts differ");
        const auto sc = km_censoring(s);
        if (brier_metric) {
            result["value"] = brier(scores, s, *a.t0, sc);
            result["t0"] = *a.t0;
        } else if (a.metric == "auc") {
            result["value"] = ipcw_auc(RiskScores{scores}, s, *a.t0, sc);
            result["t0"] = *a.t0;
        } else {
            const double tau = a.tau ? *a.tau : default_tau(s);
            result["value"] = c_statistic(RiskScores{scores}, s, tau, sc);
            result["tau"] = tau;
        }
        result["n"] = s.size();
        m.inputs = {a.outcome, brier_metric ? a.predictions : a.risk};
    }
    fs::create_directories(a.common.out);
    const auto mjson = a.common.out / "metrics.json";
    write_json(mjson, result);
    m.outputs = {mjson};
    if (a.t0) m.config["t0"] = *a.t0;
    if (a.tau) m.config["tau"] = *a.tau;
    finish(m, a.common, start);
    std::cout << a.metric << " = " << fmt(result["value"].get<double>()) << "\n";
    return ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Estimating-equation screening for high-dimensional survival data"};
    app.set_version_flag("--version", std::string(kLibraryVersion));
    app.require_subcommand(1);

    ScreenArgs sa;
    auto* screen = app.add_subcommand("screen", "rank covariates by marginal estimating-equation statistics");
    screen->add_option("--matrix", sa.matrix, "covariate matrix (.csv or .eemat)")->required();
    screen->add_option("--outcome", sa.outcome, "outcome csv (time,event; one numeric column for linear)")->required();
    screen->add_option("--model", sa.model, "linear|cox|tyear|aft|modelfree")->required();
    screen->add_option("--t0", sa.t0, "horizon for the t-year model");
    screen->add_option("--top-d", sa.top_d, "retain the d largest statistics (default floor(n/log n))");
    screen->add_option("--gamma", sa.gamma, "retain statistics >= gamma");
    add_common(screen, sa.common);

    BoostArgs ba;
    auto* boost = app.add_subcommand("boost", "epsilon-stagewise path with optional GCV tuning");
    boost->add_option("--matrix", ba.matrix, "covariate matrix (.csv or .eemat)")->required();
    boost->add_option("--outcome", ba.outcome, "outcome csv")->required();
    boost->add_option("--model", ba.model, "linear|tyear|aft")->required();
    boost->add_option("--t0", ba.t0, "horizon for the t-year model");
    boost->add_option("--epsilon", ba.epsilon, "step size in (0, 0.1]")->capture_default_str();
    boost->add_option("--t-max", ba.t_max, "maximum iterations")->capture_default_str();
    boost->add_option("--tune", ba.tune, "brier|gehan|squared|none (default follows the model)");
    add_common(boost, ba.common);

    SimulateArgs ma;
    auto* sim = app.add_subcommand("simulate", "run a simulation scenario");
    sim->add_option("--scenario", ma.scenario, "scenario JSON file")->required();
    sim->add_option("--methods", ma.methods, "e.g. eescreen:aft,ieescreen:tyear,modelfree,zhu_omega,marginal_tyear")
        ->delimiter(',');
    sim->add_option("--replications", ma.replications, "override the scenario's replication count");
    sim->add_option("--export-rep", ma.export_rep,
                    "write replication K's data (covariates.eemat, survival.csv, truth.csv) instead of running");
    add_common(sim, ma.common);

    EvaluateArgs ea;
    auto* eval = app.add_subcommand("evaluate", "prediction and estimation metrics");
    eval->add_option("--metric", ea.metric, "brier|auc|cstat|mse")
        ->required()
        ->check(CLI::IsMember({"brier", "auc", "cstat", "mse"}));
    eval->add_option("--outcome", ea.outcome, "time,event csv");
    eval->add_option("--risk", ea.risk, "risk scores, first column (auc, cstat)");
    eval->add_option("--predictions", ea.predictions, "predicted survival at t0, first column (brier)");
    eval->add_option("--estimate", ea.estimate, "estimated coefficients (.json or index,value csv)");
    eval->add_option("--truth", ea.truth, "true coefficients (.json or index,value csv)");
    eval->add_option("--t0", ea.t0, "horizon (brier, auc)");
    eval->add_option("--tau", ea.tau, "truncation time (cstat; default 90th percentile of Y)");
    add_common(eval, ea.common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? ok : usage;
    }

    try {
        if (*screen) return run_screen(sa);
        if (*boost) return run_boost(ba);
        if (*sim) return run_simulate(ma);
        if (*eval) return run_evaluate(ea);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return usage;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return data;
    }
    return usage;
}
