#pragma once

// Serialization of run artifacts: scenario files, rankings, boosting paths,
// simulation summaries and run manifests.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include "json.hpp"

#include "eescreen/simulate.hpp"

namespace eescreen {

#ifdef EESCREEN_VERSION
inline constexpr std::string_view kLibraryVersion = EESCREEN_VERSION;
#else
inline constexpr std::string_view kLibraryVersion = "0.1.0";
#endif

using json = nlohmann::ordered_json;

// FNV-1a, 64 bit. Used to fingerprint inputs and outputs, not for security.
inline std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i, v >>= 4) out[static_cast<std::size_t>(i)] = digits[v & 0xf];
    return out;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::io, "cannot read " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::string file_digest(const std::filesystem::path& path) {
    return "fnv1a64:" + hex64(fnv1a64(read_file(path)));
}

inline void write_file(const std::filesystem::path& path, std::string_view text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::io, "cannot write " + path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) fail(ErrorKind::io, "write failed for " + path.string());
}

inline void write_json(const std::filesystem::path& path, const json& j) { write_file(path, j.dump(2) + "\n"); }

// Shortest round-trip decimal form.
inline std::string fmt_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, res.ptr};
}

// ---------------------------------------------------------------------------
// Scenario files

namespace detail {

template <class T>
T take(const json& obj, std::string_view key, T fallback) {
    auto it = obj.find(key);
    if (it == obj.end()) return fallback;
    try {
        return it->template get<T>();
    } catch (const json::exception&) {
        fail(ErrorKind::invalid_config, "field '" + std::string(key) + "' has the wrong type");
    }
}

inline void reject_unknown(const json& obj, std::initializer_list<std::string_view> known, std::string_view where) {
    for (const auto& [k, v] : obj.items()) {
        if (std::find(known.begin(), known.end(), k) == known.end()) {
            fail(ErrorKind::invalid_config, "unknown field '" + k + "' in " + std::string(where));
        }
    }
}

inline std::size_t take_count(const json& obj, std::string_view key, std::size_t fallback) {
    auto it = obj.find(key);
    if (it == obj.end()) return fallback;
    if (!it->is_number_integer() || it->get<long long>() < 0) {
        fail(ErrorKind::invalid_config, "field '" + std::string(key) + "' must be a nonnegative integer");
    }
    return it->get<std::size_t>();
}

}  // namespace detail

inline ScenarioConfig scenario_from_json(const json& j) {
    if (!j.is_object()) fail(ErrorKind::invalid_config, "scenario must be a JSON object");
    detail::reject_unknown(j,
                           {"name", "n", "p", "correlation", "rho", "error_dist", "target_censoring", "t0",
                            "replications", "base_seed", "boost", "post_screen"},
                           "scenario");
    ScenarioConfig c;
    c.name = detail::take<std::string>(j, "name", c.name);
    c.n = detail::take_count(j, "n", c.n);
    c.p = detail::take_count(j, "p", c.p);
    const auto corr = detail::take<std::string>(j, "correlation", std::string(to_string(c.correlation)));
    if (corr == "partial_orthogonality") {
        c.correlation = Correlation::partial_orthogonality;
    } else if (corr == "compound_symmetry") {
        c.correlation = Correlation::compound_symmetry;
    } else {
        fail(ErrorKind::invalid_config, "unknown correlation '" + corr + "'");
    }
    c.rho = detail::take<double>(j, "rho", c.rho);
    const auto err = detail::take<std::string>(j, "error_dist", std::string(to_string(c.error_dist)));
    if (err == "logistic") {
        c.error_dist = ErrorDist::logistic;
    } else if (err == "standard_normal") {
        c.error_dist = ErrorDist::standard_normal;
    } else {
        fail(ErrorKind::invalid_config, "unknown error_dist '" + err + "'");
    }
    c.target_censoring = detail::take<double>(j, "target_censoring", c.target_censoring);
    if (auto it = j.find("t0"); it != j.end()) {
        if (!it->is_object()) fail(ErrorKind::invalid_config, "t0 must be an object");
        detail::reject_unknown(*it, {"empirical_quantile", "fixed"}, "t0");
        if (it->size() != 1) fail(ErrorKind::invalid_config, "t0 takes exactly one of empirical_quantile, fixed");
        if (it->contains("fixed")) {
            c.t0_rule = {T0Rule::Kind::fixed, detail::take<double>(*it, "fixed", 0.0)};
        } else {
            c.t0_rule = {T0Rule::Kind::empirical_quantile, detail::take<double>(*it, "empirical_quantile", 0.2)};
        }
    }
    c.replications = detail::take_count(j, "replications", c.replications);
    if (auto it = j.find("base_seed"); it != j.end()) {
        if (!it->is_number_unsigned()) fail(ErrorKind::invalid_config, "base_seed must be a nonnegative integer");
        c.base_seed = it->get<std::uint64_t>();
    }
    if (auto it = j.find("boost"); it != j.end()) {
        if (!it->is_object()) fail(ErrorKind::invalid_config, "boost must be an object");
        detail::reject_unknown(*it, {"epsilon", "t_max"}, "boost");
        c.boost.epsilon = detail::take<double>(*it, "epsilon", c.boost.epsilon);
        c.boost.t_max = detail::take_count(*it, "t_max", c.boost.t_max);
    }
    if (auto it = j.find("post_screen"); it != j.end() && !it->is_null()) {
        if (!it->is_object()) fail(ErrorKind::invalid_config, "post_screen must be an object");
        detail::reject_unknown(*it, {"test_n", "retain_sizes"}, "post_screen");
        PostScreenConfig ps;
        ps.test_n = detail::take_count(*it, "test_n", ps.test_n);
        ps.retain_sizes = detail::take<std::vector<std::size_t>>(*it, "retain_sizes", {});
        c.post_screen = ps;
    }
    validate(c);
    return c;
}

inline json to_json(const ScenarioConfig& c) {
    json j;
    j["name"] = c.name;
    j["n"] = c.n;
    j["p"] = c.p;
    j["correlation"] = to_string(c.correlation);
    j["rho"] = c.rho;
    j["error_dist"] = to_string(c.error_dist);
    j["target_censoring"] = c.target_censoring;
    j["t0"] = json::object(
        {{c.t0_rule.kind == T0Rule::Kind::fixed ? "fixed" : "empirical_quantile", c.t0_rule.value}});
    j["replications"] = c.replications;
    j["base_seed"] = c.base_seed;
    j["boost"] = {{"epsilon", c.boost.epsilon}, {"t_max", c.boost.t_max}};
    if (c.post_screen) {
        j["post_screen"] = {{"test_n", c.post_screen->test_n}, {"retain_sizes", c.post_screen->retain_sizes}};
    }
    return j;
}

inline ScenarioConfig load_scenario(const std::filesystem::path& path) {
    if (!std::filesystem::is_regular_file(path)) {
        fail(ErrorKind::invalid_config, "scenario file not found: " + path.string());
    }
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        fail(ErrorKind::invalid_config, std::string("scenario is not valid JSON: ") + e.what());
    }
    return scenario_from_json(j);
}

// ---------------------------------------------------------------------------
// Screening reports

inline std::string ranking_csv(const ScreeningStatVector& stats, const Ranking& ranking, std::size_t rows) {
    std::string out = "index,statistic,rank\n";
    for (std::size_t r = 0; r < rows; ++r) {
        const auto j = ranking.order[r];
        out += std::to_string(j) + ',' + fmt_double(stats.stats[j]) + ',' + std::to_string(r + 1) + '\n';
    }
    return out;
}

inline json screening_metadata(const ScreeningStatVector& stats, const RetentionRule& rule, std::size_t n,
                               std::size_t retained) {
    json j;
    j["model"] = to_string(stats.model.kind);
    if (stats.model.t0) j["t0"] = *stats.model.t0;
    if (stats.nuisance) j["nuisance"] = *stats.nuisance;
    j["n"] = n;
    j["p"] = stats.stats.size();
    if (rule.kind == RetentionRule::Kind::top_d) {
        j["rule"] = {{"top_d", rule.d}};
    } else {
        j["rule"] = {{"threshold", rule.gamma}};
    }
    j["retained"] = retained;
    json warnings = json::array();
    if (stats.degenerate) warnings.push_back("degenerate-outcome: all statistics are zero");
    if (stats.clamped_weights > 0) {
        warnings.push_back("clamped-weights: " + std::to_string(stats.clamped_weights) +
                           " censoring weights hit the floor");
    }
    j["warnings"] = warnings;
    return j;
}

// ---------------------------------------------------------------------------
// Boosting paths

inline std::string path_csv(const CoefficientPath& path) {
    std::string out = "t,j,signed_step\n";
    for (const auto& u : path.updates) {
        out += std::to_string(u.t) + ',' + std::to_string(u.j) + ',' + fmt_double(u.sign * path.epsilon) + '\n';
    }
    return out;
}

inline json path_header(const CoefficientPath& path) {
    json j;
    j["model"] = to_string(path.model.kind);
    if (path.model.t0) j["t0"] = *path.model.t0;
    j["epsilon"] = path.epsilon;
    j["p"] = path.p;
    j["offset"] = path.offset;
    j["iterations"] = path.iterations();
    j["stop_reason"] = to_string(path.stop);
    return j;
}

inline json coefficients_json(const SparseCoefs& beta) {
    json arr = json::array();
    for (const auto& [j, b] : beta) arr.push_back({{"index", j}, {"value", b}});
    return arr;
}

inline std::string_view to_string(GcvCriterion c) {
    switch (c) {
        case GcvCriterion::brier: return "brier";
        case GcvCriterion::gehan: return "gehan";
        case GcvCriterion::squared_error: return "squared_error";
    }
    return "unknown";
}

inline json tuned_json(const GcvResult& r, GcvCriterion c, double offset) {
    json j;
    j["criterion"] = to_string(c);
    j["t_star"] = r.t_star;
    j["value"] = r.value;
    j["offset"] = offset;
    j["coefficients"] = coefficients_json(r.beta);
    json grid = json::array();
    for (const auto& g : r.grid) grid.push_back({{"t", g.t}, {"nonzero", g.nonzero}, {"value", g.value}});
    j["grid"] = grid;
    return j;
}

// ---------------------------------------------------------------------------
// Simulation summaries

inline std::string replications_csv(const ReplicationSummary& s) {
    std::string out = "rep,method,censoring_fraction,min_model_size,nonconverged\n";
    for (const auto& rec : s.replications) {
        for (std::size_t k = 0; k < s.methods.size(); ++k) {
            const auto& r = rec.methods[k];
            out += std::to_string(rec.rep) + ',' + s.methods[k].name() + ',' + fmt_double(rec.censoring_fraction) +
                   ',' + std::to_string(r.min_model_size) + ',' + std::to_string(r.nonconverged) + '\n';
        }
    }
    return out;
}

inline std::string replication_fp_fn_csv(const ReplicationSummary& s) {
    std::string out = "rep,method,false_negatives,false_positives\n";
    for (const auto& rec : s.replications) {
        for (std::size_t k = 0; k < s.methods.size(); ++k) {
            const auto& fp = rec.methods[k].fp_at_fn;
            for (std::size_t f = 0; f < fp.size(); ++f) {
                out += std::to_string(rec.rep) + ',' + s.methods[k].name() + ',' + std::to_string(f) + ',' +
                       std::to_string(fp[f]) + '\n';
            }
        }
    }
    return out;
}

inline std::string replication_post_csv(const ReplicationSummary& s) {
    std::string out = "rep,method,retained,mse,prediction\n";
    for (const auto& rec : s.replications) {
        for (std::size_t k = 0; k < s.methods.size(); ++k) {
            for (const auto& pt : rec.methods[k].post) {
                out += std::to_string(rec.rep) + ',' + s.methods[k].name() + ',' + std::to_string(pt.retained) +
                       ',' + fmt_double(pt.mse) + ',' + fmt_double(pt.prediction) + '\n';
            }
        }
    }
    return out;
}

/// Plot data: mean and sd of false positives per allowed false negatives.
inline std::string fp_fn_plot_csv(const ReplicationSummary& s) {
    std::string out = "method,false_negatives,mean_fp,sd_fp\n";
    for (const auto& a : s.aggregates) {
        for (std::size_t f = 0; f < a.mean_fp.size(); ++f) {
            out += a.method + ',' + std::to_string(f) + ',' + fmt_double(a.mean_fp[f]) + ',' +
                   fmt_double(a.sd_fp[f]) + '\n';
        }
    }
    return out;
}

/// Plot data: post-screening MSE and prediction score per retained size.
inline std::string post_plot_csv(const ReplicationSummary& s) {
    std::string out = "method,retained,mean_mse,sd_mse,mean_prediction,sd_prediction\n";
    for (const auto& a : s.aggregates) {
        for (const auto& p : a.post) {
            out += a.method + ',' + std::to_string(p.retained) + ',' + fmt_double(p.mean_mse) + ',' +
                   fmt_double(p.sd_mse) + ',' + fmt_double(p.mean_prediction) + ',' + fmt_double(p.sd_prediction) +
                   '\n';
        }
    }
    return out;
}

inline json aggregate_json(const ReplicationSummary& s) {
    json j;
    j["config"] = to_json(s.config);
    json methods = json::array();
    for (const auto& m : s.methods) methods.push_back(m.name());
    j["methods"] = methods;
    const auto& cal = s.calibration;
    j["calibration"] = {{"lambda", cal.censoring.lambda},
                        {"pilot_censoring", cal.censoring.realized},
                        {"at_lower_bracket", cal.censoring.at_lower_bracket},
                        {"within_tolerance", cal.censoring.within_tolerance},
                        {"t0", cal.t0}};
    double cens = 0;
    for (const auto& r : s.replications) cens += r.censoring_fraction;
    j["mean_censoring_fraction"] = s.replications.empty() ? 0.0 : cens / static_cast<double>(s.replications.size());
    json aggs = json::array();
    for (const auto& a : s.aggregates) {
        json m;
        m["method"] = a.method;
        m["median_min_model_size"] = a.median_min_model_size;
        m["iqr_min_model_size"] = a.iqr_min_model_size;
        m["sure_screening_fraction"] = a.sure_screening_fraction;
        m["mean_fp"] = a.mean_fp;
        m["sd_fp"] = a.sd_fp;
        json post = json::array();
        for (const auto& p : a.post) {
            post.push_back({{"retained", p.retained},
                            {"mean_mse", p.mean_mse},
                            {"sd_mse", p.sd_mse},
                            {"mean_prediction", p.mean_prediction},
                            {"sd_prediction", p.sd_prediction}});
        }
        m["post_screen"] = post;
        m["total_nonconverged"] = a.total_nonconverged;
        aggs.push_back(std::move(m));
    }
    j["aggregates"] = aggs;
    return j;
}

// ---------------------------------------------------------------------------
// Manifests

struct RunManifest {
    std::string subcommand;
    json config = json::object();
    std::vector<std::filesystem::path> inputs;
    std::vector<std::filesystem::path> outputs;
    std::optional<std::uint64_t> seed;
    double wall_seconds = 0.0;
};

inline json to_json(const RunManifest& m) {
    json j;
    j["subcommand"] = m.subcommand;
    j["version"] = kLibraryVersion;
    j["config"] = m.config;
    if (m.seed) {
        j["seed"] = *m.seed;
    } else {
        j["seed"] = nullptr;
    }
    json in = json::object();
    for (const auto& p : m.inputs) in[p.string()] = file_digest(p);
    j["inputs"] = in;
    json out = json::object();
    for (const auto& p : m.outputs) out[p.filename().string()] = file_digest(p);
    j["outputs"] = out;
    j["wall_seconds"] = m.wall_seconds;
    return j;
}

}  // namespace eescreen
