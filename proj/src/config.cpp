#include "omdp/config.hpp"

#include "omdp/log.hpp"

#include <cmath>
#include <filesystem>
#include <sstream>

namespace omdp {

namespace {

std::string join_issues(const std::vector<ConfigIssue>& issues) {
    std::ostringstream out;
    out << "invalid configuration";
    for (const auto& i : issues) out << "\n  " << (i.field.empty() ? "<root>" : i.field) << ": " << i.message;
    return out.str();
}

std::string child(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

class Reader {
public:
    std::vector<ConfigIssue> issues;

    void fail(const std::string& field, const std::string& message) { issues.push_back({field, message}); }

    // False (with an issue) unless j is an object whose keys are all allowed.
    bool object(const Json& j, const std::string& path, std::initializer_list<const char*> allowed) {
        if (!j.is_object()) {
            fail(path, "expected an object");
            return false;
        }
        for (const auto& [k, v] : j.items()) {
            bool known = false;
            for (const char* a : allowed) known = known || k == a;
            if (!known) fail(child(path, k), "unknown field");
        }
        return true;
    }

    void read(const Json& j, const char* key, const std::string& path, int& out) {
        if (!j.contains(key)) return;
        const auto& v = j.at(key);
        if (!v.is_number_integer() || v.get<long long>() < INT32_MIN || v.get<long long>() > INT32_MAX)
            return fail(child(path, key), "expected an integer");
        out = v.get<int>();
    }

    void read(const Json& j, const char* key, const std::string& path, std::uint64_t& out) {
        if (!j.contains(key)) return;
        const auto& v = j.at(key);
        if (!v.is_number_unsigned()) return fail(child(path, key), "expected a nonnegative integer");
        out = v.get<std::uint64_t>();
    }

    void read(const Json& j, const char* key, const std::string& path, double& out) {
        if (!j.contains(key)) return;
        const auto& v = j.at(key);
        if (!v.is_number()) return fail(child(path, key), "expected a number");
        out = v.get<double>();
    }

    void read(const Json& j, const char* key, const std::string& path, std::optional<double>& out) {
        if (!j.contains(key)) return;
        const auto& v = j.at(key);
        if (v.is_null()) {
            out.reset();
            return;
        }
        if (!v.is_number()) return fail(child(path, key), "expected a number or null");
        out = v.get<double>();
    }

    void read(const Json& j, const char* key, const std::string& path, bool& out) {
        if (!j.contains(key)) return;
        const auto& v = j.at(key);
        if (!v.is_boolean()) return fail(child(path, key), "expected true or false");
        out = v.get<bool>();
    }

    void read(const Json& j, const char* key, const std::string& path, std::string& out) {
        if (!j.contains(key)) return;
        const auto& v = j.at(key);
        if (!v.is_string()) return fail(child(path, key), "expected a string");
        out = v.get<std::string>();
    }
};

void read_model(Reader& rd, const Json& j, ModelSpec& m) {
    if (!rd.object(j, "model", {"path", "states", "actions", "seed", "min_mass", "alpha"})) return;
    rd.read(j, "path", "model", m.path);
    rd.read(j, "states", "model", m.states);
    rd.read(j, "actions", "model", m.actions);
    rd.read(j, "seed", "model", m.seed);
    rd.read(j, "min_mass", "model", m.min_mass);
    rd.read(j, "alpha", "model", m.alpha);
}

void read_schedule(Reader& rd, const Json& j, ScheduleSpec& s) {
    if (!rd.object(j, "schedule", {"preset", "tau", "eta", "delta", "penalty_coef", "penalty_exp", "k_coef", "k_exp",
                                   "practical_scale", "k_cap", "step_scale"}))
        return;
    rd.read(j, "preset", "schedule", s.preset);
    rd.read(j, "tau", "schedule", s.tau);
    rd.read(j, "eta", "schedule", s.eta);
    rd.read(j, "delta", "schedule", s.delta);
    rd.read(j, "penalty_coef", "schedule", s.penalty_coef);
    rd.read(j, "penalty_exp", "schedule", s.penalty_exp);
    rd.read(j, "k_coef", "schedule", s.k_coef);
    rd.read(j, "k_exp", "schedule", s.k_exp);
    rd.read(j, "practical_scale", "schedule", s.practical_scale);
    rd.read(j, "k_cap", "schedule", s.k_cap);
    rd.read(j, "step_scale", "schedule", s.step_scale);
}

void read_features(Reader& rd, const Json& j, FeatureSpec& f) {
    if (!rd.object(j, "features", {"kind", "path", "dim", "nnz", "weight_cap", "seed"})) return;
    rd.read(j, "kind", "features", f.kind);
    rd.read(j, "path", "features", f.path);
    rd.read(j, "dim", "features", f.dim);
    rd.read(j, "nnz", "features", f.nnz);
    rd.read(j, "weight_cap", "features", f.weight_cap);
    rd.read(j, "seed", "features", f.seed);
}

void read_adversary(Reader& rd, const Json& j, StreamSpec& a) {
    if (!rd.object(j, "adversary", {"kind", "period", "frequency", "amplitude", "range", "table"})) return;
    std::string kind = stream_kind_name(a.kind);
    rd.read(j, "kind", "adversary", kind);
    if (auto k = parse_stream_kind(kind))
        a.kind = *k;
    else
        rd.fail("adversary.kind", "unknown adversary '" + kind + "'");
    rd.read(j, "period", "adversary", a.period);
    rd.read(j, "frequency", "adversary", a.frequency);
    rd.read(j, "amplitude", "adversary", a.amplitude);
    rd.read(j, "range", "adversary", a.range);
    if (j.contains("table")) {
        const auto& t = j.at("table");
        if (t.is_null()) {
            a.table.reset();
        } else if (!t.is_array()) {
            rd.fail("adversary.table", "expected an array of numbers or null");
        } else {
            RewardTable r(static_cast<Eigen::Index>(t.size()));
            bool ok = true;
            for (std::size_t i = 0; i < t.size(); ++i) {
                if (!t[i].is_number()) {
                    rd.fail("adversary.table[" + std::to_string(i) + "]", "expected a number");
                    ok = false;
                } else {
                    r[static_cast<Eigen::Index>(i)] = t[i].get<double>();
                }
            }
            if (ok) a.table = r;
        }
    }
}

void read_harness(Reader& rd, const Json& j, HarnessSpec& h) {
    if (!rd.object(j, "harness", {"benchmark_every", "checkpoints", "track_expected", "keep_history", "rollouts",
                                  "verify_bounds", "feature_rounds", "diameter_pairs"}))
        return;
    rd.read(j, "benchmark_every", "harness", h.benchmark_every);
    rd.read(j, "checkpoints", "harness", h.checkpoints);
    rd.read(j, "track_expected", "harness", h.track_expected);
    rd.read(j, "keep_history", "harness", h.keep_history);
    rd.read(j, "rollouts", "harness", h.rollouts);
    rd.read(j, "verify_bounds", "harness", h.verify_bounds);
    rd.read(j, "feature_rounds", "harness", h.feature_rounds);
    rd.read(j, "diameter_pairs", "harness", h.diameter_pairs);
}

void check_ranges(const RunConfig& c, std::vector<ConfigIssue>& out) {
    auto fail = [&](const std::string& f, const std::string& m) { out.push_back({f, m}); };
    if (c.model.path.empty()) {
        if (c.model.states < 1) fail("model.states", "must be >= 1");
        if (c.model.actions < 1) fail("model.actions", "must be >= 1");
        if (c.model.states >= 1 && !(c.model.min_mass >= 0.0 && c.model.min_mass * c.model.states <= 1.0))
            fail("model.min_mass", "must be in [0, 1 / states]");
        if (!(c.model.alpha > 0.0)) fail("model.alpha", "must be positive");
    }
    if (c.algorithm != "exact" && c.algorithm != "large") fail("algorithm", "must be exact or large");

    const auto& s = c.schedule;
    if (s.preset != "theorem1" && s.preset != "theorem2-statement" && s.preset != "theorem2-proof" &&
        s.preset != "manual")
        fail("schedule.preset", "must be theorem1, theorem2-statement, theorem2-proof or manual");
    auto positive = [&](const std::optional<double>& v, const char* name) {
        if (v && !(*v > 0.0 && std::isfinite(*v))) fail(std::string("schedule.") + name, "must be positive");
    };
    positive(s.tau, "tau");
    positive(s.eta, "eta");
    positive(s.delta, "delta");
    positive(s.penalty_coef, "penalty_coef");
    positive(s.k_coef, "k_coef");
    positive(s.practical_scale, "practical_scale");
    positive(s.k_cap, "k_cap");
    positive(s.step_scale, "step_scale");
    if (s.penalty_exp && !(*s.penalty_exp >= 0.0)) fail("schedule.penalty_exp", "must be nonnegative");
    if (s.k_exp && !(*s.k_exp >= 0.0)) fail("schedule.k_exp", "must be nonnegative");
    if (s.delta && !(*s.delta < 1.0)) fail("schedule.delta", "must be below 1");
    if (s.preset == "manual") {
        if (!s.eta) fail("schedule.eta", "required by the manual preset");
        if (!s.delta) fail("schedule.delta", "required by the manual preset");
    }
    if (c.algorithm == "exact" && s.preset.rfind("theorem2", 0) == 0)
        fail("schedule.preset", "theorem2 presets apply to the large algorithm");
    if (c.algorithm == "large" && s.preset == "theorem1")
        fail("schedule.preset", "theorem1 applies to the exact algorithm");

    const auto& f = c.features;
    if (f.kind != "identity" && f.kind != "random-sparse" && f.kind != "file")
        fail("features.kind", "must be identity, random-sparse or file");
    if (f.kind == "file" && f.path.empty()) fail("features.path", "required for file features");
    if (f.dim < 1) fail("features.dim", "must be >= 1");
    if (f.nnz < 1) fail("features.nnz", "must be >= 1");
    if (!(f.weight_cap > 0.0)) fail("features.weight_cap", "must be positive");

    const auto& a = c.adversary;
    if (a.period < 1) fail("adversary.period", "must be >= 1");
    if (!std::isfinite(a.frequency)) fail("adversary.frequency", "must be finite");
    if (!(a.amplitude >= 0.0 && a.amplitude <= 1.0)) fail("adversary.amplitude", "must be in [0, 1]");
    if (!(a.range > 0.0 && a.range <= 1.0)) fail("adversary.range", "must be in (0, 1]");
    if (a.table) {
        for (int i = 0; i < a.table->size(); ++i)
            if (!(std::abs((*a.table)[i]) <= 1.0)) fail("adversary.table[" + std::to_string(i) + "]", "|r| must be <= 1");
        if (c.model.path.empty() && a.table->size() != c.model.states * c.model.actions)
            fail("adversary.table", "needs states * actions entries");
    }

    if (c.horizon < 0) fail("horizon", "must be nonnegative");
    if (c.seeds.empty()) fail("seeds", "must list at least one seed");
    if (c.output.empty()) fail("output", "must not be empty");

    const auto& h = c.harness;
    if (h.benchmark_every < 0) fail("harness.benchmark_every", "must be nonnegative");
    if (h.checkpoints < 0) fail("harness.checkpoints", "must be nonnegative");
    if (h.keep_history != "auto" && h.keep_history != "always" && h.keep_history != "never")
        fail("harness.keep_history", "must be auto, always or never");
    if (h.rollouts < 2) fail("harness.rollouts", "must be >= 2");
    if (h.feature_rounds < 0) fail("harness.feature_rounds", "must be nonnegative");
    if (h.diameter_pairs < 0) fail("harness.diameter_pairs", "must be nonnegative");
}

Json optional_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

}  // namespace

ConfigError::ConfigError(std::vector<ConfigIssue> issues)
    : std::runtime_error(join_issues(issues)), issues_(std::move(issues)) {}

RunConfig parse_config(const Json& j) {
    Reader rd;
    RunConfig c;
    if (rd.object(j, "", {"model", "algorithm", "schedule", "features", "adversary", "horizon", "seeds", "output",
                          "harness"})) {
        if (j.contains("model")) read_model(rd, j.at("model"), c.model);
        rd.read(j, "algorithm", "", c.algorithm);
        if (j.contains("schedule")) read_schedule(rd, j.at("schedule"), c.schedule);
        if (j.contains("features")) read_features(rd, j.at("features"), c.features);
        if (j.contains("adversary")) read_adversary(rd, j.at("adversary"), c.adversary);
        rd.read(j, "horizon", "", c.horizon);
        if (j.contains("seeds")) {
            const auto& s = j.at("seeds");
            if (!s.is_array()) {
                rd.fail("seeds", "expected an array of nonnegative integers");
            } else {
                c.seeds.clear();
                for (std::size_t i = 0; i < s.size(); ++i) {
                    if (!s[i].is_number_unsigned())
                        rd.fail("seeds[" + std::to_string(i) + "]", "expected a nonnegative integer");
                    else
                        c.seeds.push_back(s[i].get<std::uint64_t>());
                }
            }
        }
        rd.read(j, "output", "", c.output);
        if (j.contains("harness")) read_harness(rd, j.at("harness"), c.harness);
    }
    check_ranges(c, rd.issues);
    if (!rd.issues.empty()) throw ConfigError(rd.issues);
    return c;
}

void validate_config(const RunConfig& config) {
    std::vector<ConfigIssue> issues;
    check_ranges(config, issues);
    if (!issues.empty()) throw ConfigError(issues);
}

RunConfig load_config(const std::string& path) {
    Json j;
    try {
        j = read_json_file(path);
    } catch (const IoError& e) {
        throw ConfigError(std::vector<ConfigIssue>{{"", e.what()}});
    }
    RunConfig c = parse_config(j);
    namespace fs = std::filesystem;
    const fs::path base = fs::path(path).parent_path();
    std::vector<ConfigIssue> issues;
    auto resolve = [&](std::string& p, const char* field) {
        if (p.empty()) return;
        fs::path q(p);
        if (q.is_relative()) q = base / q;
        if (!fs::exists(q)) issues.push_back({field, "file not found: " + q.string()});
        p = q.lexically_normal().string();
    };
    resolve(c.model.path, "model.path");
    if (c.features.kind == "file") resolve(c.features.path, "features.path");
    if (!issues.empty()) throw ConfigError(issues);
    return c;
}

Json emit_config(const RunConfig& c) {
    Json table = nullptr;
    if (c.adversary.table) {
        table = Json::array();
        for (int i = 0; i < c.adversary.table->size(); ++i) table.push_back((*c.adversary.table)[i]);
    }
    const auto& s = c.schedule;
    return {{"model",
             {{"path", c.model.path},
              {"states", c.model.states},
              {"actions", c.model.actions},
              {"seed", c.model.seed},
              {"min_mass", c.model.min_mass},
              {"alpha", c.model.alpha}}},
            {"algorithm", c.algorithm},
            {"schedule",
             {{"preset", s.preset},
              {"tau", optional_json(s.tau)},
              {"eta", optional_json(s.eta)},
              {"delta", optional_json(s.delta)},
              {"penalty_coef", optional_json(s.penalty_coef)},
              {"penalty_exp", optional_json(s.penalty_exp)},
              {"k_coef", optional_json(s.k_coef)},
              {"k_exp", optional_json(s.k_exp)},
              {"practical_scale", optional_json(s.practical_scale)},
              {"k_cap", optional_json(s.k_cap)},
              {"step_scale", optional_json(s.step_scale)}}},
            {"features",
             {{"kind", c.features.kind},
              {"path", c.features.path},
              {"dim", c.features.dim},
              {"nnz", c.features.nnz},
              {"weight_cap", c.features.weight_cap},
              {"seed", c.features.seed}}},
            {"adversary",
             {{"kind", stream_kind_name(c.adversary.kind)},
              {"period", c.adversary.period},
              {"frequency", c.adversary.frequency},
              {"amplitude", c.adversary.amplitude},
              {"range", c.adversary.range},
              {"table", table}}},
            {"horizon", c.horizon},
            {"seeds", c.seeds},
            {"output", c.output},
            {"harness",
             {{"benchmark_every", c.harness.benchmark_every},
              {"checkpoints", c.harness.checkpoints},
              {"track_expected", c.harness.track_expected},
              {"keep_history", c.harness.keep_history},
              {"rollouts", c.harness.rollouts},
              {"verify_bounds", c.harness.verify_bounds},
              {"feature_rounds", c.harness.feature_rounds},
              {"diameter_pairs", c.harness.diameter_pairs}}}};
}

PreparedRun prepare_run(const RunConfig& c) {
    validate_config(c);
    PreparedRun run;
    MdpModel model = c.model.path.empty()
                         ? random_ergodic_model(c.model.states, c.model.actions, c.model.seed, c.model.min_mass,
                                                c.model.alpha)
                         : load_model(c.model.path);
    run.model = std::make_shared<const MdpModel>(std::move(model));
    const MdpModel& m = *run.model;
    const int T = std::max(c.horizon, 1);
    const auto& s = c.schedule;
    if (c.adversary.table && c.adversary.table->size() != m.num_pairs())
        throw ConfigError(std::vector<ConfigIssue>{{"adversary.table", "needs " + std::to_string(m.num_pairs()) + " entries"}});

    if (s.tau) {
        run.tau = *s.tau;
        run.mixing = mixing_from_contraction(std::exp(-1.0 / run.tau));
    } else {
        run.mixing = mixing_coefficient(m);
        run.tau = run.mixing.tau;
    }
    const bool needs_tau = s.preset != "manual";
    if (needs_tau && !(std::isfinite(run.tau) && run.tau > 0.0)) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "preset " << s.preset << " needs a finite positive mixing time (model tau = " << run.tau
            << "); set schedule.tau or use the manual preset";
        throw ConfigError(std::vector<ConfigIssue>{{"schedule.preset", msg.str()}});
    }

    Json params;
    params["tau"] = number_or_null(run.tau);
    if (c.algorithm == "exact") {
        RftlConfig cfg;
        cfg.horizon = T;
        if (s.preset == "theorem1") {
            auto p = theorem1_parameters(T, run.tau, m.num_states(), m.num_actions());
            cfg.eta = p.eta;
            cfg.delta = p.delta;
            log::info("theorem1 parameters: eta ", p.eta, ", delta ", p.delta, " (tau ", run.tau, ")");
        }
        if (s.eta) cfg.eta = *s.eta;
        if (s.delta) cfg.delta = *s.delta;
        run.polytope = std::make_shared<const ShrunkPolytope>(ShrunkPolytope::with_clamp(m, cfg.delta));
        cfg.delta = run.polytope->delta();
        run.exact = cfg;
        params["eta"] = cfg.eta;
        params["delta"] = cfg.delta;
        params["requested_delta"] = run.polytope->requested_delta();
        auto model_ptr = run.model;
        auto poly = run.polytope;
        run.factory = [model_ptr, poly, cfg](std::uint64_t seed) -> std::unique_ptr<Learner> {
            return std::make_unique<ExactLearner>(*model_ptr, poly, cfg, seed);
        };
    } else {
        const int n = m.num_pairs();
        const auto& f = c.features;
        FeatureMap phi = f.kind == "identity" ? FeatureMap::identity(n, f.weight_cap)
                         : f.kind == "random-sparse"
                             ? FeatureMap::random_sparse(n, f.dim, f.nnz, f.weight_cap, f.seed)
                             : load_feature_map(f.path);
        if (phi.num_pairs() != n)
            throw ConfigError(std::vector<ConfigIssue>{{"features", "feature map has " + std::to_string(phi.num_pairs()) + " rows, model has " +
                                                std::to_string(n) + " pairs"}});
        run.features = std::make_shared<const FeatureModel>(m, std::make_shared<const FeatureMap>(std::move(phi)));
        run.sampler = std::make_shared<const Sampler>(*run.features);
        LargeRftlConfig cfg;
        cfg.horizon = T;
        if (s.preset != "manual") {
            auto preset = s.preset == "theorem2-proof" ? Theorem2Preset::Proof : Theorem2Preset::Statement;
            cfg = theorem2_parameters(T, run.tau, run.features->phi().dim(), run.features->phi().weight_cap(),
                                      run.sampler->c1(), run.sampler->c2(), s.practical_scale.value_or(0.0), preset);
            log::info(s.preset, " parameters: eta ", cfg.eta, ", delta ", cfg.delta, ", H_t = ", cfg.penalty_coef,
                      " t^", cfg.penalty_exp, ", K(T) = ", cfg.iterations(T));
        }
        if (s.eta) cfg.eta = *s.eta;
        if (s.delta) cfg.delta = *s.delta;
        if (s.penalty_coef) cfg.penalty_coef = *s.penalty_coef;
        if (s.penalty_exp) cfg.penalty_exp = *s.penalty_exp;
        if (s.k_coef) cfg.k_coef = *s.k_coef;
        if (s.k_exp) cfg.k_exp = *s.k_exp;
        if (s.practical_scale) cfg.practical_scale = *s.practical_scale;
        if (s.k_cap) cfg.k_cap = *s.k_cap;
        if (s.step_scale) cfg.step_scale = *s.step_scale;
        const double dmax = delta_max(m).value;
        if (cfg.delta > 0.5 * dmax) {
            log::warn("delta clamped from ", cfg.delta, " to ", 0.5 * dmax, " (0.5 * delta_max)");
            cfg.delta = 0.5 * dmax;
        }
        run.large = cfg;
        params["eta"] = cfg.eta;
        params["delta"] = cfg.delta;
        params["penalty_coef"] = cfg.penalty_coef;
        params["penalty_exp"] = cfg.penalty_exp;
        params["k_coef"] = cfg.k_coef;
        params["k_exp"] = cfg.k_exp;
        params["practical_scale"] = cfg.practical_scale;
        params["k_cap"] = cfg.k_cap;
        params["step_scale"] = cfg.step_scale;
        params["full_entropy_factor"] = cfg.full_entropy_factor;
        params["c1"] = run.sampler->c1();
        params["c2"] = run.sampler->c2();
        auto fm = run.features;
        auto sampler = run.sampler;
        run.factory = [fm, sampler, cfg](std::uint64_t seed) -> std::unique_ptr<Learner> {
            return std::make_unique<LargeLearner>(fm, sampler, cfg, seed);
        };
        run.bounds.features = run.features.get();
    }
    run.parameters = params;

    const auto& h = c.harness;
    const bool keep = h.keep_history == "always" ||
                      (h.keep_history == "auto" && static_cast<double>(m.num_pairs()) * c.horizon <= 2e7);
    run.options.keep_rewards = keep;
    run.options.keep_snapshots = keep;
    run.options.track_expected = h.track_expected;
    run.options.benchmark_every = h.benchmark_every;
    run.options.checkpoints = h.checkpoints;
    run.bounds.tau = run.tau;
    run.bounds.rollouts = h.rollouts;
    run.bounds.feature_rounds = h.feature_rounds;
    run.bounds.diameter_pairs = h.diameter_pairs;
    return run;
}

}  // namespace omdp
