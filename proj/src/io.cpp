#include "omdp/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace omdp {

std::string format_number(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

Json number_or_null(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

Json model_to_json(const MdpModel& model) {
    Json rows = Json::array();
    for (int i = 0; i < model.num_pairs(); ++i) {
        Json row = Json::array();
        for (int n = 0; n < model.num_states(); ++n) row.push_back(model.transition()(i, n));
        rows.push_back(std::move(row));
    }
    Json init = Json::array();
    for (int s = 0; s < model.num_states(); ++s) init.push_back(model.initial_dist()[s]);
    return {{"states", model.num_states()}, {"actions", model.num_actions()}, {"transition", rows}, {"initial", init}};
}

namespace {

void require_keys(const Json& j, std::initializer_list<const char*> keys, const std::string& what) {
    if (!j.is_object()) throw IoError(what + ": expected an object");
    for (const auto& [k, v] : j.items()) {
        bool known = false;
        for (const char* key : keys) known = known || k == key;
        if (!known) throw IoError(what + ": unknown field '" + k + "'");
    }
    for (const char* key : keys)
        if (!j.contains(key)) throw IoError(what + ": missing field '" + key + "'");
}

}  // namespace

MdpModel model_from_json(const Json& j) {
    require_keys(j, {"states", "actions", "transition", "initial"}, "model");
    try {
        const int S = j.at("states").get<int>(), A = j.at("actions").get<int>();
        if (S < 1 || A < 1) throw IoError("model: states and actions must be positive");
        const auto& rows = j.at("transition");
        if (!rows.is_array() || static_cast<int>(rows.size()) != S * A)
            throw IoError("model.transition: expected " + std::to_string(S * A) + " rows");
        Matrix p(S * A, S);
        for (int i = 0; i < S * A; ++i) {
            if (!rows[i].is_array() || static_cast<int>(rows[i].size()) != S)
                throw IoError("model.transition[" + std::to_string(i) + "]: expected " + std::to_string(S) + " entries");
            for (int n = 0; n < S; ++n) p(i, n) = rows[i][n].get<double>();
        }
        const auto& init = j.at("initial");
        if (!init.is_array() || static_cast<int>(init.size()) != S) throw IoError("model.initial: expected S entries");
        Vector v(S);
        for (int s = 0; s < S; ++s) v[s] = init[s].get<double>();
        return MdpModel::checked(S, A, p, v);
    } catch (const Json::exception& e) {
        throw IoError(std::string("model: ") + e.what());
    }
}

Json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw IoError(path + ": " + e.what());
    }
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << text;
    if (!out) throw IoError("write failed for " + path);
}

MdpModel load_model(const std::string& path) {
    try {
        return model_from_json(read_json_file(path));
    } catch (const IoError& e) {
        throw IoError(path + ": " + e.what());
    }
}

void save_model(const MdpModel& model, const std::string& path) { write_text_file(path, model_to_json(model).dump(2) + "\n"); }

Json feature_map_to_json(const FeatureMap& phi) {
    Json cols = Json::array();
    for (const auto& col : phi.columns()) {
        Json c = Json::array();
        for (const auto& [row, value] : col) c.push_back({row, value});
        cols.push_back(std::move(c));
    }
    return {{"pairs", phi.num_pairs()}, {"weight_cap", phi.weight_cap()}, {"columns", cols}};
}

FeatureMap feature_map_from_json(const Json& j) {
    require_keys(j, {"pairs", "weight_cap", "columns"}, "features");
    try {
        std::vector<FeatureMap::Column> cols;
        for (const auto& c : j.at("columns")) {
            FeatureMap::Column col;
            for (const auto& e : c) col.emplace_back(e.at(0).get<int>(), e.at(1).get<double>());
            cols.push_back(std::move(col));
        }
        return FeatureMap(j.at("pairs").get<int>(), cols, j.at("weight_cap").get<double>());
    } catch (const Json::exception& e) {
        throw IoError(std::string("features: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw IoError(std::string("features: ") + e.what());
    }
}

FeatureMap load_feature_map(const std::string& path) {
    try {
        return feature_map_from_json(read_json_file(path));
    } catch (const IoError& e) {
        throw IoError(path + ": " + e.what());
    }
}

std::string episode_csv(const EpisodeLog& log) {
    std::ostringstream out;
    out << "t,s,a,reward,cum_reward,benchmark_cum,regret,flow_l1,shortfall_l1,entropy,inner_iters,expected_cum_reward\n";
    for (const auto& r : log.rounds) {
        const double learner = std::isnan(r.expected_cum) ? r.cum_reward : r.expected_cum;
        out << r.t << ',' << r.s << ',' << r.a << ',' << format_number(r.reward) << ',' << format_number(r.cum_reward)
            << ',';
        if (!std::isnan(r.benchmark_cum))
            out << format_number(r.benchmark_cum) << ',' << format_number(r.benchmark_cum - learner);
        else
            out << ',';
        out << ',' << format_number(r.flow_l1) << ',' << format_number(r.shortfall_l1) << ','
            << format_number(r.entropy) << ',' << r.inner_iters << ',';
        if (!std::isnan(r.expected_cum)) out << format_number(r.expected_cum);
        out << '\n';
    }
    return out.str();
}

Json bound_check_to_json(const BoundCheck& c) {
    return {{"name", c.name},
            {"lemma", c.lemma},
            {"status", check_status_name(c.status)},
            {"lhs", number_or_null(c.lhs)},
            {"rhs", number_or_null(c.rhs)},
            {"slack", number_or_null(c.slack)},
            {"evaluated", c.evaluated},
            {"violations", c.violations},
            {"detail", c.detail}};
}

Json report_to_json(const EpisodeLog& log, const RegretReport& rep) {
    const auto& d = rep.decomposition;
    Json dec = {{"available", d.available},
                {"T1", number_or_null(d.t1)},
                {"T1_sigma", number_or_null(d.t1_sigma)},
                {"T2", number_or_null(d.t2)},
                {"T3", number_or_null(d.t3)},
                {"T3_expected", number_or_null(d.t3_expected)},
                {"measured", number_or_null(d.measured)},
                {"residual", number_or_null(d.t1 + d.t2 + d.t3 - d.measured)}};
    Json checks = Json::array();
    for (const auto& c : rep.checks) checks.push_back(bound_check_to_json(c));
    return {{"algorithm", log.learner},
            {"seed", log.seed},
            {"horizon", log.horizon},
            {"rounds", log.rounds.size()},
            {"eta", number_or_null(log.eta)},
            {"delta", number_or_null(log.delta)},
            {"oblivious", log.oblivious},
            {"aborted", log.aborted},
            {"error", log.error},
            {"benchmark", number_or_null(rep.benchmark)},
            {"benchmark_simulated", number_or_null(rep.benchmark_simulated)},
            {"benchmark_sigma", number_or_null(rep.benchmark_sigma)},
            {"learner_cum_reward", number_or_null(rep.learner_cum)},
            {"learner_expected_reward", number_or_null(rep.learner_expected)},
            {"regret", number_or_null(rep.regret)},
            {"regret_uses_expectation", rep.regret_expected},
            {"decomposition", dec},
            {"checks", checks}};
}

}  // namespace omdp
