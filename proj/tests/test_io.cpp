#include "omdp/report.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace omdp;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("omdp_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool has_issue(const ConfigError& e, const std::string& field) {
    for (const auto& i : e.issues())
        if (i.field == field) return true;
    return false;
}

std::vector<ConfigIssue> issues_of(const Json& j) {
    try {
        parse_config(j);
    } catch (const ConfigError& e) {
        return e.issues();
    }
    return {};
}

}  // namespace

TEST_CASE("config: defaults round trip through JSON") {
    RunConfig c;
    CHECK(parse_config(emit_config(c)) == c);
    CHECK(parse_config(Json::object()) == c);
}

TEST_CASE("config: non-default values round trip") {
    RunConfig c;
    c.algorithm = "large";
    c.schedule.preset = "theorem2-proof";
    c.schedule.tau = 2.5;
    c.schedule.k_cap = 1e5;
    c.features.kind = "random-sparse";
    c.features.dim = 8;
    c.adversary.kind = StreamKind::Sinusoidal;
    c.adversary.frequency = 0.1234567890123;
    c.adversary.table = RewardTable::Constant(8, 0.25);
    c.seeds = {7, 8, 9};
    c.horizon = 17;
    c.harness.keep_history = "never";
    const Json j = emit_config(c);
    CHECK(parse_config(j) == c);
    CHECK(parse_config(Json::parse(j.dump())) == c);
}

TEST_CASE("config: unknown fields are rejected with their path") {
    auto issues = issues_of(Json{{"horizon", 10}, {"shedule", Json::object()}});
    REQUIRE(issues.size() == 1);
    CHECK(issues[0].field == "shedule");
    issues = issues_of(Json{{"schedule", {{"eta", 1.0}, {"etta", 2.0}}}});
    REQUIRE(issues.size() == 1);
    CHECK(issues[0].field == "schedule.etta");
}

TEST_CASE("config: type and range errors name the field and are all collected") {
    auto issues = issues_of(Json{{"horizon", -5}});
    REQUIRE(issues.size() == 1);
    CHECK(issues[0].field == "horizon");
    issues = issues_of(Json{{"horizon", "ten"}, {"model", {{"states", 1.5}}}});
    CHECK(issues.size() == 2);
    issues = issues_of(Json{{"schedule", {{"eta", -1.0}, {"delta", 0.0}}}, {"seeds", Json::array()}});
    CHECK(issues.size() == 3);
    try {
        parse_config(Json{{"adversary", {{"kind", "sideways"}}}});
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(has_issue(e, "adversary.kind"));
        CHECK(std::string(e.what()).find("sideways") != std::string::npos);
    }
}

TEST_CASE("config: preset consistency") {
    auto issues = issues_of(Json{{"schedule", {{"preset", "manual"}}}});
    CHECK(issues.size() == 2);
    issues = issues_of(Json{{"algorithm", "exact"}, {"schedule", {{"preset", "theorem2-statement"}}}});
    REQUIRE(issues.size() == 1);
    CHECK(issues[0].field == "schedule.preset");
    issues = issues_of(Json{{"algorithm", "large"}});
    REQUIRE(issues.size() == 1);
    CHECK(issues[0].field == "schedule.preset");
}

TEST_CASE("config: theorem1 preset resolves the printed schedule") {
    RunConfig c;
    c.horizon = 400;
    PreparedRun run = prepare_run(c);
    const auto expected = theorem1_parameters(400, run.tau, 4, 2);
    CHECK(run.exact.eta == doctest::Approx(expected.eta).epsilon(1e-15));
    CHECK(run.exact.delta == doctest::Approx(std::min(expected.delta, run.polytope->delta_max())));
    CHECK(run.parameters["eta"].get<double>() == run.exact.eta);

    c.schedule.eta = 0.5;
    run = prepare_run(c);
    CHECK(run.exact.eta == 0.5);
}

TEST_CASE("config: theorem1 on a model without finite mixing time is an error") {
    const auto dir = scratch("flip");
    save_model(flip_model(), (dir / "flip.json").string());
    RunConfig c;
    c.model.path = (dir / "flip.json").string();
    CHECK_THROWS_AS(prepare_run(c), ConfigError);
    c.schedule.preset = "manual";
    c.schedule.eta = 1.0;
    c.schedule.delta = 1e-3;
    CHECK_NOTHROW(prepare_run(c));
}

TEST_CASE("config: load_config resolves paths against the file") {
    const auto dir = scratch("load");
    fs::create_directories(dir / "models");
    save_model(random_ergodic_model(3, 2, 4), (dir / "models" / "m.json").string());
    write_text_file((dir / "good.json").string(), R"({"model": {"path": "models/m.json"}, "horizon": 3})");
    RunConfig c = load_config((dir / "good.json").string());
    CHECK(fs::equivalent(c.model.path, dir / "models" / "m.json"));

    write_text_file((dir / "missing.json").string(), R"({"model": {"path": "nope.json"}})");
    try {
        load_config((dir / "missing.json").string());
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(has_issue(e, "model.path"));
    }
    write_text_file((dir / "broken.json").string(), R"({"horizon": 3,})");
    try {
        load_config((dir / "broken.json").string());
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("broken.json") != std::string::npos);
    }
}

TEST_CASE("io: model JSON round trip is exact") {
    const MdpModel m = random_ergodic_model(5, 3, 11);
    const MdpModel back = model_from_json(Json::parse(model_to_json(m).dump()));
    CHECK(back.num_states() == 5);
    CHECK(back.num_actions() == 3);
    CHECK(back.transition() == m.transition());
    CHECK(back.initial_dist() == m.initial_dist());
}

TEST_CASE("io: malformed models are rejected") {
    Json j = model_to_json(flip_model());
    j["transition"][0][0] = 0.7;
    CHECK_THROWS_AS(model_from_json(j), InvalidModel);
    j = model_to_json(flip_model());
    j["extra"] = 1;
    CHECK_THROWS_AS(model_from_json(j), IoError);
    j = model_to_json(flip_model());
    j.erase("initial");
    CHECK_THROWS_AS(model_from_json(j), IoError);
}

TEST_CASE("io: feature map JSON round trip") {
    const FeatureMap phi = FeatureMap::random_sparse(12, 4, 2, 1.5, 3);
    const FeatureMap back = feature_map_from_json(Json::parse(feature_map_to_json(phi).dump()));
    CHECK(back.dim() == 4);
    CHECK(back.weight_cap() == 1.5);
    CHECK(back.columns() == phi.columns());
}

TEST_CASE("io: number formatting") {
    CHECK(format_number(0.1) == "0.10000000000000001");
    CHECK(format_number(std::nan("")) == "nan");
    CHECK(format_number(-INFINITY) == "-inf");
    CHECK(number_or_null(INFINITY).is_null());
}

TEST_CASE("io: episode CSV is deterministic and well formed") {
    RunConfig c;
    c.horizon = 30;
    c.seeds = {5};
    PreparedRun run = prepare_run(c);
    const auto a = episode_csv(run_experiment(*run.model, run.factory, c.adversary, 30, 5, run.options));
    const auto b = episode_csv(run_experiment(*run.model, run.factory, c.adversary, 30, 5, run.options));
    CHECK(a == b);
    std::istringstream in(a);
    std::string line;
    int lines = 0;
    while (std::getline(in, line)) {
        CHECK(std::count(line.begin(), line.end(), ',') == 11);
        ++lines;
    }
    CHECK(lines == 31);
}

TEST_CASE("report: three seeds write three CSVs, summaries and an aggregate") {
    const auto dir = scratch("run");
    RunConfig c;
    c.horizon = 40;
    c.seeds = {1, 2, 3};
    c.output = (dir / "out").string();
    std::ostringstream log;
    CHECK(run_command(c, log) == 0);
    for (int s = 1; s <= 3; ++s) {
        CHECK(fs::exists(dir / "out" / ("seed_" + std::to_string(s) + ".csv")));
        const Json summary = read_json_file((dir / "out" / ("seed_" + std::to_string(s) + "_summary.json")).string());
        CHECK(summary["seed"] == s);
        CHECK(summary.contains("parameters"));
        CHECK(summary["checks"].size() > 0);
    }
    CHECK(parse_config(read_json_file((dir / "out" / "config.json").string())) == c);

    const std::string agg = slurp(dir / "out" / "aggregate.csv");
    std::istringstream in(agg);
    std::string header, first, last, line;
    std::getline(in, header);
    CHECK(header == "t,seeds,mean_regret,std_regret,regret_over_sqrt_tlnt");
    std::getline(in, first);
    CHECK(first.rfind("1,3,", 0) == 0);
    CHECK(first.back() == ',');
    last = first;
    while (std::getline(in, line)) last = line;
    CHECK(last.rfind("40,3,", 0) == 0);

    const std::string table = bounds_table((dir / "out").string());
    CHECK(table.find("iterate_closeness") != std::string::npos);
    CHECK(table.find("3 summaries") != std::string::npos);
}

TEST_CASE("report: reruns are byte identical") {
    const auto dir = scratch("rerun");
    RunConfig c;
    c.horizon = 25;
    c.seeds = {4, 9};
    std::ostringstream log;
    c.output = (dir / "a").string();
    run_command(c, log);
    c.output = (dir / "b").string();
    run_command(c, log);
    for (const char* name : {"seed_4.csv", "seed_9_summary.json", "aggregate.csv"})
        CHECK(slurp(dir / "a" / name) == slurp(dir / "b" / name));
}

TEST_CASE("report: bounds on a directory without summaries is an error") {
    const auto dir = scratch("empty");
    CHECK_THROWS_AS(bounds_table(dir.string()), IoError);
    CHECK_THROWS_AS(bounds_table((dir / "absent").string()), IoError);
}

TEST_CASE("report: aggregate std needs two seeds") {
    std::vector<SeedResult> one(1);
    one[0].log.rounds.push_back(RoundRecord{});
    one[0].log.rounds[0].t = 1;
    one[0].log.rounds[0].benchmark_cum = 1.0;
    one[0].log.rounds[0].cum_reward = 0.25;
    CHECK(aggregate_csv(one) == "t,seeds,mean_regret,std_regret,regret_over_sqrt_tlnt\n1,1,0.75,,\n");
}
