#include "omdp/report.hpp"

#include "omdp/log.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <future>
#include <iomanip>
#include <map>
#include <sstream>

namespace omdp {

namespace fs = std::filesystem;

std::vector<SeedResult> run_seeds(const RunConfig& config, const PreparedRun& run) {
    std::vector<std::future<SeedResult>> jobs;
    for (std::uint64_t seed : config.seeds) {
        jobs.push_back(std::async(std::launch::async, [&config, &run, seed] {
            SeedResult r;
            r.seed = seed;
            r.log = run_experiment(*run.model, run.factory, config.adversary, config.horizon, seed, run.options);
            BoundsContext ctx = run.bounds;
            ctx.seed = derive_seed(seed, 4);
            r.report = regret_report(r.log, *run.model, ctx, config.harness.verify_bounds);
            return r;
        }));
    }
    std::vector<SeedResult> out;
    for (auto& j : jobs) out.push_back(j.get());
    return out;
}

std::string aggregate_csv(const std::vector<SeedResult>& results, int points) {
    std::ostringstream out;
    out << "t,seeds,mean_regret,std_regret,regret_over_sqrt_tlnt\n";
    if (results.empty()) return out.str();
    int horizon = 0;
    for (const auto& r : results) horizon = std::max(horizon, static_cast<int>(r.log.rounds.size()));
    const auto grid = log_spaced_rounds(horizon, points);
    std::map<int, std::vector<double>> by_round;
    for (const auto& r : results) {
        for (const auto& rec : r.log.rounds) {
            if (std::isnan(rec.benchmark_cum) || !std::binary_search(grid.begin(), grid.end(), rec.t)) continue;
            const double learner = std::isnan(rec.expected_cum) ? rec.cum_reward : rec.expected_cum;
            by_round[rec.t].push_back(rec.benchmark_cum - learner);
        }
    }
    for (const auto& [t, values] : by_round) {
        if (values.size() != results.size()) continue;
        const double n = static_cast<double>(values.size());
        double mean = 0.0;
        for (double v : values) mean += v;
        mean /= n;
        out << t << ',' << values.size() << ',' << format_number(mean) << ',';
        if (values.size() > 1) {
            double ss = 0.0;
            for (double v : values) ss += (v - mean) * (v - mean);
            out << format_number(std::sqrt(ss / (n - 1.0)));
        }
        out << ',';
        if (t > 1) out << format_number(mean / std::sqrt(t * std::log(static_cast<double>(t))));
        out << '\n';
    }
    return out.str();
}

int run_command(const RunConfig& config, std::ostream& out) {
    PreparedRun run = prepare_run(config);
    const fs::path dir(config.output);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    write_text_file((dir / "config.json").string(), emit_config(config).dump(2) + "\n");

    auto results = run_seeds(config, run);
    int status = 0;
    for (const auto& r : results) {
        const std::string stem = "seed_" + std::to_string(r.seed);
        write_text_file((dir / (stem + ".csv")).string(), episode_csv(r.log));
        Json summary = report_to_json(r.log, r.report);
        summary["parameters"] = run.parameters;
        write_text_file((dir / (stem + "_summary.json")).string(), summary.dump(2) + "\n");
        if (r.log.aborted) {
            status = 1;
            log::emit(log::Level::Error, "seed ", r.seed, " aborted at round ", r.log.rounds.size() + 1, ": ",
                      r.log.error);
        }
        long long fails = 0;
        for (const auto& c : r.report.checks) fails += c.status == CheckStatus::Fail;
        out << "seed " << r.seed << ": regret " << format_number(r.report.regret) << " over " << r.log.rounds.size()
            << " rounds, " << fails << " failed checks\n";
    }
    write_text_file((dir / "aggregate.csv").string(), aggregate_csv(results, config.harness.checkpoints > 0 ? config.harness.checkpoints : 40));
    out << "wrote " << results.size() << " runs to " << dir.string() << "\n";
    return status;
}

std::string bounds_table(const std::string& dir) {
    if (!fs::is_directory(dir)) throw IoError(dir + ": not a directory");
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        const std::string name = e.path().filename().string();
        if (name.rfind("seed_", 0) == 0 && name.size() > 13 && name.ends_with("_summary.json")) files.push_back(e.path());
    }
    if (files.empty()) throw IoError(dir + ": no seed_*_summary.json files");
    std::sort(files.begin(), files.end());

    struct Counts {
        int pass = 0, fail = 0, skipped = 0;
    };
    std::map<std::pair<std::string, std::string>, Counts> table;
    for (const auto& f : files) {
        const Json j = read_json_file(f.string());
        try {
            const std::string algo = j.at("algorithm").get<std::string>();
            for (const auto& c : j.at("checks")) {
                auto& n = table[{algo, c.at("name").get<std::string>()}];
                const std::string s = c.at("status").get<std::string>();
                if (s == "pass")
                    ++n.pass;
                else if (s == "fail")
                    ++n.fail;
                else
                    ++n.skipped;
            }
        } catch (const Json::exception& e) {
            throw IoError(f.string() + ": " + e.what());
        }
    }
    std::ostringstream out;
    out << std::left << std::setw(10) << "algorithm" << std::setw(24) << "check" << std::right << std::setw(6)
        << "pass" << std::setw(6) << "fail" << std::setw(9) << "skipped" << std::setw(11) << "pass rate" << "\n";
    for (const auto& [key, n] : table) {
        out << std::left << std::setw(10) << key.first << std::setw(24) << key.second << std::right << std::setw(6)
            << n.pass << std::setw(6) << n.fail << std::setw(9) << n.skipped << std::setw(11);
        const int judged = n.pass + n.fail;
        if (judged > 0) {
            std::ostringstream rate;
            rate << std::fixed << std::setprecision(1) << 100.0 * n.pass / judged << "%";
            out << rate.str();
        } else {
            out << "-";
        }
        out << "\n";
    }
    out << files.size() << " summaries\n";
    return out.str();
}

}  // namespace omdp
