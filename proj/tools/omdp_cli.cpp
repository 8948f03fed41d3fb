#include "omdp/log.hpp"
#include "omdp/report.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace omdp;

namespace {

// Switching algorithm drops a preset that only applies to the other one.
void set_algorithm(RunConfig& c, const std::string& algo) {
    if (algo == c.algorithm) return;
    c.algorithm = algo;
    if (algo == "large" && c.schedule.preset == "theorem1") c.schedule.preset = "theorem2-statement";
    if (algo == "exact" && c.schedule.preset.rfind("theorem2", 0) == 0) c.schedule.preset = "theorem1";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Online MDP learners: run experiments and check regret bounds"};
    app.require_subcommand(1);

    std::string config_path, algo, out_dir;
    int horizon = -1;
    std::vector<std::uint64_t> seeds;
    auto* run = app.add_subcommand("run", "run an experiment from a config file");
    run->add_option("--config", config_path, "JSON config (defaults apply when omitted)")->check(CLI::ExistingFile);
    run->add_option("--algo", algo, "exact or large")->check(CLI::IsMember({"exact", "large"}));
    run->add_option("--T", horizon, "horizon")->check(CLI::NonNegativeNumber);
    run->add_option("--seed", seeds, "seed list, comma separated")->delimiter(',');
    run->add_option("--out", out_dir, "output directory");

    std::string in_dir;
    auto* bounds = app.add_subcommand("bounds", "tabulate bound checks of a run directory");
    bounds->add_option("--in", in_dir, "run output directory")->required();

    int states = 4, actions = 2;
    std::uint64_t model_seed = 1;
    double min_mass = 0.05;
    std::string model_out;
    auto* gen = app.add_subcommand("generate-model", "write a random ergodic model as JSON");
    gen->add_option("--states", states)->check(CLI::PositiveNumber);
    gen->add_option("--actions", actions)->check(CLI::PositiveNumber);
    gen->add_option("--seed", model_seed);
    gen->add_option("--min-mass", min_mass, "lower bound on every transition probability");
    gen->add_option("--out", model_out)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            RunConfig c = config_path.empty() ? RunConfig{} : load_config(config_path);
            if (!algo.empty()) set_algorithm(c, algo);
            if (horizon >= 0) c.horizon = horizon;
            if (!seeds.empty()) c.seeds = seeds;
            if (!out_dir.empty()) c.output = out_dir;
            return run_command(c, std::cout);
        }
        if (bounds->parsed()) {
            std::cout << bounds_table(in_dir);
            return 0;
        }
        if (gen->parsed()) {
            save_model(random_ergodic_model(states, actions, model_seed, min_mass), model_out);
            std::cout << "wrote " << model_out << "\n";
            return 0;
        }
    } catch (const ConfigError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
