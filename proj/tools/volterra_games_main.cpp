#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "volterra_games/scenario.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Zero-sum games over weakly-singular Volterra dynamics"};
    app.require_subcommand(1);

    std::string scenario_path;
    std::string out_dir;
    int jobs = 1;

    auto* run = app.add_subcommand("run", "Run the experiments of a scenario file");
    run->add_option("scenario", scenario_path, "Scenario JSON file")->required();
    run->add_option("--out", out_dir, "Output directory (overrides the scenario)");
    run->add_option("--jobs", jobs, "Worker threads for adversary enumeration")
        ->check(CLI::PositiveNumber);

    std::string validate_path;
    auto* validate = app.add_subcommand("validate", "Parse and validate a scenario file");
    validate->add_option("scenario", validate_path, "Scenario JSON file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (validate->parsed()) {
            volterra_games::load_scenario(validate_path);
            std::cout << "ok\n";
            return 0;
        }
        auto scenario = volterra_games::load_scenario(scenario_path);
        return volterra_games::run_scenario(scenario, out_dir, jobs, std::cout);
    } catch (const volterra_games::ScenarioError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
