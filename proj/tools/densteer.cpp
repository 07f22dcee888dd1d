#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "densteer/config.hpp"
#include "densteer/error.hpp"
#include "densteer/experiment.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitSolver = 3;

void print_summary(const densteer::ExperimentResult& r) {
    const auto& rep = r.report;
    std::cout << "termination:     " << rep.message << '\n'
              << "iterations:      " << (rep.iterations.empty() ? 0 : rep.iterations.back().iter) << '\n'
              << "grad_inf_norm:   " << rep.grad_inf_norm << '\n'
              << "dual value:      " << rep.dual_value << '\n'
              << "primal cost:     " << rep.primal_cost << '\n'
              << "duality gap:     " << rep.duality_gap << '\n'
              << "L2 distance:     " << r.l2_distance << '\n'
              << "expected saving: " << rep.cash.expected_saving << '\n'
              << "expected input:  " << rep.cash.expected_input << '\n';
    if (r.montecarlo) {
        std::cout << "MC KS distance:  " << r.montecarlo->ks_distance << '\n'
                  << "MC E[C1]:        " << r.montecarlo->saving.mean << " +/- " << r.montecarlo->saving.std_error
                  << '\n';
    } else if (r.montecarlo_error) {
        std::cout << "MC failed:       " << *r.montecarlo_error << '\n';
    }
    std::cout << "wall time [s]:   " << r.seconds << '\n';
}

std::vector<double> parse_values(const std::vector<std::string>& lists) {
    std::vector<double> out;
    for (const auto& list : lists) {
        std::size_t pos = 0;
        while (pos < list.size()) {
            const std::size_t comma = list.find(',', pos);
            const std::string item = list.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
            if (!item.empty()) {
                std::size_t used = 0;
                double v = 0.0;
                try {
                    v = std::stod(item, &used);
                } catch (const std::exception&) {
                    used = 0;
                }
                if (used != item.size()) throw densteer::ValidationError("--values: cannot parse '" + item + "'");
                out.push_back(v);
            }
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"densteer: steer a wealth density to a target distribution"};
    app.require_subcommand(1);

    std::string config_path;
    std::string output_dir;

    auto* solve = app.add_subcommand("solve", "Solve one configuration and write its artifacts");
    solve->add_option("config", config_path, "JSON configuration file")->required();
    solve->add_option("-o,--output", output_dir, "Override output.directory");

    std::string param;
    std::vector<std::string> values;
    auto* sweep = app.add_subcommand("sweep", "Run one solve per parameter value");
    sweep->add_option("config", config_path, "JSON configuration file")->required();
    sweep->add_option("--param", param, "lambda or K")->required();
    sweep->add_option("--values", values, "Values, space- or comma-separated")->required()->expected(1, -1);
    sweep->add_option("-o,--output", output_dir, "Override output.directory");

    auto* validate = app.add_subcommand("validate", "Parse and validate a configuration");
    validate->add_option("config", config_path, "JSON configuration file")->required();

    std::int64_t paths = 100000;
    std::uint64_t seed = 42;
    auto* mc = app.add_subcommand("mc", "Solve, then cross-check with Monte Carlo paths");
    mc->add_option("config", config_path, "JSON configuration file")->required();
    mc->add_option("--paths", paths, "Number of paths")->check(CLI::PositiveNumber);
    mc->add_option("--seed", seed, "Random seed");
    mc->add_option("-o,--output", output_dir, "Override output.directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitValidation;
    }

    try {
        densteer::ExperimentConfig config = densteer::load_config(config_path);
        if (!output_dir.empty()) config.output.directory = output_dir;

        if (*validate) {
            std::cout << "valid: " << config.name << '\n' << densteer::to_json(config).dump(2) << '\n';
            return kExitOk;
        }
        if (*sweep) {
            const auto p = densteer::parse_sweep_param(param);
            const auto rows = densteer::sweep(config, p, parse_values(values));
            bool all_ok = true;
            std::cout << "value, l2_distance, dual_value, expected_input, expected_saving, status\n";
            for (const auto& row : rows) {
                std::cout << row.value << ", " << row.l2_distance << ", " << row.dual_value << ", "
                          << row.expected_input << ", " << row.expected_saving << ", " << row.status << '\n';
                all_ok = all_ok && row.ok;
            }
            return all_ok ? kExitOk : kExitSolver;
        }
        if (*mc) {
            config.montecarlo.enabled = true;
            config.montecarlo.n_paths = paths;
            config.montecarlo.seed = seed;
        }
        const densteer::ExperimentResult result = densteer::run_experiment(config);
        print_summary(result);
        if (!result.converged() || result.montecarlo_error) return kExitSolver;
        return kExitOk;
    } catch (const densteer::ValidationError& e) {
        std::cerr << "validation error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const densteer::Error& e) {
        std::cerr << "solver error: " << e.what() << '\n';
        return kExitSolver;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitSolver;
    }
}
