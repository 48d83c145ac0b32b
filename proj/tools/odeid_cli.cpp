#include "odeid/experiment/runner.hpp"
#include "odeid/runtime.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

using namespace odeid;
using namespace odeid::experiment;

enum ExitCode : int { Ok = 0, ConfigOrUsage = 1, Numerical = 2, Missing = 3 };

Vec parse_ic(const std::string& text) {
    std::vector<double> v;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        double x = 0.0;
        try {
            x = std::stod(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0) throw InvalidArgument("--ic: cannot parse '" + item + "' as a number");
        v.push_back(x);
    }
    if (v.empty()) throw InvalidArgument("--ic: no values given");
    return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

int main(int argc, char** argv) {
    odeid::tune_allocator();

    CLI::App app{"Learn ODE right-hand sides from trajectory data"};
    app.require_subcommand(1);

    std::string config_path;
    RunOptions opt;
    std::uint64_t seed = 0;
    std::string out_dir;
    std::string method;
    double noise = 0.0;
    std::string ic_text;
    double t_end = 0.0;
    std::string output_file;

    auto common = [&](CLI::App* sub) {
        sub->add_option("config", config_path, "experiment config (YAML)")->required()->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "override the master seed");
        sub->add_option("--jobs", opt.jobs, "worker threads (1 is the reproducibility baseline)")
            ->check(CLI::PositiveNumber);
        sub->add_option("--out", out_dir, "output directory (default: the config's output_dir)");
    };
    auto cell = [&](CLI::App* sub) {
        sub->add_option("--method", method, "ensemble | splines | multistep | polyfit | sindy")->required();
        sub->add_option("--noise", noise, "noise level listed in the config")->required();
    };

    auto* generate = app.add_subcommand("generate", "simulate trajectories and write one dataset per noise level");
    common(generate);
    auto* train = app.add_subcommand("train", "train a method on one dataset and write its report");
    common(train);
    cell(train);
    auto* evaluate = app.add_subcommand("evaluate", "re-evaluate a trained model");
    common(evaluate);
    cell(evaluate);
    auto* cmp = app.add_subcommand("compare", "tabulate recovery and solution errors across methods and noise levels");
    common(cmp);
    auto* solve_cmd = app.add_subcommand("solve", "integrate a trained model from an initial condition");
    common(solve_cmd);
    cell(solve_cmd);
    solve_cmd->add_option("--ic", ic_text, "initial state, comma separated")->required();
    solve_cmd->add_option("--t-end", t_end, "final time (default: the problem's t_end)");
    solve_cmd->add_option("-o,--output", output_file, "CSV destination (default: stdout)");
    auto* run = app.add_subcommand("run", "generate, train every method at every noise level, then compare");
    common(run);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? Ok : ConfigOrUsage;
    }

    auto* active = app.get_subcommands().front();
    if (active->count("--seed")) opt.seed = seed;
    if (active->count("--out")) opt.out = out_dir;

    try {
        const ExperimentConfig cfg = load_with_overrides(config_path, opt);
        const Layout layout = layout_for(cfg, opt);
        if (active == generate) {
            for (const auto& p : generate_datasets(cfg, layout)) std::cout << p.string() << '\n';
        } else if (active == train) {
            std::cout << metrics::format_report(train_method(cfg, method, noise, layout, opt.jobs));
        } else if (active == evaluate) {
            std::cout << metrics::format_report(evaluate_method(cfg, method, noise, layout, opt.jobs));
        } else if (active == cmp) {
            std::cout << compare(cfg, layout);
        } else if (active == solve_cmd) {
            std::optional<double> end;
            if (solve_cmd->count("--t-end")) end = t_end;
            const auto [times, states] = solve(cfg, method, noise, parse_ic(ic_text), end, layout);
            std::ofstream file;
            if (!output_file.empty()) {
                file.open(output_file);
                if (!file) throw Error("cannot write " + output_file);
            }
            std::ostream& os = output_file.empty() ? std::cout : file;
            os << "t";
            for (Eigen::Index k = 0; k < states.cols(); ++k) os << ",x" << (k + 1);
            os << '\n';
            char buf[32];
            for (std::size_t j = 0; j < times.size(); ++j) {
                std::snprintf(buf, sizeof buf, "%.17g", times[j]);
                os << buf;
                for (Eigen::Index k = 0; k < states.cols(); ++k) {
                    std::snprintf(buf, sizeof buf, "%.17g", states(static_cast<Eigen::Index>(j), k));
                    os << ',' << buf;
                }
                os << '\n';
            }
        } else if (active == run) {
            std::cout << run_all(cfg, layout, opt.jobs);
        }
    } catch (const MissingArtifact& e) {
        std::cerr << "error: " << e.what() << '\n';
        return Missing;
    } catch (const IntegrationFailure& e) {
        std::cerr << "integration failure: " << e.what() << '\n';
        return Numerical;
    } catch (const TrainingFailure& e) {
        std::cerr << "training failure: " << e.what() << '\n';
        return Numerical;
    } catch (const InvalidArgument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return ConfigOrUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return ConfigOrUsage;
    }
    return Ok;
}
