// prosumer: battery-backed prosumer scheduling against intraday market data.
// Subcommands cover the full pipeline: ingest -> train/solve -> evaluate,
// compare, convergence. All outputs land under --out-dir.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "prosumer/commands.hpp"
#include "prosumer/errors.hpp"
#include "prosumer/io.hpp"

namespace {

prosumer::WindowSpec parse_window_flag(const std::string& text) {
    const auto sep = text.find(':');
    if (sep == std::string::npos)
        throw prosumer::ConfigError("--window expects start:len, got '" + text + "'");
    prosumer::WindowSpec w;
    w.start = prosumer::parse_long(text.substr(0, sep), "--window start");
    w.len = prosumer::parse_long(text.substr(sep + 1), "--window len");
    return w;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"prosumer management: Q-learning agent vs exact benchmarks"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may follow the subcommand

    std::string config_path;
    std::string out_dir = "out";
    std::optional<std::uint64_t> seed;
    std::optional<std::string> window_flag;
    app.add_option("--config", config_path, "config file (JSON)")->required();
    app.add_option("--out-dir", out_dir, "output directory (default: out)");
    app.add_option("--seed", seed, "override every embedded seed");
    app.add_option("--window", window_flag, "override compare.test_window as start:len");

    auto* c_ingest = app.add_subcommand("ingest", "load, validate and normalize the CSV data");
    auto* c_train = app.add_subcommand("train", "train Q-learning agents on the dataset");
    auto* c_solve = app.add_subcommand("solve", "run a benchmark optimizer");
    std::string mode = "deterministic";
    std::optional<int> ns_flag;
    std::optional<std::string> lp_out;
    c_solve->add_option("--mode", mode,
                        "deterministic | stochastic | wait-and-see | convergence");
    c_solve->add_option("--ns", ns_flag, "scenario count override");
    c_solve->add_option("--lp-out", lp_out, "also export the scenario MILP in LP format");
    auto* c_evaluate =
        app.add_subcommand("evaluate", "greedy rollout of a trained agent on the test window");
    auto* c_compare = app.add_subcommand(
        "compare", "deterministic vs stochastic vs agent on the test window");
    auto* c_convergence =
        app.add_subcommand("convergence", "expected cost vs scenario count (solve shorthand)");
    c_convergence->add_option("--ns", ns_flag, "largest scenario count");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        prosumer::RunConfig config = prosumer::load_config(config_path);
        if (seed) prosumer::override_seed(config, *seed);
        if (window_flag) config.compare.test_window = parse_window_flag(*window_flag);
        if (ns_flag) {
            if (*ns_flag < 1) throw prosumer::ConfigError("--ns must be >= 1");
            config.solver.ns = *ns_flag;
            config.solver.convergence_ns_max = *ns_flag;
        }

        if (c_ingest->parsed()) {
            const auto s = prosumer::cmd_ingest(config, out_dir);
            std::cout << "ingested " << s.rows << " rows (power base " << s.power_base_mw
                      << " MW, price base " << s.price_base << ") -> " << s.dataset_csv.string()
                      << "\n";
        } else if (c_train->parsed()) {
            const auto s = prosumer::cmd_train(config, out_dir);
            std::cout << "trained: " << s.save_count << " snapshot(s) over " << s.rounds
                      << " round(s), best eval reward " << s.best_eval_reward << " -> "
                      << s.agent_path.string() << "\n";
        } else if (c_solve->parsed() || c_convergence->parsed()) {
            const auto m = c_convergence->parsed() ? prosumer::SolveMode::Convergence
                                                   : prosumer::solve_mode_from_string(mode);
            std::optional<std::filesystem::path> lp;
            if (lp_out) lp = *lp_out;
            const auto s = prosumer::cmd_solve(config, out_dir, m, lp);
            std::cout << "solved (cost " << prosumer::fmt_double(s.cost) << "); wrote:\n";
            for (const auto& p : s.outputs) std::cout << "  " << p.string() << "\n";
        } else if (c_evaluate->parsed()) {
            const auto s = prosumer::cmd_evaluate(config, out_dir);
            std::cout << "agent rollout: total cost " << prosumer::fmt_double(s.total_cost)
                      << ", total reward " << prosumer::fmt_double(s.total_reward) << " -> "
                      << s.trace_path.string() << "\n";
        } else if (c_compare->parsed()) {
            const auto r = prosumer::cmd_compare(config, out_dir);
            std::cout << "profit (deterministic / agent / stochastic): "
                      << prosumer::fmt_double(r.deterministic_profit) << " / "
                      << prosumer::fmt_double(r.agent_profit) << " / "
                      << prosumer::fmt_double(r.stochastic_profit) << "\n";
            if (r.improvement_pct)
                std::cout << "agent improvement over stochastic: "
                          << prosumer::fmt_double(*r.improvement_pct) << " %\n";
            std::cout << "report: " << r.report_path.string() << "\n";
        }
        return 0;
    } catch (const prosumer::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const prosumer::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
}
