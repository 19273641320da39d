#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "prosumer/config.hpp"

namespace prosumer {

// Command implementations behind the CLI, callable directly from tests.
// Every command is deterministic given (config, seeds) and writes its
// outputs atomically under out_dir.

struct IngestSummary {
    Eigen::Index rows = 0;
    double power_base_mw = 0.0;
    double price_base = 0.0;
    std::filesystem::path dataset_csv;
};
IngestSummary cmd_ingest(const RunConfig& config, const std::filesystem::path& out_dir);

struct TrainSummary {
    std::filesystem::path agent_path;  // final (best) artifact
    std::vector<std::filesystem::path> saved_agents;
    int save_count = 0;
    double best_eval_reward = 0.0;
    long rounds = 0;
};
TrainSummary cmd_train(const RunConfig& config, const std::filesystem::path& out_dir);

enum class SolveMode { Deterministic, Stochastic, WaitAndSee, Convergence };
SolveMode solve_mode_from_string(const std::string& tag);

struct SolveSummary {
    SolveMode mode = SolveMode::Deterministic;
    double cost = 0.0;  // plan cost (expected cost for scenario modes)
    std::vector<std::filesystem::path> outputs;
};
SolveSummary cmd_solve(const RunConfig& config, const std::filesystem::path& out_dir,
                       SolveMode mode,
                       const std::optional<std::filesystem::path>& lp_out = std::nullopt);

struct EvaluateSummary {
    double total_cost = 0.0;
    double total_reward = 0.0;
    std::filesystem::path trace_path;
};
EvaluateSummary cmd_evaluate(const RunConfig& config, const std::filesystem::path& out_dir);

struct CompareReport {
    double deterministic_cost = 0.0;
    double stochastic_expected_cost = 0.0;
    double stochastic_realized_cost = 0.0;
    double agent_cost = 0.0;
    double deterministic_profit = 0.0;
    double stochastic_profit = 0.0;  // realized on the test path
    double agent_profit = 0.0;
    // (agent_profit - stochastic_profit) / |stochastic_profit| * 100;
    // unset when stochastic profit is zero.
    std::optional<double> improvement_pct;
    std::filesystem::path report_path;
    std::vector<std::filesystem::path> trace_paths;
};
CompareReport cmd_compare(const RunConfig& config, const std::filesystem::path& out_dir);

}  // namespace prosumer
