#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "prosumer/battery.hpp"
#include "prosumer/bench.hpp"
#include "prosumer/qlearn.hpp"
#include "prosumer/timeseries.hpp"

namespace prosumer {

struct DataConfig {
    std::filesystem::path path;
    ColumnMap columns;
    double power_base_mw = 1000.0;
    double step_hours = 1.0;
    double prosumer_scale = 1.0;
};

struct SolverConfig {
    double resolution_pct = 0.01;  // SOC grid resolution, percent of capacity
    int ns = 30;
    std::string scenario_method = "historical-windows";
    std::uint64_t scenario_seed = 7;
    WindowSpec train_window{0, 0};
    int convergence_ns_max = 40;
    int brute_force_cap = 10;
};

struct CompareConfig {
    WindowSpec test_window{0, 0};
    std::filesystem::path agent_path;           // empty -> <out-dir>/agent.json
    std::optional<double> reward_scale;         // empty -> default_reward_scale
};

struct RunConfig {
    DataConfig data;
    BatterySpec battery;
    double soc0_pct = 10.0;
    Discretizer discretizer;
    Hyperparams hyperparams;
    SolverConfig solver;
    CompareConfig compare;
};

RunConfig load_config(const std::filesystem::path& path);

// --seed beats every embedded seed (training and scenario sampling).
void override_seed(RunConfig& config, std::uint64_t seed);

}  // namespace prosumer
