#pragma once

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "prosumer/bench.hpp"
#include "prosumer/rng.hpp"
#include "prosumer/timeseries.hpp"

namespace testutil {

using namespace prosumer;

inline std::filesystem::path repo_root() {
    if (const char* env = std::getenv("PROSUMER_ROOT")) return env;
    for (const char* p : {".", "..", "../.."})
        if (std::filesystem::exists(std::filesystem::path(p) / "configs" / "example.json"))
            return p;
    return ".";
}

inline std::filesystem::path tmp_dir(const std::string& tag) {
    auto dir = std::filesystem::temp_directory_path() / ("prosumer_test_" + tag);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline Timestamp hour_stamp(Eigen::Index i, const std::string& start = "2019-01-01T00:00:00Z") {
    return add_hours(parse_timestamp(start), static_cast<double>(i));
}

inline MarketSeries make_series(const std::vector<double>& price,
                                const std::vector<double>& demand,
                                const std::vector<double>& wind,
                                const std::vector<double>& solar, bool normalized = false,
                                const std::string& start = "2019-01-01T00:00:00Z") {
    const auto n = static_cast<Eigen::Index>(price.size());
    MarketSeries s;
    for (Eigen::Index i = 0; i < n; ++i) s.timestamps.push_back(hour_stamp(i, start));
    auto to_array = [n](const std::vector<double>& v) {
        return Eigen::Map<const Eigen::ArrayXd>(v.data(), n).eval();
    };
    s.price = to_array(price);
    s.demand = to_array(demand);
    s.wind = to_array(wind);
    s.solar = to_array(solar);
    s.meta.normalized = normalized;
    s.meta.step_hours = 1.0;
    return s;
}

inline ScenarioPath make_path(const std::vector<double>& price, const std::vector<double>& demand,
                              const std::vector<double>& wind, const std::vector<double>& solar,
                              bool normalized = false) {
    const MarketSeries s = make_series(price, demand, wind, solar, normalized);
    return slice_window(s, 0, s.size());
}

inline ScenarioPath flat_path(Eigen::Index n, double price, double demand = 0.0,
                              double wind = 0.0, double solar = 0.0) {
    return make_path(std::vector<double>(n, price), std::vector<double>(n, demand),
                     std::vector<double>(n, wind), std::vector<double>(n, solar));
}

// Paper-scale battery: 10 MW on 1000 MWh, 0.9/0.9, full SOC range, hourly.
inline BatterySpec default_battery() { return BatterySpec{}; }

struct RandomInstance {
    ScenarioPath path;
    BatterySpec spec;
    double soc0 = 0.0;
};

// Random per-unit series with the default battery and a continuous random
// initial SOC; daily-scale arbitrage structure is irrelevant here, only
// generic positions relative to the storage bounds.
inline RandomInstance random_instance(Rng& rng, Eigen::Index horizon) {
    std::vector<double> price, demand, wind, solar;
    for (Eigen::Index t = 0; t < horizon; ++t) {
        price.push_back(rng.uniform(0.02, 1.0));
        demand.push_back(rng.uniform(0.0, 1.0));
        wind.push_back(rng.uniform(0.0, 0.8));
        solar.push_back(rng.uniform(0.0, 0.5));
    }
    RandomInstance inst;
    inst.path = make_path(price, demand, wind, solar, true);
    inst.spec = default_battery();
    inst.soc0 = rng.uniform(inst.spec.energy_min_mwh(), inst.spec.energy_max_mwh());
    return inst;
}

inline void check_plan_valid(const Plan& plan, const ScenarioPath& path, const BatterySpec& spec,
                             double soc0, double tol = 1e-9) {
    const Plan resim = simulate_actions(path, spec, soc0, plan.actions);
    if (std::abs(resim.total_cost - plan.total_cost) > tol)
        throw std::runtime_error("plan total does not re-simulate");
    for (Eigen::Index t = 0; t < path.size(); ++t) {
        if (std::abs(resim.soc_trace_mwh[t + 1] - plan.soc_trace_mwh[t + 1]) > tol)
            throw std::runtime_error("plan SOC trace does not re-simulate");
    }
    double sum = 0.0;
    for (Eigen::Index t = 0; t < plan.per_step_cost.size(); ++t) sum += plan.per_step_cost[t];
    if (std::abs(sum - plan.total_cost) > tol)
        throw std::runtime_error("plan total differs from per-step sum");
}

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace testutil
