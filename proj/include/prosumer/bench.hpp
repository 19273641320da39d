#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <vector>

#include "prosumer/battery.hpp"
#include "prosumer/timeseries.hpp"

namespace prosumer {

// An action sequence with its cost accounting. For stochastic plans the
// per-step costs are probability-weighted expectations; the SOC trace is
// scenario-independent either way because storage dynamics only see the
// action.
struct Plan {
    std::vector<Action> actions;
    Eigen::ArrayXd per_step_cost;
    double total_cost = 0.0;
    Eigen::ArrayXd soc_trace_mwh;  // length T+1, soc_trace_mwh[0] = soc0
};

// Discretization device for the long-horizon DP backend. Nodes are evenly
// spaced over the storage bounds with both endpoints included.
struct SocGrid {
    double lo_mwh = 0.0;
    double hi_mwh = 0.0;
    double resolution_mwh = 0.0;

    static SocGrid for_battery(const BatterySpec& spec, double resolution_pct = 0.01);

    Eigen::Index node_count() const;
    double node_spacing() const { return (hi_mwh - lo_mwh) / double(node_count() - 1); }
    void validate() const;
};

// Horizon cap below which the DP runs on the exact reachable lattice of
// (charge half-steps, discharge half-steps) instead of the rounded grid.
// The lattice is O(T^2) states and reproduces brute-force enumeration
// bit-for-bit; the grid trades exactness for bounded state count on long
// horizons.
inline constexpr int kExactHorizonCap = 192;

enum class DpBackend { Auto, Exact, Grid };

// Exhaustively evaluates every feasible action sequence (5^T plans) and
// returns the cheapest; ties resolved by preferring, earliest first,
// smaller |level| and charging over discharging.
Plan brute_force_enumerate(const ScenarioPath& path, const BatterySpec& spec, double soc0_mwh,
                           int horizon_cap = 10);

// Perfect-foresight optimum on one path (the NS=1 problem).
Plan solve_deterministic_dp(const ScenarioPath& path, const BatterySpec& spec, double soc0_mwh,
                            const SocGrid& grid, DpBackend backend = DpBackend::Auto);

// Problem (scenario-indexed decisions): every scenario may act on its own
// realization, so the problem decomposes into one deterministic solve per
// scenario.
struct WaitAndSeeResult {
    std::vector<Plan> plans;
    double expected_cost = 0.0;
};
WaitAndSeeResult solve_wait_and_see(const ScenarioSet& set, const BatterySpec& spec,
                                    double soc0_mwh, const SocGrid& grid,
                                    DpBackend backend = DpBackend::Auto);

// One shared action sequence minimizing expected cost across scenarios.
Plan solve_stochastic_nonanticipative(const ScenarioSet& set, const BatterySpec& spec,
                                      double soc0_mwh, const SocGrid& grid,
                                      DpBackend backend = DpBackend::Auto);

struct ConvergenceRow {
    int ns = 0;
    double expected_cost = 0.0;
};

// Expected cost of the non-anticipative problem as the scenario count
// grows. Sampling is nested: the NS=k set is the first k draws of one
// seeded stream, so the curve varies with NS only.
std::vector<ConvergenceRow> convergence_study(const MarketSeries& series,
                                              const std::vector<int>& ns_values,
                                              const WindowSpec& window, std::uint64_t seed,
                                              const BatterySpec& spec, double soc0_mwh,
                                              const SocGrid& grid,
                                              const WindowSpec* history = nullptr);

// Re-simulates a fixed action sequence on a path, producing a Plan with
// realized costs. Throws InfeasibleActionError if the sequence violates
// storage bounds.
Plan simulate_actions(const ScenarioPath& path, const BatterySpec& spec, double soc0_mwh,
                      const std::vector<Action>& actions);

// CPLEX-LP-format export of the scenario-indexed MILP, for cross-checking
// against external solvers. No solver is linked here.
void write_lp(const std::filesystem::path& path, const ScenarioSet& set, const BatterySpec& spec,
              double soc0_mwh);

}  // namespace prosumer
