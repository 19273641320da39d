#include "doctest.h"

#include <cmath>

#include "prosumer/bench.hpp"
#include "prosumer/errors.hpp"
#include "prosumer/rng.hpp"
#include "testutil.hpp"

using namespace prosumer;
using testutil::check_plan_valid;
using testutil::default_battery;
using testutil::flat_path;
using testutil::make_path;

namespace {

// Lossless 10 MW / 100 MWh unit for hand-checkable arbitrage instances.
BatterySpec lossless_battery() {
    BatterySpec spec;
    spec.rated_power_mw = 10.0;
    spec.capacity_mwh = 100.0;
    spec.charge_eff = 1.0;
    spec.discharge_eff = 1.0;
    return spec;
}

ScenarioSet set_of(std::vector<ScenarioPath> paths) {
    ScenarioSet set;
    const double tau = 1.0 / paths.size();
    for (auto& p : paths) {
        p.probability = tau;
        set.scenarios.push_back(std::move(p));
    }
    return set;
}

// Expected-cost brute force over action sequences shared by all scenarios;
// the independent oracle for the non-anticipative solver.
struct StochasticBrute {
    std::vector<Action> actions;
    double expected_cost = 0.0;
};

StochasticBrute stochastic_brute_force(const ScenarioSet& set, const BatterySpec& spec,
                                       double soc0) {
    const Eigen::Index horizon = set.horizon();
    std::vector<Action> current(horizon, Action::Idle);
    StochasticBrute best;
    double best_cost = std::numeric_limits<double>::infinity();
    auto dfs = [&](auto&& self, Eigen::Index t, double energy, double cost) -> void {
        if (t == horizon) {
            if (cost < best_cost) {
                best_cost = cost;
                best = {current, cost};
            }
            return;
        }
        for (Action a : kActionPreference) {
            const double next = energy + action_energy_delta_mwh(a, spec);
            if (!energy_within_bounds(next, spec)) continue;
            double stage = 0.0;
            for (const auto& sc : set.scenarios) {
                const auto [pc, pd] = decode_action(a, spec);
                stage += sc.probability *
                         step_cost(sc.price[t], grid_exchange(sc.row(t), pc, pd),
                                   spec.step_hours);
            }
            current[static_cast<std::size_t>(t)] = a;
            self(self, t + 1, next, cost + stage);
        }
    };
    dfs(dfs, 0, soc0, 0.0);
    return best;
}

ScenarioSet random_set(Rng& rng, Eigen::Index horizon, int ns) {
    std::vector<ScenarioPath> paths;
    for (int s = 0; s < ns; ++s)
        paths.push_back(testutil::random_instance(rng, horizon).path);
    return set_of(std::move(paths));
}

}  // namespace

TEST_CASE("brute force on single-step and two-step instances") {
    SUBCASE("one step with positive price and surplus: discharge fully") {
        const Plan plan = brute_force_enumerate(flat_path(1, 0.5), default_battery(), 500.0);
        CHECK(plan.actions == std::vector<Action>{Action::DischargeFull});
    }
    SUBCASE("cheap-then-dear with lossless storage: charge then discharge") {
        const Plan plan =
            brute_force_enumerate(make_path({10.0, 20.0}, {0, 0}, {0, 0}, {0, 0}),
                                  lossless_battery(), 0.0);
        CHECK(plan.actions == std::vector<Action>{Action::ChargeFull, Action::DischargeFull});
        CHECK(plan.total_cost == -100.0);
    }
    SUBCASE("constant price with losses: idle beats any cycle from empty") {
        const Plan plan = brute_force_enumerate(flat_path(2, 15.0), default_battery(), 0.0);
        CHECK(plan.actions == std::vector<Action>(2, Action::Idle));
        CHECK(plan.total_cost == 0.0);
    }
    SUBCASE("horizon cap") {
        CHECK_THROWS_AS(brute_force_enumerate(flat_path(11, 1.0), default_battery(), 0.0),
                        ConfigError);
    }
}

TEST_CASE("deterministic DP equals brute force") {
    SUBCASE("on the hand-checked arbitrage instance, both backends") {
        const ScenarioPath path = make_path({10.0, 20.0}, {0, 0}, {0, 0}, {0, 0});
        const BatterySpec spec = lossless_battery();
        const SocGrid grid = SocGrid::for_battery(spec, 0.01);
        for (DpBackend backend : {DpBackend::Exact, DpBackend::Grid}) {
            const Plan plan = solve_deterministic_dp(path, spec, 0.0, grid, backend);
            CHECK(plan.actions ==
                  std::vector<Action>{Action::ChargeFull, Action::DischargeFull});
            CHECK(plan.total_cost == -100.0);
            check_plan_valid(plan, path, spec, 0.0);
        }
    }
    SUBCASE("on random instances (exact backend)") {
        Rng rng(2024);
        for (int i = 0; i < 40; ++i) {
            const auto inst = testutil::random_instance(rng, 1 + rng.uniform_index(6));
            const SocGrid grid = SocGrid::for_battery(inst.spec, 0.01);
            const Plan dp = solve_deterministic_dp(inst.path, inst.spec, inst.soc0, grid);
            const Plan bf = brute_force_enumerate(inst.path, inst.spec, inst.soc0);
            CHECK(std::abs(dp.total_cost - bf.total_cost) < 1e-9);
            CHECK(dp.actions == bf.actions);
            check_plan_valid(dp, inst.path, inst.spec, inst.soc0);
        }
    }
    SUBCASE("zero prices tie-break to all idle") {
        const ScenarioPath path = flat_path(5, 0.0, 0.5, 0.1, 0.0);
        const BatterySpec spec = default_battery();
        const Plan plan =
            solve_deterministic_dp(path, spec, 300.0, SocGrid::for_battery(spec));
        CHECK(plan.actions == std::vector<Action>(5, Action::Idle));
        CHECK(plan.total_cost == 0.0);
    }
}

TEST_CASE("grid backend approaches the exact optimum as the grid refines") {
    Rng rng(55);
    const auto inst = testutil::random_instance(rng, 30);
    const Plan exact = solve_deterministic_dp(inst.path, inst.spec, inst.soc0,
                                              SocGrid::for_battery(inst.spec),
                                              DpBackend::Exact);
    double previous_gap = std::numeric_limits<double>::infinity();
    for (double res_pct : {1.0, 0.1, 0.01}) {
        const Plan grid = solve_deterministic_dp(inst.path, inst.spec, inst.soc0,
                                                 SocGrid::for_battery(inst.spec, res_pct),
                                                 DpBackend::Grid);
        check_plan_valid(grid, inst.path, inst.spec, inst.soc0);
        const double gap = grid.total_cost - exact.total_cost;
        CHECK(gap >= -1e-9);  // grid plans are feasible, so never better
        CHECK(gap <= previous_gap + 1e-9);
        previous_gap = gap;
    }
    CHECK(previous_gap <= std::abs(exact.total_cost) * 1e-6 + 1e-9);
}

TEST_CASE("wait-and-see") {
    Rng rng(77);
    SUBCASE("a single scenario reduces to the deterministic solution") {
        const auto inst = testutil::random_instance(rng, 12);
        const SocGrid grid = SocGrid::for_battery(inst.spec);
        ScenarioSet set = set_of({inst.path});
        const WaitAndSeeResult ws = solve_wait_and_see(set, inst.spec, inst.soc0, grid);
        const Plan det = solve_deterministic_dp(inst.path, inst.spec, inst.soc0, grid);
        CHECK(ws.plans.size() == 1);
        CHECK(ws.plans[0].actions == det.actions);
        CHECK(ws.expected_cost == det.total_cost);
    }
    SUBCASE("two identical scenarios give identical plans") {
        const auto inst = testutil::random_instance(rng, 8);
        const SocGrid grid = SocGrid::for_battery(inst.spec);
        const ScenarioSet set = set_of({inst.path, inst.path});
        const WaitAndSeeResult ws = solve_wait_and_see(set, inst.spec, inst.soc0, grid);
        CHECK(ws.plans[0].actions == ws.plans[1].actions);
        CHECK(ws.expected_cost == ws.plans[0].total_cost);
    }
    SUBCASE("wait-and-see never costs more than the non-anticipative plan") {
        for (int i = 0; i < 20; ++i) {
            const Eigen::Index horizon = 2 + rng.uniform_index(7);
            const int ns = 1 + static_cast<int>(rng.uniform_index(4));
            const ScenarioSet set = random_set(rng, horizon, ns);
            const BatterySpec spec = default_battery();
            const double soc0 = rng.uniform(0.0, 1000.0);
            const SocGrid grid = SocGrid::for_battery(spec);
            const WaitAndSeeResult ws = solve_wait_and_see(set, spec, soc0, grid);
            const Plan na = solve_stochastic_nonanticipative(set, spec, soc0, grid);
            CHECK(ws.expected_cost <= na.total_cost + 1e-9);
        }
    }
}

TEST_CASE("non-anticipative stochastic solver") {
    Rng rng(31);
    SUBCASE("a single scenario reduces to the deterministic solution") {
        const auto inst = testutil::random_instance(rng, 16);
        const SocGrid grid = SocGrid::for_battery(inst.spec);
        const Plan na = solve_stochastic_nonanticipative(set_of({inst.path}), inst.spec,
                                                         inst.soc0, grid);
        const Plan det = solve_deterministic_dp(inst.path, inst.spec, inst.soc0, grid);
        CHECK(na.actions == det.actions);
        CHECK(na.total_cost == det.total_cost);
    }
    SUBCASE("actions coincide with deterministic DP on the expected-price path") {
        for (int i = 0; i < 25; ++i) {
            const Eigen::Index horizon = 2 + rng.uniform_index(23);
            const int ns = 1 + static_cast<int>(rng.uniform_index(10));
            const ScenarioSet set = random_set(rng, horizon, ns);
            const BatterySpec spec = default_battery();
            const double soc0 = rng.uniform(0.0, 1000.0);
            const SocGrid grid = SocGrid::for_battery(spec);
            const Plan na = solve_stochastic_nonanticipative(set, spec, soc0, grid);

            Eigen::ArrayXd mean_price = Eigen::ArrayXd::Zero(horizon);
            for (const auto& sc : set.scenarios) mean_price += sc.probability * sc.price;
            std::vector<double> price(mean_price.data(), mean_price.data() + horizon);
            const std::vector<double> zeros(horizon, 0.0);
            const ScenarioPath mean_path = make_path(price, zeros, zeros, zeros);
            const Plan det = solve_deterministic_dp(mean_path, spec, soc0, grid);
            CHECK(na.actions == det.actions);
        }
    }
    SUBCASE("matches the shared-sequence brute force on short horizons") {
        for (int i = 0; i < 12; ++i) {
            const Eigen::Index horizon = 2 + rng.uniform_index(3);
            const int ns = 1 + static_cast<int>(rng.uniform_index(3));
            const ScenarioSet set = random_set(rng, horizon, ns);
            const BatterySpec spec = default_battery();
            const double soc0 = rng.uniform(0.0, 1000.0);
            const Plan na =
                solve_stochastic_nonanticipative(set, spec, soc0, SocGrid::for_battery(spec));
            const StochasticBrute bf = stochastic_brute_force(set, spec, soc0);
            CHECK(std::abs(na.total_cost - bf.expected_cost) < 1e-9);
            CHECK(na.actions == bf.actions);
        }
    }
    SUBCASE("mirrored prices cancel out: all idle") {
        const std::vector<double> zeros(2, 0.0);
        const ScenarioSet set = set_of({make_path({10.0, 20.0}, zeros, zeros, zeros),
                                        make_path({20.0, 10.0}, zeros, zeros, zeros)});
        const BatterySpec spec = lossless_battery();
        const Plan na =
            solve_stochastic_nonanticipative(set, spec, 0.0, SocGrid::for_battery(spec));
        CHECK(na.actions == std::vector<Action>(2, Action::Idle));
    }
}

TEST_CASE("price scaling leaves the chosen plan invariant and scales its cost") {
    Rng rng(13);
    for (int i = 0; i < 10; ++i) {
        const auto inst = testutil::random_instance(rng, 20);
        const SocGrid grid = SocGrid::for_battery(inst.spec);
        const Plan base = solve_deterministic_dp(inst.path, inst.spec, inst.soc0, grid);
        const double k = rng.uniform(0.3, 4.0);
        ScenarioPath scaled = inst.path;
        scaled.price *= k;
        const Plan scaled_plan = solve_deterministic_dp(scaled, inst.spec, inst.soc0, grid);
        CHECK(scaled_plan.actions == base.actions);
        CHECK(scaled_plan.total_cost ==
              doctest::Approx(k * base.total_cost).epsilon(1e-9));
    }
}

TEST_CASE("convergence study") {
    // Six days of synthetic history followed by a one-day target window.
    std::vector<double> price, demand, wind, solar;
    for (int i = 0; i < 7 * 24; ++i) {
        const int h = i % 24;
        price.push_back(0.2 + 0.6 * (h >= 8 && h <= 20) + 0.01 * (i % 5));
        demand.push_back(0.5);
        wind.push_back(0.25);
        solar.push_back(0.25);
    }
    const MarketSeries series = testutil::make_series(price, demand, wind, solar, true);
    const BatterySpec spec = lossless_battery();
    const SocGrid grid = SocGrid::for_battery(spec);
    const WindowSpec window{6 * 24, 24};

    std::vector<int> ns_values;
    for (int ns = 1; ns <= 8; ++ns) ns_values.push_back(ns);
    const auto rows = convergence_study(series, ns_values, window, 11, spec, 0.0, grid);
    REQUIRE(rows.size() == 8);
    for (std::size_t i = 0; i < rows.size(); ++i) CHECK(rows[i].ns == static_cast<int>(i + 1));

    SUBCASE("the first row equals the deterministic cost of the first sampled scenario") {
        const MarketSeries history = series_window(series, {0, 6 * 24});
        const ScenarioSet master =
            sample_scenarios(history, 8, 24, 11, SamplingMethod::HistoricalWindows, 0);
        const Plan det = solve_deterministic_dp(master.scenarios[0], spec, 0.0, grid);
        CHECK(rows[0].expected_cost == det.total_cost);
    }
    SUBCASE("no history before the window is an error") {
        CHECK_THROWS_AS(
            convergence_study(series, ns_values, WindowSpec{0, 24}, 11, spec, 0.0, grid),
            DataError);
    }
}

TEST_CASE("LP export writes a complete MILP") {
    const ScenarioSet set = set_of({flat_path(2, 25.0, 0.6, 0.1, 0.0)});
    const auto dir = testutil::tmp_dir("lp");
    const auto lp = dir / "model.lp";
    write_lp(lp, set, default_battery(), 100.0);
    const std::string text = testutil::slurp(lp);
    CHECK(text.find("Minimize") != std::string::npos);
    CHECK(text.find("Subject To") != std::string::npos);
    CHECK(text.find("bal_s0_t0:") != std::string::npos);
    CHECK(text.find("soc_s0_t1:") != std::string::npos);
    CHECK(text.find("Binaries") != std::string::npos);
    CHECK(text.find("End") != std::string::npos);
    write_lp(dir / "model2.lp", set, default_battery(), 100.0);
    CHECK(testutil::slurp(dir / "model2.lp") == text);  // deterministic bytes
}

TEST_CASE("simulate_actions rejects infeasible sequences") {
    const ScenarioPath path = flat_path(2, 1.0);
    const BatterySpec spec = default_battery();
    CHECK_THROWS_AS(
        simulate_actions(path, spec, 0.0, {Action::DischargeFull, Action::Idle}),
        InfeasibleActionError);
    CHECK_THROWS_AS(simulate_actions(path, spec, 0.0, {Action::Idle}), ConfigError);
}
