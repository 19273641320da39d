#include "prosumer/bench.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <thread>

#include "prosumer/errors.hpp"
#include "prosumer/io.hpp"

namespace prosumer {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

using StageCosts = Eigen::Matrix<double, kActionCount, Eigen::Dynamic>;

// costs(a, t) = sum_s w_s * price_{s,t} * grid_power_{s,t}(a) * dt, where
// w_s is the scenario probability for expected-cost problems and 1 for a
// single realized path. The accumulation order (scenarios ascending) is
// part of the determinism contract.
StageCosts stage_costs_for(const std::vector<const ScenarioPath*>& paths,
                           const BatterySpec& spec, bool use_probabilities) {
    const Eigen::Index horizon = paths.front()->size();
    StageCosts costs = StageCosts::Zero(kActionCount, horizon);
    for (const ScenarioPath* path : paths) {
        if (path->size() != horizon)
            throw ConfigError("scenario paths must share one horizon");
        const double weight = use_probabilities ? path->probability : 1.0;
        for (Eigen::Index t = 0; t < horizon; ++t) {
            const ExoRow exo = path->row(t);
            for (Action a : kAllActions) {
                const auto [pc, pd] = decode_action(a, spec);
                costs(action_index(a), t) +=
                    weight * step_cost(exo.price, grid_exchange(exo, pc, pd), spec.step_hours);
            }
        }
    }
    return costs;
}

std::vector<const ScenarioPath*> path_pointers(const ScenarioSet& set) {
    std::vector<const ScenarioPath*> out;
    out.reserve(set.scenarios.size());
    for (const auto& s : set.scenarios) out.push_back(&s);
    return out;
}

Plan plan_from_actions(const std::vector<Action>& actions, const StageCosts& costs,
                       const BatterySpec& spec, double soc0_mwh) {
    const Eigen::Index horizon = costs.cols();
    Plan plan;
    plan.actions = actions;
    plan.per_step_cost.resize(horizon);
    plan.soc_trace_mwh.resize(horizon + 1);
    plan.soc_trace_mwh[0] = soc0_mwh;
    ProsumerState state{0, soc0_mwh};
    double total = 0.0;
    for (Eigen::Index t = 0; t < horizon; ++t) {
        const Action a = actions[static_cast<std::size_t>(t)];
        const double next = soc_update(state, a, spec);
        if (!energy_within_bounds(next, spec))
            throw InternalError("solver emitted an infeasible plan at t=" + std::to_string(t));
        plan.per_step_cost[t] = costs(action_index(a), t);
        total += plan.per_step_cost[t];
        state = {state.t + 1, next};
        plan.soc_trace_mwh[t + 1] = next;
    }
    plan.total_cost = total;
    return plan;
}

// ---- exact backend -------------------------------------------------------
//
// Charge/discharge energy deltas are constant per action, so after t steps
// the stored energy is soc0 + u*half_charge - v*half_discharge where u and
// v count charge/discharge half-units (full level = two halves). That makes
// (u, v) an exact sufficient state on a (2T+1)^2 lattice.

std::vector<Action> solve_dp_exact(const StageCosts& costs, const BatterySpec& spec,
                                   double soc0_mwh) {
    const Eigen::Index horizon = costs.cols();
    const Eigen::Index side = 2 * horizon + 1;
    const double half_charge =
        (0.5 * spec.charge_eff * spec.rated_power_mw) * spec.step_hours;
    const double half_discharge =
        ((0.5 * spec.rated_power_mw) / spec.discharge_eff) * spec.step_hours;
    auto energy = [&](Eigen::Index u, Eigen::Index v) {
        return soc0_mwh + (double(u) * half_charge - double(v) * half_discharge);
    };
    // lattice steps per action, indexed by action_index
    constexpr int du[kActionCount] = {0, 0, 0, 1, 2};
    constexpr int dv[kActionCount] = {2, 1, 0, 0, 0};

    using PolicyMatrix = Eigen::Matrix<std::int8_t, Eigen::Dynamic, Eigen::Dynamic>;
    std::vector<PolicyMatrix> policy(static_cast<std::size_t>(horizon));
    Eigen::MatrixXd value_next = Eigen::MatrixXd::Zero(side, side);
    Eigen::MatrixXd value_cur(side, side);

    for (Eigen::Index t = horizon - 1; t >= 0; --t) {
        auto& pol = policy[static_cast<std::size_t>(t)];
        pol = PolicyMatrix::Constant(side, side, -1);
        value_cur.setConstant(kInf);
        for (Eigen::Index u = 0; u < side; ++u) {
            for (Eigen::Index v = 0; v < side; ++v) {
                if (!energy_within_bounds(energy(u, v), spec)) continue;
                double best = kInf;
                std::int8_t best_action = -1;
                for (Action a : kActionPreference) {
                    if (spec.availability == 0 && a != Action::Idle) continue;
                    const int ai = action_index(a);
                    const Eigen::Index uu = u + du[ai];
                    const Eigen::Index vv = v + dv[ai];
                    if (uu >= side || vv >= side) continue;
                    if (!energy_within_bounds(energy(uu, vv), spec)) continue;
                    const double cand = costs(ai, t) + value_next(uu, vv);
                    if (cand < best) {
                        best = cand;
                        best_action = static_cast<std::int8_t>(ai);
                    }
                }
                value_cur(u, v) = best;
                pol(u, v) = best_action;
            }
        }
        value_next.swap(value_cur);
    }

    std::vector<Action> actions;
    actions.reserve(static_cast<std::size_t>(horizon));
    Eigen::Index u = 0, v = 0;
    for (Eigen::Index t = 0; t < horizon; ++t) {
        const std::int8_t ai = policy[static_cast<std::size_t>(t)](u, v);
        if (ai < 0) throw InternalError("exact DP reached a dead state at t=" + std::to_string(t));
        actions.push_back(static_cast<Action>(ai));
        u += du[ai];
        v += dv[ai];
    }
    return actions;
}

// ---- grid backend --------------------------------------------------------

std::vector<Action> solve_dp_grid(const StageCosts& costs, const BatterySpec& spec,
                                  double soc0_mwh, const SocGrid& grid) {
    grid.validate();
    const Eigen::Index horizon = costs.cols();
    const Eigen::Index nodes = grid.node_count();
    if (nodes * (horizon + 1) > 60'000'000)
        throw ConfigError("SOC grid too large (" + std::to_string(nodes) + " nodes x " +
                          std::to_string(horizon) + " steps); coarsen the resolution");
    const double spacing = grid.node_spacing();
    auto node_at = [&](Eigen::Index i) { return grid.lo_mwh + double(i) * spacing; };
    auto nearest_node = [&](double e) {
        const auto i = static_cast<Eigen::Index>(std::llround((e - grid.lo_mwh) / spacing));
        return std::clamp<Eigen::Index>(i, 0, nodes - 1);
    };
    double delta[kActionCount];
    for (Action a : kAllActions)
        delta[action_index(a)] = action_energy_delta_mwh(a, spec);

    // Values for every stage stay resident: the forward pass re-ranks
    // actions against them from the exact (unrounded) SOC, which keeps the
    // emitted plan feasible even when node rounding and reality disagree.
    std::vector<Eigen::ArrayXd> value(static_cast<std::size_t>(horizon) + 1);
    value[static_cast<std::size_t>(horizon)] = Eigen::ArrayXd::Zero(nodes);
    for (Eigen::Index t = horizon - 1; t >= 0; --t) {
        Eigen::ArrayXd cur(nodes);
        const Eigen::ArrayXd& next = value[static_cast<std::size_t>(t) + 1];
        for (Eigen::Index i = 0; i < nodes; ++i) {
            const double e = node_at(i);
            double best = kInf;
            for (Action a : kActionPreference) {
                if (spec.availability == 0 && a != Action::Idle) continue;
                const int ai = action_index(a);
                const double e2 = e + delta[ai];
                if (!energy_within_bounds(e2, spec)) continue;
                const double cand = costs(ai, t) + next[nearest_node(e2)];
                if (cand < best) best = cand;
            }
            cur[i] = best;
        }
        value[static_cast<std::size_t>(t)] = std::move(cur);
    }

    std::vector<Action> actions;
    actions.reserve(static_cast<std::size_t>(horizon));
    double e = soc0_mwh;
    for (Eigen::Index t = 0; t < horizon; ++t) {
        double best = kInf;
        int best_ai = -1;
        const Eigen::ArrayXd& next = value[static_cast<std::size_t>(t) + 1];
        for (Action a : kActionPreference) {
            if (spec.availability == 0 && a != Action::Idle) continue;
            const int ai = action_index(a);
            const double e2 = e + delta[ai];
            if (!energy_within_bounds(e2, spec)) continue;
            const double cand = costs(ai, t) + next[nearest_node(e2)];
            if (cand < best) {
                best = cand;
                best_ai = ai;
            }
        }
        if (best_ai < 0) throw InternalError("grid DP reached a dead state at t=" + std::to_string(t));
        actions.push_back(static_cast<Action>(best_ai));
        e += delta[best_ai];
    }
    return actions;
}

std::vector<Action> solve_dp(const StageCosts& costs, const BatterySpec& spec, double soc0_mwh,
                             const SocGrid& grid, DpBackend backend) {
    if (backend == DpBackend::Auto)
        backend = costs.cols() <= kExactHorizonCap ? DpBackend::Exact : DpBackend::Grid;
    return backend == DpBackend::Exact ? solve_dp_exact(costs, spec, soc0_mwh)
                                       : solve_dp_grid(costs, spec, soc0_mwh, grid);
}

void check_soc0(double soc0_mwh, const BatterySpec& spec) {
    if (!energy_within_bounds(soc0_mwh, spec))
        throw ConfigError("initial stored energy " + fmt_double(soc0_mwh) +
                          " MWh is outside the storage bounds");
}

void run_indexed(std::size_t n, const std::function<void(std::size_t)>& fn) {
    const std::size_t workers =
        std::min<std::size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < n; i += workers) fn(i);
        });
    for (auto& th : pool) th.join();
}

}  // namespace

SocGrid SocGrid::for_battery(const BatterySpec& spec, double resolution_pct) {
    if (resolution_pct <= 0) throw ConfigError("grid resolution must be > 0");
    SocGrid grid;
    grid.lo_mwh = spec.energy_min_mwh();
    grid.hi_mwh = spec.energy_max_mwh();
    grid.resolution_mwh = spec.capacity_mwh * resolution_pct / 100.0;
    return grid;
}

Eigen::Index SocGrid::node_count() const {
    const auto n = static_cast<Eigen::Index>(std::llround((hi_mwh - lo_mwh) / resolution_mwh));
    return std::max<Eigen::Index>(n + 1, 2);
}

void SocGrid::validate() const {
    if (resolution_mwh <= 0) throw ConfigError("grid resolution must be > 0");
    if (hi_mwh <= lo_mwh) throw ConfigError("grid span must be positive");
}

Plan brute_force_enumerate(const ScenarioPath& path, const BatterySpec& spec, double soc0_mwh,
                           int horizon_cap) {
    const Eigen::Index horizon = path.size();
    if (horizon > horizon_cap)
        throw ConfigError("brute-force horizon " + std::to_string(horizon) + " exceeds cap " +
                          std::to_string(horizon_cap) + " (5^T plans)");
    check_soc0(soc0_mwh, spec);
    const StageCosts costs = stage_costs_for({&path}, spec, /*use_probabilities=*/false);

    std::vector<Action> current(static_cast<std::size_t>(horizon), Action::Idle);
    std::vector<Action> best_actions;
    double best_cost = kInf;

    // Depth-first in tie-break preference order, so the first optimum found
    // is the preferred one and only strict improvements replace it.
    auto dfs = [&](auto&& self, Eigen::Index t, double energy, double cost) -> void {
        if (t == horizon) {
            if (cost < best_cost) {
                best_cost = cost;
                best_actions = current;
            }
            return;
        }
        for (Action a : kActionPreference) {
            if (spec.availability == 0 && a != Action::Idle) continue;
            const double next = energy + action_energy_delta_mwh(a, spec);
            if (!energy_within_bounds(next, spec)) continue;
            current[static_cast<std::size_t>(t)] = a;
            self(self, t + 1, next, cost + costs(action_index(a), t));
        }
    };
    dfs(dfs, 0, soc0_mwh, 0.0);
    if (!std::isfinite(best_cost)) throw InternalError("no feasible plan found");
    return plan_from_actions(best_actions, costs, spec, soc0_mwh);
}

Plan solve_deterministic_dp(const ScenarioPath& path, const BatterySpec& spec, double soc0_mwh,
                            const SocGrid& grid, DpBackend backend) {
    check_soc0(soc0_mwh, spec);
    const StageCosts costs = stage_costs_for({&path}, spec, /*use_probabilities=*/false);
    return plan_from_actions(solve_dp(costs, spec, soc0_mwh, grid, backend), costs, spec,
                             soc0_mwh);
}

WaitAndSeeResult solve_wait_and_see(const ScenarioSet& set, const BatterySpec& spec,
                                    double soc0_mwh, const SocGrid& grid, DpBackend backend) {
    if (set.scenarios.empty()) throw ConfigError("scenario set is empty");
    WaitAndSeeResult result;
    result.plans.resize(set.scenarios.size());
    run_indexed(set.scenarios.size(), [&](std::size_t s) {
        result.plans[s] = solve_deterministic_dp(set.scenarios[s], spec, soc0_mwh, grid, backend);
    });
    double expected = 0.0;
    for (std::size_t s = 0; s < set.scenarios.size(); ++s)
        expected += set.scenarios[s].probability * result.plans[s].total_cost;
    result.expected_cost = expected;
    return result;
}

Plan solve_stochastic_nonanticipative(const ScenarioSet& set, const BatterySpec& spec,
                                      double soc0_mwh, const SocGrid& grid, DpBackend backend) {
    if (set.scenarios.empty()) throw ConfigError("scenario set is empty");
    check_soc0(soc0_mwh, spec);
    const StageCosts costs = stage_costs_for(path_pointers(set), spec,
                                             /*use_probabilities=*/true);
    return plan_from_actions(solve_dp(costs, spec, soc0_mwh, grid, backend), costs, spec,
                             soc0_mwh);
}

std::vector<ConvergenceRow> convergence_study(const MarketSeries& series,
                                              const std::vector<int>& ns_values,
                                              const WindowSpec& window, std::uint64_t seed,
                                              const BatterySpec& spec, double soc0_mwh,
                                              const SocGrid& grid, const WindowSpec* history) {
    if (ns_values.empty()) throw ConfigError("ns_values must be non-empty");
    const int max_ns = *std::max_element(ns_values.begin(), ns_values.end());
    if (max_ns < 1) throw ConfigError("scenario counts must be >= 1");

    WindowSpec hist = history ? *history : WindowSpec{0, window.start};
    if (hist.len < window.len)
        throw DataError("history range shorter than the target window");
    const MarketSeries source = series_window(series, hist);
    const int anchor =
        calendar_features(series.timestamps.at(static_cast<std::size_t>(window.start)))
            .hour_of_day;
    const ScenarioSet master = sample_scenarios(source, max_ns, window.len, seed,
                                                SamplingMethod::HistoricalWindows, anchor);

    std::vector<ConvergenceRow> rows(ns_values.size());
    run_indexed(ns_values.size(), [&](std::size_t i) {
        const int ns = ns_values[i];
        ScenarioSet subset;
        subset.seed = seed;
        subset.method = master.method;
        subset.scenarios.assign(master.scenarios.begin(), master.scenarios.begin() + ns);
        for (auto& s : subset.scenarios) s.probability = 1.0 / ns;
        const Plan plan = solve_stochastic_nonanticipative(subset, spec, soc0_mwh, grid);
        rows[i] = {ns, plan.total_cost};
    });
    return rows;
}

Plan simulate_actions(const ScenarioPath& path, const BatterySpec& spec, double soc0_mwh,
                      const std::vector<Action>& actions) {
    if (static_cast<Eigen::Index>(actions.size()) != path.size())
        throw ConfigError("action sequence length " + std::to_string(actions.size()) +
                          " does not match path length " + std::to_string(path.size()));
    check_soc0(soc0_mwh, spec);
    Plan plan;
    plan.actions = actions;
    plan.per_step_cost.resize(path.size());
    plan.soc_trace_mwh.resize(path.size() + 1);
    plan.soc_trace_mwh[0] = soc0_mwh;
    ProsumerState state{0, soc0_mwh};
    double total = 0.0;
    for (Eigen::Index t = 0; t < path.size(); ++t) {
        const StepOutcome out = transition(state, actions[static_cast<std::size_t>(t)],
                                           path.row(t), spec, 1.0);
        plan.per_step_cost[t] = out.cost;
        total += out.cost;
        plan.soc_trace_mwh[t + 1] = out.next_state.stored_energy_mwh;
        state = out.next_state;
    }
    plan.total_cost = total;
    return plan;
}

void write_lp(const std::filesystem::path& path, const ScenarioSet& set, const BatterySpec& spec,
              double soc0_mwh) {
    if (set.scenarios.empty()) throw ConfigError("scenario set is empty");
    check_soc0(soc0_mwh, spec);
    const double rated = spec.rated_power_mw;
    const double dt = spec.step_hours;
    std::ostringstream lp;
    lp << "\\ prosumer scheduling MILP, scenario-indexed decisions\n";
    lp << "Minimize\n obj:";
    for (std::size_t s = 0; s < set.scenarios.size(); ++s) {
        const auto& sc = set.scenarios[s];
        for (Eigen::Index t = 0; t < sc.size(); ++t) {
            const double coeff = sc.probability * sc.price[t] * dt;
            lp << (coeff < 0 ? " - " : " + ") << fmt_double(std::abs(coeff)) << " pF_s"
               << s << "_t" << t;
        }
    }
    lp << "\nSubject To\n";
    for (std::size_t s = 0; s < set.scenarios.size(); ++s) {
        const auto& sc = set.scenarios[s];
        for (Eigen::Index t = 0; t < sc.size(); ++t) {
            const std::string sfx = "_s" + std::to_string(s) + "_t" + std::to_string(t);
            const double net = sc.demand[t] - sc.wind[t] - sc.solar[t];
            lp << " bal" << sfx << ": pF" << sfx << " + " << fmt_double(0.5 * rated) << " ud"
               << sfx << " + " << fmt_double(rated) << " udf" << sfx << " - "
               << fmt_double(0.5 * rated) << " uc" << sfx << " - " << fmt_double(rated)
               << " ucf" << sfx << " = " << fmt_double(net) << "\n";
            lp << " sel" << sfx << ": uc" << sfx << " + ucf" << sfx << " + ud" << sfx
               << " + udf" << sfx << " <= " << spec.availability << "\n";
            const double qc = 0.5 * spec.charge_eff * rated * dt;
            const double qd = 0.5 * rated / spec.discharge_eff * dt;
            lp << " soc" << sfx << ": e" << sfx;
            if (t > 0) lp << " - e_s" << s << "_t" << (t - 1);
            lp << " - " << fmt_double(qc) << " uc" << sfx << " - " << fmt_double(2 * qc)
               << " ucf" << sfx << " + " << fmt_double(qd) << " ud" << sfx << " + "
               << fmt_double(2 * qd) << " udf" << sfx
               << " = " << fmt_double(t == 0 ? soc0_mwh : 0.0) << "\n";
        }
    }
    lp << "Bounds\n";
    for (std::size_t s = 0; s < set.scenarios.size(); ++s) {
        for (Eigen::Index t = 0; t < set.scenarios[s].size(); ++t) {
            const std::string sfx = "_s" + std::to_string(s) + "_t" + std::to_string(t);
            lp << " pF" << sfx << " free\n";
            lp << " " << fmt_double(spec.energy_min_mwh()) << " <= e" << sfx
               << " <= " << fmt_double(spec.energy_max_mwh()) << "\n";
        }
    }
    lp << "Binaries\n";
    for (std::size_t s = 0; s < set.scenarios.size(); ++s)
        for (Eigen::Index t = 0; t < set.scenarios[s].size(); ++t) {
            const std::string sfx = "_s" + std::to_string(s) + "_t" + std::to_string(t);
            lp << " uc" << sfx << " ucf" << sfx << " ud" << sfx << " udf" << sfx << "\n";
        }
    lp << "End\n";
    atomic_write_file(path, lp.str());
}

}  // namespace prosumer
