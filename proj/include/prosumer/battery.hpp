#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>

#include "prosumer/errors.hpp"

namespace prosumer {

// Storage model conventions:
//   power in MW, energy in MWh, prices in currency/MWh (or all per-unit);
//   grid exchange positive = buy from the market, negative = sell;
//   cost = price * grid_power * step_hours, reward = -cost / reward_scale.

// Tolerance for stored-energy bound checks, in MWh. Discharge steps divide
// by the efficiency, so repeated steps carry rounding that a strict
// comparison would reject.
inline constexpr double kSocToleranceMwh = 1e-9;

// The five charge levels, indexed in ascending order of level:
//   index 0..4  <->  level -1, -0.5, 0, +0.5, +1   (positive = charging).
enum class Action : std::int8_t {
    DischargeFull = 0,
    DischargeHalf = 1,
    Idle = 2,
    ChargeHalf = 3,
    ChargeFull = 4,
};

inline constexpr int kActionCount = 5;

inline constexpr std::array<Action, kActionCount> kAllActions = {
    Action::DischargeFull, Action::DischargeHalf, Action::Idle,
    Action::ChargeHalf, Action::ChargeFull};

// Tie-break order used by every solver and the greedy policy: smaller
// |level| first, charging before discharging at equal magnitude.
inline constexpr std::array<Action, kActionCount> kActionPreference = {
    Action::Idle, Action::ChargeHalf, Action::DischargeHalf,
    Action::ChargeFull, Action::DischargeFull};

inline constexpr int action_index(Action a) { return static_cast<int>(a); }

inline constexpr double action_level(Action a) {
    constexpr std::array<double, kActionCount> levels = {-1.0, -0.5, 0.0, 0.5, 1.0};
    return levels[static_cast<int>(a)];
}

inline Action action_from_level(double level) {
    for (Action a : kAllActions)
        if (action_level(a) == level) return a;
    throw ConfigError("no action with level " + std::to_string(level));
}

// The four binary charge/discharge selectors behind one action level:
// level = 0.5*u_charge + u_charge_full - 0.5*u_discharge - u_discharge_full.
struct ActionBinaries {
    int u_charge_half;
    int u_charge_full;
    int u_discharge_half;
    int u_discharge_full;
};

inline constexpr ActionBinaries action_binaries(Action a) {
    switch (a) {
        case Action::DischargeFull: return {0, 0, 0, 1};
        case Action::DischargeHalf: return {0, 0, 1, 0};
        case Action::Idle: return {0, 0, 0, 0};
        case Action::ChargeHalf: return {1, 0, 0, 0};
        case Action::ChargeFull: return {0, 1, 0, 0};
    }
    return {0, 0, 0, 0};
}

struct BatterySpec {
    double rated_power_mw = 10.0;
    double capacity_mwh = 1000.0;
    double soc_min = 0.0;          // fraction of capacity
    double soc_max = 1.0;          // fraction of capacity
    double charge_eff = 0.9;
    double discharge_eff = 0.9;
    int availability = 1;          // 0 = unit offline, only idle allowed
    double step_hours = 1.0;

    double energy_min_mwh() const { return soc_min * capacity_mwh; }
    double energy_max_mwh() const { return soc_max * capacity_mwh; }

    void validate() const {
        if (rated_power_mw <= 0) throw ConfigError("battery rated_power_mw must be > 0");
        if (capacity_mwh <= 0) throw ConfigError("battery capacity_mwh must be > 0");
        if (!(soc_min >= 0 && soc_min < soc_max && soc_max <= 1))
            throw ConfigError("battery SOC bounds must satisfy 0 <= soc_min < soc_max <= 1");
        if (!(charge_eff > 0 && charge_eff <= 1) || !(discharge_eff > 0 && discharge_eff <= 1))
            throw ConfigError("battery efficiencies must be in (0, 1]");
        if (availability != 0 && availability != 1)
            throw ConfigError(
                "battery availability must be 0 or 1; the five-level action encoding assumes "
                "mutually exclusive charge/discharge selectors");
        if (step_hours <= 0) throw ConfigError("battery step_hours must be > 0");
    }

    friend bool operator==(const BatterySpec&, const BatterySpec&) = default;
};

struct ProsumerState {
    int t = 0;
    double stored_energy_mwh = 0.0;

    double soc_pct(const BatterySpec& spec) const {
        return stored_energy_mwh / spec.capacity_mwh * 100.0;
    }
};

// One step of exogenous data, already carrying whatever unit system the
// series is in (raw or per-unit).
struct ExoRow {
    double price = 0.0;
    double demand = 0.0;
    double wind = 0.0;
    double solar = 0.0;
};

struct StepOutcome {
    ProsumerState next_state;
    double p_charge_mw = 0.0;
    double p_discharge_mw = 0.0;
    double grid_power_mw = 0.0;  // positive = buy
    double cost = 0.0;
    double reward = 0.0;
};

// level -> (charge MW, discharge MW); at most one side nonzero.
inline std::pair<double, double> decode_action(Action a, const BatterySpec& spec) {
    const double lvl = action_level(a);
    if (lvl > 0) return {lvl * spec.rated_power_mw, 0.0};
    if (lvl < 0) return {0.0, -lvl * spec.rated_power_mw};
    return {0.0, 0.0};
}

// Energy delta of an action: charge_eff * p_charge - p_discharge / discharge_eff,
// times the step length. Constant per action, independent of the state.
inline double action_energy_delta_mwh(Action a, const BatterySpec& spec) {
    const auto [pc, pd] = decode_action(a, spec);
    return (spec.charge_eff * pc - pd / spec.discharge_eff) * spec.step_hours;
}

inline double soc_update(const ProsumerState& state, Action a, const BatterySpec& spec) {
    return state.stored_energy_mwh + action_energy_delta_mwh(a, spec);
}

inline bool energy_within_bounds(double energy_mwh, const BatterySpec& spec) {
    return energy_mwh >= spec.energy_min_mwh() - kSocToleranceMwh &&
           energy_mwh <= spec.energy_max_mwh() + kSocToleranceMwh;
}

using FeasibleMask = std::array<bool, kActionCount>;

// Actions whose post-step energy stays within bounds. Idle is always
// feasible for a valid state.
inline FeasibleMask feasible_actions(const ProsumerState& state, const BatterySpec& spec) {
    FeasibleMask mask{};
    for (Action a : kAllActions) {
        if (spec.availability == 0 && a != Action::Idle) continue;
        mask[action_index(a)] = energy_within_bounds(soc_update(state, a, spec), spec);
    }
    return mask;
}

inline double grid_exchange(const ExoRow& exo, double p_charge_mw, double p_discharge_mw) {
    return exo.demand - exo.wind - exo.solar - p_discharge_mw + p_charge_mw;
}

inline double step_cost(double price, double grid_power_mw, double step_hours) {
    return price * grid_power_mw * step_hours;
}

inline StepOutcome transition(const ProsumerState& state, Action a, const ExoRow& exo,
                              const BatterySpec& spec, double reward_scale) {
    const double next_energy = soc_update(state, a, spec);
    if (!energy_within_bounds(next_energy, spec)) {
        const char* bound = next_energy < spec.energy_min_mwh() ? "minimum" : "maximum";
        throw InfeasibleActionError(
            "action level " + std::to_string(action_level(a)) + " at t=" + std::to_string(state.t) +
            " drives stored energy to " + std::to_string(next_energy) + " MWh, beyond the " +
            bound + " bound [" + std::to_string(spec.energy_min_mwh()) + ", " +
            std::to_string(spec.energy_max_mwh()) + "]");
    }
    StepOutcome out;
    const auto [pc, pd] = decode_action(a, spec);
    out.p_charge_mw = pc;
    out.p_discharge_mw = pd;
    out.grid_power_mw = grid_exchange(exo, pc, pd);
    out.cost = step_cost(exo.price, out.grid_power_mw, spec.step_hours);
    out.reward = -out.cost / reward_scale;
    out.next_state = {state.t + 1, next_energy};
    return out;
}

}  // namespace prosumer
