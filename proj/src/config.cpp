#include "prosumer/config.hpp"

#include "json.hpp"
#include "prosumer/errors.hpp"
#include "prosumer/io.hpp"

namespace prosumer {

namespace {

using nlohmann::json;

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config key '" + key + "' has the wrong type");
    }
}

WindowSpec window_from(const json& j, const std::string& section) {
    WindowSpec w;
    if (!j.contains("start") || !j.contains("len"))
        throw ConfigError("config section '" + section + "' needs integer 'start' and 'len'");
    w.start = j.at("start").get<Eigen::Index>();
    w.len = j.at("len").get<Eigen::Index>();
    return w;
}

}  // namespace

RunConfig load_config(const std::filesystem::path& path) {
    json doc;
    try {
        doc = json::parse(read_file(path), nullptr, true, /*ignore_comments=*/true);
    } catch (const DataError&) {
        throw ConfigError("cannot open config file " + path.string());
    } catch (const json::exception& e) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    }

    RunConfig config;
    if (doc.contains("data")) {
        const json& d = doc.at("data");
        config.data.path = get_or<std::string>(d, "path", "");
        if (d.contains("columns")) {
            const json& c = d.at("columns");
            config.data.columns.timestamp = get_or<std::string>(c, "timestamp", "timestamp");
            config.data.columns.price = get_or<std::string>(c, "price", "price");
            config.data.columns.demand = get_or<std::string>(c, "demand", "demand");
            config.data.columns.wind = get_or<std::string>(c, "wind", "wind");
            config.data.columns.solar = get_or<std::string>(c, "solar", "solar");
        }
        config.data.power_base_mw = get_or(d, "power_base_mw", config.data.power_base_mw);
        config.data.step_hours = get_or(d, "step_hours", config.data.step_hours);
        config.data.prosumer_scale = get_or(d, "prosumer_scale", config.data.prosumer_scale);
    }
    if (doc.contains("battery")) {
        const json& b = doc.at("battery");
        config.battery.rated_power_mw = get_or(b, "rated_power_mw", config.battery.rated_power_mw);
        config.battery.capacity_mwh = get_or(b, "capacity_mwh", config.battery.capacity_mwh);
        config.battery.soc_min = get_or(b, "soc_min", config.battery.soc_min);
        config.battery.soc_max = get_or(b, "soc_max", config.battery.soc_max);
        config.battery.charge_eff = get_or(b, "charge_eff", config.battery.charge_eff);
        config.battery.discharge_eff = get_or(b, "discharge_eff", config.battery.discharge_eff);
        config.battery.availability = get_or(b, "availability", config.battery.availability);
        config.battery.step_hours = config.data.step_hours;
        config.soc0_pct = get_or(b, "soc0_pct", config.soc0_pct);
        config.battery.validate();
    }
    config.battery.step_hours = config.data.step_hours;
    if (doc.contains("discretizer")) {
        const json& d = doc.at("discretizer");
        config.discretizer.soc_bin_pct = get_or(d, "soc_bin_pct", config.discretizer.soc_bin_pct);
        config.discretizer.signal_bins = get_or(d, "signal_bins", config.discretizer.signal_bins);
        config.discretizer.day_feature =
            day_feature_from_string(get_or<std::string>(d, "day_feature", "month"));
        config.discretizer.hour_feature =
            hour_feature_from_string(get_or<std::string>(d, "hour_feature", "hour"));
        config.discretizer.validate();
    }
    if (doc.contains("hyperparams")) {
        const json& h = doc.at("hyperparams");
        Hyperparams& hp = config.hyperparams;
        hp.alpha = get_or(h, "alpha", hp.alpha);
        hp.gamma = get_or(h, "gamma", hp.gamma);
        hp.itr_lim = get_or(h, "itr_lim", hp.itr_lim);
        hp.rew_eps = get_or(h, "rew_eps", hp.rew_eps);
        hp.agt_num = get_or(h, "agt_num", hp.agt_num);
        hp.penalty = get_or(h, "penalty", hp.penalty);
        hp.episodes_per_round = get_or(h, "episodes_per_round", hp.episodes_per_round);
        hp.seed = get_or(h, "seed", hp.seed);
        hp.max_steps = get_or(h, "max_steps", hp.max_steps);
        hp.epsilon = get_or(h, "epsilon", hp.epsilon);
        hp.random_soc0 = get_or(h, "random_soc0", hp.random_soc0);
        hp.episode_steps = get_or(h, "episode_steps", hp.episode_steps);
        hp.validate();
    }
    if (doc.contains("solver")) {
        const json& s = doc.at("solver");
        SolverConfig& sv = config.solver;
        sv.resolution_pct = get_or(s, "resolution_pct", sv.resolution_pct);
        sv.ns = get_or(s, "ns", sv.ns);
        sv.scenario_method = get_or<std::string>(s, "scenario_method", sv.scenario_method);
        sampling_method_from_string(sv.scenario_method);
        sv.scenario_seed = get_or(s, "scenario_seed", sv.scenario_seed);
        sv.convergence_ns_max = get_or(s, "convergence_ns_max", sv.convergence_ns_max);
        sv.brute_force_cap = get_or(s, "brute_force_cap", sv.brute_force_cap);
        if (s.contains("train_window"))
            sv.train_window = window_from(s.at("train_window"), "solver.train_window");
        if (sv.resolution_pct <= 0) throw ConfigError("solver.resolution_pct must be > 0");
        if (sv.ns < 1) throw ConfigError("solver.ns must be >= 1");
    }
    if (doc.contains("compare")) {
        const json& c = doc.at("compare");
        if (c.contains("test_window"))
            config.compare.test_window = window_from(c.at("test_window"), "compare.test_window");
        config.compare.agent_path = get_or<std::string>(c, "agent_path", "");
        if (c.contains("reward_scale") && !c.at("reward_scale").is_null())
            config.compare.reward_scale = c.at("reward_scale").get<double>();
    }
    return config;
}

void override_seed(RunConfig& config, std::uint64_t seed) {
    config.hyperparams.seed = seed;
    config.solver.scenario_seed = seed;
}

}  // namespace prosumer
