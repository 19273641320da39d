#include "prosumer/commands.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "json.hpp"
#include "prosumer/errors.hpp"
#include "prosumer/io.hpp"

namespace prosumer {

namespace {

namespace fs = std::filesystem;

MarketSeries load_dataset(const fs::path& out_dir) {
    if (!fs::exists(out_dir / "dataset.csv"))
        throw DataError("no dataset under " + out_dir.string() + "; run `ingest` first");
    return read_dataset(out_dir);
}

WindowSpec require_window(const WindowSpec& w, const std::string& key) {
    if (w.len < 1) throw ConfigError("config key '" + key + "' is not set");
    return w;
}

std::string obs_to_string(const ObservationKey& k) {
    std::ostringstream ss;
    ss << k.day << '-' << k.hour << '-' << k.soc << '-' << k.solar << '-' << k.wind << '-'
       << k.price << '-' << k.demand;
    return ss.str();
}

void write_trace_csv(const fs::path& path, const EpisodeTrace& trace) {
    std::ostringstream csv;
    csv << "t,timestamp,obs,action_level,p_grid,cost,reward,soc_pct\n";
    for (const TraceStep& s : trace.steps) {
        csv << s.t << ',' << format_timestamp(s.timestamp) << ','
            << (s.has_observation ? obs_to_string(s.observation) : std::string()) << ','
            << fmt_double(s.action_level) << ',' << fmt_double(s.grid_power) << ','
            << fmt_double(s.cost) << ',' << fmt_double(s.reward) << ','
            << fmt_double(s.soc_pct) << '\n';
    }
    atomic_write_file(path, csv.str());
}

// Plan trace against per-step net loads (realized or expected, depending on
// what the plan was solved against).
void write_plan_csv(const fs::path& path, const Plan& plan, const Eigen::ArrayXd& net_load,
                    const std::vector<Timestamp>& timestamps, const BatterySpec& spec) {
    std::ostringstream csv;
    csv << "t,timestamp,action,soc_pct,p_grid,cost\n";
    for (Eigen::Index t = 0; t < static_cast<Eigen::Index>(plan.actions.size()); ++t) {
        const auto [pc, pd] = decode_action(plan.actions[static_cast<std::size_t>(t)], spec);
        csv << t << ',' << format_timestamp(timestamps[static_cast<std::size_t>(t)]) << ','
            << fmt_double(action_level(plan.actions[static_cast<std::size_t>(t)])) << ','
            << fmt_double(plan.soc_trace_mwh[t + 1] / spec.capacity_mwh * 100.0) << ','
            << fmt_double(net_load[t] - pd + pc) << ',' << fmt_double(plan.per_step_cost[t])
            << '\n';
    }
    atomic_write_file(path, csv.str());
}

EpisodeTrace trace_from_plan(const ScenarioPath& path, const BatterySpec& spec, double soc0_mwh,
                             const Plan& plan, double reward_scale) {
    EpisodeTrace trace;
    ProsumerState state{0, soc0_mwh};
    for (Eigen::Index t = 0; t < path.size(); ++t) {
        const StepOutcome out = transition(state, plan.actions[static_cast<std::size_t>(t)],
                                           path.row(t), spec, reward_scale);
        TraceStep step;
        step.t = static_cast<int>(t);
        step.timestamp = path.timestamps[static_cast<std::size_t>(t)];
        step.action_level = action_level(plan.actions[static_cast<std::size_t>(t)]);
        step.grid_power = out.grid_power_mw;
        step.cost = out.cost;
        step.reward = out.reward;
        step.soc_pct = out.next_state.soc_pct(spec);
        trace.steps.push_back(step);
        trace.total_cost += out.cost;
        trace.total_reward += out.reward;
        state = out.next_state;
    }
    return trace;
}

ScenarioSet sampled_scenarios(const MarketSeries& series, const RunConfig& config,
                              const WindowSpec& test, int ns) {
    const WindowSpec train = require_window(config.solver.train_window, "solver.train_window");
    const MarketSeries history = series_window(series, train);
    const int anchor =
        calendar_features(series.timestamps.at(static_cast<std::size_t>(test.start)))
            .hour_of_day;
    return sample_scenarios(history, ns, test.len, config.solver.scenario_seed,
                            sampling_method_from_string(config.solver.scenario_method), anchor);
}

double resolve_reward_scale(const RunConfig& config, const SeriesMeta& meta) {
    return config.compare.reward_scale.value_or(default_reward_scale(meta));
}

fs::path resolve_agent_path(const RunConfig& config, const fs::path& out_dir) {
    return config.compare.agent_path.empty() ? out_dir / "agent.json"
                                             : config.compare.agent_path;
}

void check_agent_matches(const AgentArtifact& agent, const BatterySpec& battery) {
    if (!(agent.battery == battery))
        throw ConfigError(
            "agent artifact was trained with a different battery spec than the config; "
            "retrain or fix the config");
}

}  // namespace

IngestSummary cmd_ingest(const RunConfig& config, const fs::path& out_dir) {
    if (config.data.path.empty()) throw ConfigError("config key 'data.path' is not set");
    const MarketSeries raw = load_series(config.data.path, config.data.columns,
                                         config.data.step_hours, config.data.prosumer_scale);
    const MarketSeries series = normalize(raw, config.data.power_base_mw);
    write_dataset(out_dir, series);

    IngestSummary summary;
    summary.rows = series.size();
    summary.power_base_mw = series.meta.power_base_mw;
    summary.price_base = series.meta.price_base;
    summary.dataset_csv = out_dir / "dataset.csv";

    nlohmann::ordered_json j;
    j["rows"] = summary.rows;
    j["power_base_mw"] = summary.power_base_mw;
    j["price_base"] = summary.price_base;
    j["source"] = config.data.path.string();
    atomic_write_file(out_dir / "ingest_summary.json", j.dump(2) + "\n");
    return summary;
}

TrainSummary cmd_train(const RunConfig& config, const fs::path& out_dir) {
    const MarketSeries series = load_dataset(out_dir);
    const WindowSpec window = require_window(config.solver.train_window, "solver.train_window");
    const BatterySpec battery = battery_in_series_units(config.battery, series.meta);
    const double soc0 = config.soc0_pct / 100.0 * battery.capacity_mwh;
    const double scale = resolve_reward_scale(config, series.meta);

    TrainSummary summary;
    const fs::path agents_dir = out_dir / "agents";
    const SaveCallback on_save = [&](const AgentArtifact& agent, int index) {
        char name[32];
        std::snprintf(name, sizeof name, "agent_%03d.json", index);
        const fs::path p = agents_dir / name;
        save_agent(agent, p);
        summary.saved_agents.push_back(p);
    };

    const TrainResult result = train_agent(series, window, battery, config.discretizer,
                                           config.hyperparams, soc0, scale, on_save);

    summary.agent_path = out_dir / "agent.json";
    save_agent(result.agent, summary.agent_path);
    summary.save_count = result.save_count;
    summary.best_eval_reward = result.agent.best_eval_reward;
    summary.rounds = static_cast<long>(result.log.size());

    std::ostringstream log;
    log << "round,episodes,steps,eval_reward,saved\n";
    for (const TrainRound& r : result.log)
        log << r.round << ',' << r.episodes << ',' << r.steps << ',' << fmt_double(r.eval_reward)
            << ',' << (r.saved ? 1 : 0) << '\n';
    atomic_write_file(out_dir / "train_log.csv", log.str());

    nlohmann::ordered_json j;
    j["agent"] = summary.agent_path.filename().string();
    j["save_count"] = summary.save_count;
    j["best_eval_reward"] = summary.best_eval_reward;
    j["rounds"] = summary.rounds;
    j["observations"] = result.agent.qtable.observation_count();
    atomic_write_file(out_dir / "train_summary.json", j.dump(2) + "\n");
    return summary;
}

SolveMode solve_mode_from_string(const std::string& tag) {
    if (tag == "deterministic") return SolveMode::Deterministic;
    if (tag == "stochastic") return SolveMode::Stochastic;
    if (tag == "wait-and-see") return SolveMode::WaitAndSee;
    if (tag == "convergence") return SolveMode::Convergence;
    throw ConfigError("unknown solve mode '" + tag + "'");
}

SolveSummary cmd_solve(const RunConfig& config, const fs::path& out_dir, SolveMode mode,
                       const std::optional<fs::path>& lp_out) {
    const MarketSeries series = load_dataset(out_dir);
    const WindowSpec test = require_window(config.compare.test_window, "compare.test_window");
    const ScenarioPath test_path = slice_window(series, test.start, test.len);
    const BatterySpec battery = battery_in_series_units(config.battery, series.meta);
    const SocGrid grid = SocGrid::for_battery(battery, config.solver.resolution_pct);
    const double soc0 = config.soc0_pct / 100.0 * battery.capacity_mwh;

    SolveSummary summary;
    summary.mode = mode;

    switch (mode) {
        case SolveMode::Deterministic: {
            const Plan plan = solve_deterministic_dp(test_path, battery, soc0, grid);
            const Eigen::ArrayXd net = test_path.demand - test_path.wind - test_path.solar;
            const fs::path p = out_dir / "plan_deterministic.csv";
            write_plan_csv(p, plan, net, test_path.timestamps, battery);
            summary.cost = plan.total_cost;
            summary.outputs.push_back(p);
            if (lp_out) {
                ScenarioSet single;
                single.scenarios.push_back(test_path);
                write_lp(*lp_out, single, battery, soc0);
                summary.outputs.push_back(*lp_out);
            }
            break;
        }
        case SolveMode::Stochastic: {
            const ScenarioSet set = sampled_scenarios(series, config, test, config.solver.ns);
            const Plan plan = solve_stochastic_nonanticipative(set, battery, soc0, grid);
            Eigen::ArrayXd net = Eigen::ArrayXd::Zero(test.len);
            for (const auto& s : set.scenarios)
                net += s.probability * (s.demand - s.wind - s.solar);
            const fs::path p = out_dir / "plan_stochastic.csv";
            write_plan_csv(p, plan, net, test_path.timestamps, battery);
            summary.cost = plan.total_cost;
            summary.outputs.push_back(p);
            if (lp_out) {
                write_lp(*lp_out, set, battery, soc0);
                summary.outputs.push_back(*lp_out);
            }
            break;
        }
        case SolveMode::WaitAndSee: {
            const ScenarioSet set = sampled_scenarios(series, config, test, config.solver.ns);
            const WaitAndSeeResult result =
                solve_wait_and_see(set, battery, soc0, grid);
            nlohmann::ordered_json j;
            j["expected_cost"] = result.expected_cost;
            nlohmann::ordered_json costs = nlohmann::ordered_json::array();
            for (std::size_t s = 0; s < result.plans.size(); ++s) {
                char name[32];
                std::snprintf(name, sizeof name, "plan_waitsee_s%03zu.csv", s);
                const fs::path p = out_dir / name;
                const auto& sc = set.scenarios[s];
                write_plan_csv(p, result.plans[s], sc.demand - sc.wind - sc.solar,
                               sc.timestamps, battery);
                summary.outputs.push_back(p);
                costs.push_back(result.plans[s].total_cost);
            }
            j["scenario_costs"] = std::move(costs);
            const fs::path sp = out_dir / "waitsee_summary.json";
            atomic_write_file(sp, j.dump(2) + "\n");
            summary.cost = result.expected_cost;
            summary.outputs.push_back(sp);
            if (lp_out) {
                write_lp(*lp_out, set, battery, soc0);
                summary.outputs.push_back(*lp_out);
            }
            break;
        }
        case SolveMode::Convergence: {
            std::vector<int> ns_values;
            for (int ns = 1; ns <= config.solver.convergence_ns_max; ++ns)
                ns_values.push_back(ns);
            const WindowSpec history = require_window(config.solver.train_window,
                                                      "solver.train_window");
            const auto rows = convergence_study(series, ns_values, test,
                                                config.solver.scenario_seed, battery,
                                                soc0, grid, &history);
            std::ostringstream csv;
            csv << "ns,expected_cost\n";
            for (const ConvergenceRow& r : rows)
                csv << r.ns << ',' << fmt_double(r.expected_cost) << '\n';
            const fs::path p = out_dir / "convergence.csv";
            atomic_write_file(p, csv.str());
            summary.cost = rows.back().expected_cost;
            summary.outputs.push_back(p);
            break;
        }
    }
    return summary;
}

EvaluateSummary cmd_evaluate(const RunConfig& config, const fs::path& out_dir) {
    const MarketSeries series = load_dataset(out_dir);
    const WindowSpec test = require_window(config.compare.test_window, "compare.test_window");
    const BatterySpec battery = battery_in_series_units(config.battery, series.meta);
    const AgentArtifact agent = load_agent(resolve_agent_path(config, out_dir));
    check_agent_matches(agent, battery);
    const ScenarioPath test_path = slice_window(series, test.start, test.len);
    const double soc0 = config.soc0_pct / 100.0 * battery.capacity_mwh;
    const EpisodeTrace trace = greedy_rollout(agent, test_path, soc0);

    EvaluateSummary summary;
    summary.total_cost = trace.total_cost;
    summary.total_reward = trace.total_reward;
    summary.trace_path = out_dir / "trace_agent.csv";
    write_trace_csv(summary.trace_path, trace);

    nlohmann::ordered_json j;
    j["total_cost"] = trace.total_cost;
    j["total_reward"] = trace.total_reward;
    j["steps"] = trace.steps.size();
    atomic_write_file(out_dir / "evaluate_summary.json", j.dump(2) + "\n");
    return summary;
}

CompareReport cmd_compare(const RunConfig& config, const fs::path& out_dir) {
    const MarketSeries series = load_dataset(out_dir);
    const WindowSpec test = require_window(config.compare.test_window, "compare.test_window");
    const ScenarioPath test_path = slice_window(series, test.start, test.len);
    const BatterySpec battery = battery_in_series_units(config.battery, series.meta);
    const SocGrid grid = SocGrid::for_battery(battery, config.solver.resolution_pct);
    const double soc0 = config.soc0_pct / 100.0 * battery.capacity_mwh;
    const double scale = resolve_reward_scale(config, series.meta);

    const AgentArtifact agent = load_agent(resolve_agent_path(config, out_dir));
    check_agent_matches(agent, battery);

    // (a) perfect-foresight optimum on the realized path
    const Plan det_plan = solve_deterministic_dp(test_path, battery, soc0, grid);
    // (b) non-anticipative stochastic plan, re-simulated on the realized path
    const ScenarioSet set = sampled_scenarios(series, config, test, config.solver.ns);
    const Plan stoch_plan = solve_stochastic_nonanticipative(set, battery, soc0, grid);
    const Plan stoch_realized = simulate_actions(test_path, battery, soc0,
                                                 stoch_plan.actions);
    // (c) trained agent, greedy
    const EpisodeTrace agent_trace = greedy_rollout(agent, test_path, soc0);

    const EpisodeTrace det_trace =
        trace_from_plan(test_path, battery, soc0, det_plan, scale);
    const EpisodeTrace stoch_trace =
        trace_from_plan(test_path, battery, soc0, stoch_realized, scale);

    CompareReport report;
    report.deterministic_cost = det_trace.total_cost;
    report.stochastic_expected_cost = stoch_plan.total_cost;
    report.stochastic_realized_cost = stoch_trace.total_cost;
    report.agent_cost = agent_trace.total_cost;
    report.deterministic_profit = -report.deterministic_cost;
    report.stochastic_profit = -report.stochastic_realized_cost;
    report.agent_profit = -report.agent_cost;
    if (report.stochastic_profit != 0.0)
        report.improvement_pct = (report.agent_profit - report.stochastic_profit) /
                                 std::abs(report.stochastic_profit) * 100.0;

    // The deterministic benchmark optimizes over the same action set on the
    // same path, so nothing may beat it.
    if (report.deterministic_profit < report.agent_profit - 1e-9 ||
        report.deterministic_profit < report.stochastic_profit - 1e-9)
        throw InternalError("comparison ordering violated: deterministic plan is not optimal");

    const fs::path det_csv = out_dir / "trace_deterministic.csv";
    const fs::path stoch_csv = out_dir / "trace_stochastic.csv";
    const fs::path agent_csv = out_dir / "trace_agent.csv";
    write_trace_csv(det_csv, det_trace);
    write_trace_csv(stoch_csv, stoch_trace);
    write_trace_csv(agent_csv, agent_trace);
    report.trace_paths = {det_csv, stoch_csv, agent_csv};

    // Aligned SOC and action/reward tables, one row per step.
    {
        std::ostringstream soc;
        soc << "t,timestamp,soc_deterministic,soc_stochastic,soc_agent\n";
        for (std::size_t t = 0; t < det_trace.steps.size(); ++t)
            soc << t << ',' << format_timestamp(det_trace.steps[t].timestamp) << ','
                << fmt_double(det_trace.steps[t].soc_pct) << ','
                << fmt_double(stoch_trace.steps[t].soc_pct) << ','
                << fmt_double(agent_trace.steps[t].soc_pct) << '\n';
        atomic_write_file(out_dir / "compare_soc.csv", soc.str());

        std::ostringstream act;
        act << "t,timestamp,action_deterministic,action_stochastic,action_agent,reward_agent\n";
        for (std::size_t t = 0; t < det_trace.steps.size(); ++t)
            act << t << ',' << format_timestamp(det_trace.steps[t].timestamp) << ','
                << fmt_double(det_trace.steps[t].action_level) << ','
                << fmt_double(stoch_trace.steps[t].action_level) << ','
                << fmt_double(agent_trace.steps[t].action_level) << ','
                << fmt_double(agent_trace.steps[t].reward) << '\n';
        atomic_write_file(out_dir / "compare_actions_rewards.csv", act.str());
        report.trace_paths.push_back(out_dir / "compare_soc.csv");
        report.trace_paths.push_back(out_dir / "compare_actions_rewards.csv");
    }

    nlohmann::ordered_json j;
    j["deterministic_cost"] = report.deterministic_cost;
    j["stochastic_expected_cost"] = report.stochastic_expected_cost;
    j["stochastic_realized_cost"] = report.stochastic_realized_cost;
    j["agent_cost"] = report.agent_cost;
    j["deterministic_profit"] = report.deterministic_profit;
    j["stochastic_profit"] = report.stochastic_profit;
    j["agent_profit"] = report.agent_profit;
    if (report.improvement_pct)
        j["improvement_pct"] = *report.improvement_pct;
    else
        j["improvement_pct"] = nullptr;
    j["scenario_count"] = set.scenarios.size();
    nlohmann::ordered_json traces = nlohmann::ordered_json::array();
    for (const auto& p : report.trace_paths) traces.push_back(p.filename().string());
    j["traces"] = std::move(traces);
    report.report_path = out_dir / "compare_report.json";
    atomic_write_file(report.report_path, j.dump(2) + "\n");
    return report;
}

}  // namespace prosumer
