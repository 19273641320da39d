#include "doctest.h"

#include <fstream>

#include "prosumer/commands.hpp"
#include "prosumer/errors.hpp"
#include "prosumer/io.hpp"
#include "testutil.hpp"

using namespace prosumer;
using testutil::repo_root;
using testutil::slurp;
using testutil::tmp_dir;

namespace {

RunConfig packaged_config() {
    RunConfig cfg = load_config(repo_root() / "configs" / "example.json");
    cfg.data.path = repo_root() / cfg.data.path;
    return cfg;
}

// Small two-price instance: four days hourly, balanced local load, cheap
// nights and dear days, lossless 10 MW / 40 MWh unit. Fast to train on.
std::filesystem::path write_toy_tree(const std::filesystem::path& dir) {
    std::ostringstream csv;
    csv << "ts,price,load,wind,pv\n";
    for (int i = 0; i < 96; ++i) {
        const int h = i % 24;
        csv << format_timestamp(testutil::hour_stamp(i)) << ','
            << (h < 12 ? 10.0 : 40.0) << ",30,20,10\n";
    }
    atomic_write_file(dir / "toy.csv", csv.str());

    std::ostringstream cfg;
    cfg << R"({
  "data": {
    "path": ")" << (dir / "toy.csv").string() << R"(",
    "columns": {"timestamp": "ts", "price": "price", "demand": "load",
                "wind": "wind", "solar": "pv"},
    "power_base_mw": 50.0,
    "step_hours": 1.0
  },
  "battery": {"rated_power_mw": 10.0, "capacity_mwh": 40.0, "soc_min": 0.0,
              "soc_max": 1.0, "charge_eff": 1.0, "discharge_eff": 1.0,
              "soc0_pct": 0.0},
  "discretizer": {"soc_bin_pct": 12.5, "signal_bins": 4,
                  "day_feature": "none", "hour_feature": "hour"},
  "hyperparams": {"alpha": 0.4, "gamma": 0.99, "rew_eps": 0.05, "agt_num": 2,
                  "penalty": -100.0, "episodes_per_round": 20, "seed": 11,
                  "max_steps": 40000},
  "solver": {"ns": 3, "scenario_seed": 5, "train_window": {"start": 0, "len": 72}},
  "compare": {"test_window": {"start": 72, "len": 24}}
})";
    atomic_write_file(dir / "toy.json", cfg.str());
    return dir / "toy.json";
}

}  // namespace

TEST_CASE("cmd_ingest on the packaged dataset") {
    const auto out = tmp_dir("cmd_ingest");
    const RunConfig cfg = packaged_config();
    const IngestSummary s = cmd_ingest(cfg, out);
    CHECK(s.rows == 720);
    CHECK(s.price_base == 567.15);

    const MarketSeries series = read_dataset(out);
    CHECK(series.price.maxCoeff() == 1.0);
    CHECK(series.meta.normalized);

    SUBCASE("re-running produces identical bytes") {
        const std::string first = slurp(out / "dataset.csv");
        cmd_ingest(cfg, out);
        CHECK(slurp(out / "dataset.csv") == first);
    }
    SUBCASE("a bad column name is reported with the offending name") {
        RunConfig broken = cfg;
        broken.data.columns.wind = "wind_speed";
        CHECK_THROWS_WITH_AS(cmd_ingest(broken, out), doctest::Contains("wind_speed"),
                             DataError);
    }
    SUBCASE("commands demand an ingested dataset") {
        CHECK_THROWS_WITH_AS(cmd_train(cfg, tmp_dir("cmd_empty")),
                             doctest::Contains("ingest"), DataError);
    }
}

TEST_CASE("cmd_train on the toy instance") {
    const auto dir = tmp_dir("cmd_train");
    const RunConfig cfg = load_config(write_toy_tree(dir));
    const auto out = dir / "out";
    cmd_ingest(cfg, out);
    const TrainSummary s = cmd_train(cfg, out);

    SUBCASE("agt_num snapshots land on disk") {
        CHECK(s.save_count == 2);
        REQUIRE(s.saved_agents.size() == 2);
        CHECK(std::filesystem::exists(s.saved_agents[0]));
        CHECK(std::filesystem::exists(s.saved_agents[1]));
        CHECK(std::filesystem::exists(s.agent_path));
        CHECK(std::filesystem::exists(out / "train_log.csv"));
    }
    SUBCASE("repeat training is byte-identical") {
        const std::string first = slurp(s.agent_path);
        cmd_train(cfg, out);
        CHECK(slurp(s.agent_path) == first);
    }
    SUBCASE("evaluate writes a trace of the test window length") {
        const EvaluateSummary e = cmd_evaluate(cfg, out);
        std::ifstream in(e.trace_path);
        std::string line;
        int rows = -1;  // header
        while (std::getline(in, line))
            if (!line.empty()) ++rows;
        CHECK(rows == 24);
    }
}

TEST_CASE("cmd_solve") {
    const auto out = tmp_dir("cmd_solve");
    RunConfig cfg = packaged_config();
    cmd_ingest(cfg, out);

    SUBCASE("deterministic plan covers the test window") {
        const SolveSummary s = cmd_solve(cfg, out, SolveMode::Deterministic);
        std::ifstream in(s.outputs.front());
        std::string line;
        int rows = -1;
        while (std::getline(in, line))
            if (!line.empty()) ++rows;
        CHECK(rows == 48);
    }
    SUBCASE("stochastic with a single scenario equals deterministic actions") {
        cfg.solver.ns = 1;
        cfg.solver.train_window = cfg.compare.test_window;  // only one anchored window
        const SolveSummary stoch = cmd_solve(cfg, out, SolveMode::Stochastic);
        const SolveSummary det = cmd_solve(cfg, out, SolveMode::Deterministic);
        auto actions = [](const std::filesystem::path& p) {
            std::ifstream in(p);
            std::string line;
            std::getline(in, line);
            std::vector<std::string> out;
            while (std::getline(in, line)) {
                const auto a = line.find(',', line.find(',') + 1);
                out.push_back(line.substr(a + 1, line.find(',', a + 1) - a - 1));
            }
            return out;
        };
        CHECK(actions(stoch.outputs.front()) == actions(det.outputs.front()));
        CHECK(stoch.cost == det.cost);
    }
    SUBCASE("wait-and-see writes one plan per scenario plus a summary") {
        cfg.solver.ns = 4;
        const SolveSummary s = cmd_solve(cfg, out, SolveMode::WaitAndSee);
        CHECK(s.outputs.size() == 5);
    }
    SUBCASE("convergence table has one row per scenario count") {
        cfg.solver.convergence_ns_max = 5;
        const SolveSummary s = cmd_solve(cfg, out, SolveMode::Convergence);
        std::ifstream in(s.outputs.front());
        std::string line;
        int rows = -1;
        while (std::getline(in, line))
            if (!line.empty()) ++rows;
        CHECK(rows == 5);
    }
    SUBCASE("LP export goes alongside the plan") {
        const SolveSummary s =
            cmd_solve(cfg, out, SolveMode::Deterministic, out / "model.lp");
        CHECK(s.outputs.size() == 2);
        CHECK(slurp(out / "model.lp").find("Binaries") != std::string::npos);
    }
    SUBCASE("unknown mode tag") {
        CHECK_THROWS_AS(solve_mode_from_string("exhaustive"), ConfigError);
    }
}

TEST_CASE("cmd_compare on the toy: benchmarks agree in the degenerate setup") {
    const auto dir = tmp_dir("cmd_degenerate");
    RunConfig cfg = load_config(write_toy_tree(dir));
    const auto out = dir / "out";
    cmd_ingest(cfg, out);
    cmd_train(cfg, out);

    // One anchored window inside the test range itself: the only scenario is
    // the realized path, so all three benchmark numbers coincide.
    cfg.solver.ns = 1;
    cfg.solver.train_window = cfg.compare.test_window;
    const CompareReport r = cmd_compare(cfg, out);
    CHECK(r.deterministic_cost == r.stochastic_expected_cost);
    CHECK(r.deterministic_cost == r.stochastic_realized_cost);
    CHECK(r.deterministic_profit >= r.agent_profit - 1e-9);
}

TEST_CASE("cmd_compare emits traces that re-simulate") {
    const auto dir = tmp_dir("cmd_resim");
    RunConfig cfg = load_config(write_toy_tree(dir));
    const auto out = dir / "out";
    cmd_ingest(cfg, out);
    cmd_train(cfg, out);
    const CompareReport r = cmd_compare(cfg, out);

    const MarketSeries series = read_dataset(out);
    const BatterySpec battery = battery_in_series_units(cfg.battery, series.meta);
    const ScenarioPath path =
        slice_window(series, cfg.compare.test_window.start, cfg.compare.test_window.len);
    for (const auto& trace_path : {out / "trace_deterministic.csv", out / "trace_agent.csv",
                                   out / "trace_stochastic.csv"}) {
        std::ifstream in(trace_path);
        std::string line;
        std::getline(in, line);
        std::vector<Action> actions;
        std::vector<double> costs, socs;
        while (std::getline(in, line)) {
            std::vector<std::string> f;
            std::string field;
            for (char c : line) {
                if (c == ',') {
                    f.push_back(field);
                    field.clear();
                } else {
                    field += c;
                }
            }
            f.push_back(field);
            actions.push_back(action_from_level(parse_double(f[3], "action")));
            costs.push_back(parse_double(f[5], "cost"));
            socs.push_back(parse_double(f[7], "soc"));
        }
        const double soc0 = cfg.soc0_pct / 100.0 * battery.capacity_mwh;
        const Plan plan = simulate_actions(path, battery, soc0, actions);
        for (std::size_t t = 0; t < actions.size(); ++t) {
            CHECK(std::abs(plan.per_step_cost[static_cast<Eigen::Index>(t)] - costs[t]) < 1e-9);
            CHECK(std::abs(plan.soc_trace_mwh[static_cast<Eigen::Index>(t) + 1] /
                               battery.capacity_mwh * 100.0 -
                           socs[t]) < 1e-9);
        }
    }
    CHECK(std::filesystem::exists(r.report_path));
    CHECK(std::filesystem::exists(out / "compare_soc.csv"));
    CHECK(std::filesystem::exists(out / "compare_actions_rewards.csv"));
}

TEST_CASE("cmd_compare rejects an agent trained on a different battery") {
    const auto dir = tmp_dir("cmd_mismatch");
    RunConfig cfg = load_config(write_toy_tree(dir));
    const auto out = dir / "out";
    cmd_ingest(cfg, out);
    cmd_train(cfg, out);
    cfg.battery.capacity_mwh = 80.0;
    CHECK_THROWS_AS(cmd_compare(cfg, out), ConfigError);
}

TEST_CASE("the packaged pretrained agent reproduces the published trace shape") {
    const auto out = tmp_dir("cmd_packaged_agent");
    RunConfig cfg = packaged_config();
    cmd_ingest(cfg, out);
    const MarketSeries series = read_dataset(out);
    const AgentArtifact agent = load_agent(repo_root() / "data" / "agent_packaged.json");
    const ScenarioPath test =
        slice_window(series, cfg.compare.test_window.start, cfg.compare.test_window.len);
    const BatterySpec battery = battery_in_series_units(cfg.battery, series.meta);
    REQUIRE(agent.battery == battery);
    const EpisodeTrace trace =
        greedy_rollout(agent, test, cfg.soc0_pct / 100.0 * battery.capacity_mwh);
    REQUIRE(trace.steps.size() == 48);

    // early-hours selling dips below the 10% starting level
    double min_early = 100.0;
    for (int t = 0; t < 6; ++t) min_early = std::min(min_early, trace.steps[t].soc_pct);
    CHECK(min_early < 10.0);
    // recharged toward the second-day price ramp, peaking before the evening
    int argmax_day2 = 24;
    for (int t = 24; t < 48; ++t)
        if (trace.steps[t].soc_pct > trace.steps[argmax_day2].soc_pct) argmax_day2 = t;
    CHECK(argmax_day2 >= 24);
    CHECK(argmax_day2 <= 36);
    // drained to nearly empty by the end of the horizon
    CHECK(trace.steps[47].soc_pct < 2.0);
}

TEST_CASE("seed override rewires every embedded seed") {
    RunConfig cfg = packaged_config();
    override_seed(cfg, 33);
    CHECK(cfg.hyperparams.seed == 33);
    CHECK(cfg.solver.scenario_seed == 33);
}
