#include "prosumer/qlearn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "json.hpp"
#include "prosumer/errors.hpp"
#include "prosumer/io.hpp"
#include "prosumer/rng.hpp"

namespace prosumer {

DayFeature day_feature_from_string(const std::string& tag) {
    if (tag == "day-of-year") return DayFeature::DayOfYear;
    if (tag == "month") return DayFeature::Month;
    if (tag == "none") return DayFeature::None;
    throw ConfigError("unknown day_feature '" + tag + "'");
}

HourFeature hour_feature_from_string(const std::string& tag) {
    if (tag == "hour") return HourFeature::Hour;
    if (tag == "none") return HourFeature::None;
    throw ConfigError("unknown hour_feature '" + tag + "'");
}

std::string to_string(DayFeature f) {
    switch (f) {
        case DayFeature::DayOfYear: return "day-of-year";
        case DayFeature::Month: return "month";
        case DayFeature::None: return "none";
    }
    return "?";
}

std::string to_string(HourFeature f) {
    return f == HourFeature::Hour ? "hour" : "none";
}

void Discretizer::validate() const {
    if (soc_bin_pct <= 0) throw ConfigError("soc_bin_pct must be > 0");
    if (soc_bin_pct < 0.025)
        throw ConfigError("soc_bin_pct below 0.025 overflows the observation key");
    if (signal_bins < 1 || signal_bins > 256)
        throw ConfigError("signal_bins must be in [1, 256]");
}

void Hyperparams::validate() const {
    if (!(alpha > 0 && alpha <= 1)) throw ConfigError("alpha must be in (0, 1]");
    if (!(gamma >= 0 && gamma <= 1)) throw ConfigError("gamma must be in [0, 1]");
    if (itr_lim < 1) throw ConfigError("itr_lim must be >= 1");
    if (rew_eps < 0) throw ConfigError("rew_eps must be >= 0");
    if (agt_num < 1) throw ConfigError("agt_num must be >= 1");
    if (penalty >= 0) throw ConfigError("penalty must be negative");
    if (episodes_per_round < 1) throw ConfigError("episodes_per_round must be >= 1");
    if (max_steps < 1) throw ConfigError("max_steps must be >= 1");
    if (!(epsilon >= 0 && epsilon <= 1)) throw ConfigError("epsilon must be in [0, 1]");
    if (episode_steps < 0) throw ConfigError("episode_steps must be >= 0");
}

double QTable::max_value(const ObservationKey& key, const FeasibleMask& mask) const {
    auto it = rows_.find(key);
    double best = -std::numeric_limits<double>::infinity();
    for (Action a : kAllActions) {
        if (!mask[action_index(a)]) continue;
        const double v = it == rows_.end() ? 0.0 : it->second[action_index(a)];
        if (v > best) best = v;
    }
    return best;
}

void QTable::set(const ObservationKey& key, Action a, double value) {
    if (!std::isfinite(value)) throw InternalError("non-finite Q value");
    auto [it, inserted] = rows_.try_emplace(key, Row::Zero());
    it->second[action_index(a)] = value;
}

bool QTable::all_finite() const {
    for (const auto& [key, row] : rows_)
        if (!row.isFinite().all()) return false;
    return true;
}

std::vector<ObservationKey> QTable::sorted_keys() const {
    std::vector<ObservationKey> keys;
    keys.reserve(rows_.size());
    for (const auto& [key, row] : rows_) keys.push_back(key);
    std::sort(keys.begin(), keys.end());
    return keys;
}

bool operator==(const QTable& a, const QTable& b) {
    if (a.rows_.size() != b.rows_.size()) return false;
    for (const auto& [key, row] : a.rows_) {
        auto it = b.rows_.find(key);
        if (it == b.rows_.end() || (row != it->second).any()) return false;
    }
    return true;
}

bool operator==(const AgentArtifact& a, const AgentArtifact& b) {
    return a.format_version == b.format_version && a.battery == b.battery &&
           a.discretizer == b.discretizer && a.hyperparams == b.hyperparams &&
           a.training_window == b.training_window &&
           a.best_eval_reward == b.best_eval_reward && a.reward_scale == b.reward_scale &&
           a.qtable == b.qtable;
}

namespace {

std::int16_t signal_bin(double value, int bins, const char* name) {
    if (value < -1e-9 || value > 1.0 + 1e-9)
        throw DataError(std::string(name) + " value " + fmt_double(value) +
                        " is not per-unit; normalize the series first");
    const int bin = static_cast<int>(std::floor(value * bins));
    return static_cast<std::int16_t>(std::clamp(bin, 0, bins - 1));
}

}  // namespace

ObservationKey discretize(const ProsumerState& state, const Timestamp& ts, const ExoRow& exo,
                          const Discretizer& disc, const BatterySpec& spec) {
    const CalendarFeatures cal = calendar_features(ts);
    ObservationKey key;
    switch (disc.day_feature) {
        case DayFeature::DayOfYear: key.day = static_cast<std::int16_t>(cal.day_of_year); break;
        case DayFeature::Month: key.day = static_cast<std::int16_t>(ts.month - 1); break;
        case DayFeature::None: break;
    }
    if (disc.hour_feature == HourFeature::Hour)
        key.hour = static_cast<std::int16_t>(cal.hour_of_day);
    const double soc_pct = state.soc_pct(spec);
    const int max_soc_bin = disc.soc_bin_count() - 1;
    key.soc = static_cast<std::int16_t>(
        std::clamp(static_cast<int>(std::floor(soc_pct / disc.soc_bin_pct)), 0, max_soc_bin));
    key.solar = signal_bin(exo.solar, disc.signal_bins, "solar");
    key.wind = signal_bin(exo.wind, disc.signal_bins, "wind");
    key.price = signal_bin(exo.price, disc.signal_bins, "price");
    key.demand = signal_bin(exo.demand, disc.signal_bins, "demand");
    return key;
}

namespace {

// Greedy action: argmax of q over feasible actions, ties resolved by the
// module-wide preference order (an all-zero table rolls out as all-idle).
Action greedy_action(const QTable& qtable, const ObservationKey& obs, const FeasibleMask& mask) {
    Action best = Action::Idle;
    double best_value = -std::numeric_limits<double>::infinity();
    for (Action a : kActionPreference) {
        if (!mask[action_index(a)]) continue;
        const double v = qtable.value(obs, a);
        if (v > best_value) {
            best_value = v;
            best = a;
        }
    }
    return best;
}

EpisodeTrace rollout_greedy(const QTable& qtable, const Discretizer& disc,
                            const BatterySpec& spec, const ScenarioPath& path, double soc0_mwh,
                            double reward_scale) {
    EpisodeTrace trace;
    const Eigen::Index horizon = path.size();
    trace.steps.reserve(static_cast<std::size_t>(horizon));
    ProsumerState state{0, soc0_mwh};
    for (Eigen::Index t = 0; t < horizon; ++t) {
        const auto& ts = path.timestamps[static_cast<std::size_t>(t)];
        const ExoRow exo = path.row(t);
        const ObservationKey obs = discretize(state, ts, exo, disc, spec);
        const Action a = greedy_action(qtable, obs, feasible_actions(state, spec));
        const StepOutcome out = transition(state, a, exo, spec, reward_scale);
        trace.steps.push_back({static_cast<int>(t), ts, obs, true, action_level(a),
                               out.grid_power_mw, out.cost, out.reward,
                               out.next_state.soc_pct(spec)});
        trace.total_cost += out.cost;
        trace.total_reward += out.reward;
        state = out.next_state;
    }
    return trace;
}

}  // namespace

TrainResult train_agent(const MarketSeries& series, const WindowSpec& window,
                        const BatterySpec& spec, const Discretizer& disc, const Hyperparams& hp,
                        double soc0_mwh, double reward_scale, const SaveCallback& on_save) {
    spec.validate();
    disc.validate();
    hp.validate();
    if (!series.meta.normalized)
        throw DataError("training requires a normalized series (per-unit signals)");
    if (!energy_within_bounds(soc0_mwh, spec))
        throw ConfigError("training soc0 is outside the storage bounds");
    const ScenarioPath path = slice_window(series, window.start, window.len);
    const Eigen::Index horizon = path.size();

    // The penalty must undercut every reward the window can produce,
    // otherwise the all-infeasible branch would look attractive.
    for (Eigen::Index t = 0; t < horizon; ++t)
        for (Action a : kAllActions) {
            const auto [pc, pd] = decode_action(a, spec);
            const double r =
                -step_cost(path.price[t], grid_exchange(path.row(t), pc, pd), spec.step_hours) /
                reward_scale;
            if (hp.penalty >= r)
                throw ConfigError("penalty " + fmt_double(hp.penalty) +
                                  " is not below the least achievable step reward " +
                                  fmt_double(r));
        }

    Rng rng(hp.seed);
    QTable qtable;
    TrainResult result;
    double saved_best = -std::numeric_limits<double>::infinity();
    long steps = 0, episodes = 0;
    int round = 0;

    // day-aligned episode sub-windows (the whole window when episode_steps
    // is 0 or does not fit)
    const Eigen::Index steps_per_day =
        std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::llround(24.0 / spec.step_hours)));
    const Eigen::Index episode_len =
        hp.episode_steps > 0 && hp.episode_steps <= horizon
            ? static_cast<Eigen::Index>(hp.episode_steps)
            : horizon;
    std::vector<Eigen::Index> episode_starts;
    for (Eigen::Index s = 0; s + episode_len <= horizon; s += steps_per_day)
        episode_starts.push_back(s);
    if (episode_starts.empty()) episode_starts.push_back(0);

    auto snapshot = [&](double eval_reward) {
        AgentArtifact agent;
        agent.qtable = qtable;
        agent.discretizer = disc;
        agent.hyperparams = hp;
        agent.battery = spec;
        agent.training_window = window;
        agent.best_eval_reward = eval_reward;
        agent.reward_scale = reward_scale;
        return agent;
    };

    while (result.save_count < hp.agt_num && steps < hp.max_steps) {
        for (int e = 0; e < hp.episodes_per_round && steps < hp.max_steps; ++e) {
            const Eigen::Index base =
                episode_starts[episode_starts.size() == 1
                                   ? 0
                                   : rng.uniform_index(episode_starts.size())];
            ProsumerState state{0, soc0_mwh};
            if (hp.random_soc0)
                state.stored_energy_mwh =
                    rng.uniform(spec.energy_min_mwh(), spec.energy_max_mwh());
            for (Eigen::Index step = 0; step < episode_len && steps < hp.max_steps; ++step) {
                const Eigen::Index t = base + step;
                const ObservationKey obs = discretize(
                    state, path.timestamps[static_cast<std::size_t>(t)], path.row(t), disc, spec);
                const FeasibleMask mask = feasible_actions(state, spec);

                Action chosen;
                bool found;
                if (hp.epsilon > 0.0 && rng.uniform01() >= hp.epsilon) {
                    chosen = greedy_action(qtable, obs, mask);
                    found = true;
                } else {
                    std::array<Action, kActionCount> order = kAllActions;
                    rng.shuffle(order.data(), order.size());
                    chosen = order.back();
                    found = false;
                    for (Action a : order) {
                        if (mask[action_index(a)]) {
                            chosen = a;
                            found = true;
                            break;
                        }
                    }
                }

                double reward;
                ProsumerState next;
                if (found) {
                    const StepOutcome out =
                        transition(state, chosen, path.row(t), spec, reward_scale);
                    reward = out.reward;
                    next = out.next_state;
                } else {
                    reward = hp.penalty;  // hold the state, advance time
                    next = {state.t + 1, state.stored_energy_mwh};
                }

                double max_next = 0.0;
                if (step + 1 < episode_len) {
                    const ObservationKey obs_next =
                        discretize(next, path.timestamps[static_cast<std::size_t>(t) + 1],
                                   path.row(t + 1), disc, spec);
                    max_next = qtable.max_value(obs_next, feasible_actions(next, spec));
                }
                qtable.set(obs, chosen,
                           bellman_update(qtable.value(obs, chosen), reward, max_next, hp.alpha,
                                          hp.gamma));
                state = next;
                ++steps;
            }
            ++episodes;
        }

        // Greedy evaluation on the trained period: mean total reward over
        // the episode sub-windows (one rollout when episodes sweep the whole
        // window). Rollouts are deterministic, so repeats stop as soon as
        // the reward plateaus; itr_lim bounds the loop regardless.
        double best_eval = -std::numeric_limits<double>::infinity();
        for (int it = 0; it < hp.itr_lim; ++it) {
            double total = 0.0;
            for (Eigen::Index s : episode_starts) {
                ScenarioPath sub;
                sub.timestamps.assign(path.timestamps.begin() + s,
                                      path.timestamps.begin() + s + episode_len);
                sub.price = path.price.segment(s, episode_len);
                sub.demand = path.demand.segment(s, episode_len);
                sub.wind = path.wind.segment(s, episode_len);
                sub.solar = path.solar.segment(s, episode_len);
                sub.probability = 1.0;
                sub.meta = path.meta;
                total +=
                    rollout_greedy(qtable, disc, spec, sub, soc0_mwh, reward_scale).total_reward;
            }
            const double eval = total / static_cast<double>(episode_starts.size());
            if (eval > best_eval)
                best_eval = eval;
            else
                break;
        }

        const bool save = best_eval >= saved_best + hp.rew_eps;
        result.log.push_back({round, episodes, steps, best_eval, save});
        if (save) {
            saved_best = best_eval;
            AgentArtifact agent = snapshot(best_eval);
            if (on_save) on_save(agent, result.save_count);
            result.agent = std::move(agent);
            ++result.save_count;
        }
        ++round;
    }

    if (result.save_count == 0) result.agent = snapshot(saved_best);
    if (!result.agent.qtable.all_finite()) throw InternalError("trained Q table is not finite");
    return result;
}

EpisodeTrace greedy_rollout(const AgentArtifact& agent, const ScenarioPath& path,
                            double soc0_mwh) {
    if (agent.format_version != kAgentFormatVersion)
        throw VersionError(agent.format_version, kAgentFormatVersion, "<agent artifact>");
    if (!path.meta.normalized)
        throw DataError("greedy rollout requires a normalized path (per-unit signals)");
    if (path.size() < 1) throw ConfigError("rollout path is empty");
    if (!energy_within_bounds(soc0_mwh, agent.battery))
        throw ConfigError("rollout soc0 is outside the storage bounds");
    return rollout_greedy(agent.qtable, agent.discretizer, agent.battery, path, soc0_mwh,
                          agent.reward_scale);
}

// ---- persistence ----------------------------------------------------------

namespace {

nlohmann::ordered_json battery_to_json(const BatterySpec& spec) {
    return {{"rated_power_mw", spec.rated_power_mw}, {"capacity_mwh", spec.capacity_mwh},
            {"soc_min", spec.soc_min},               {"soc_max", spec.soc_max},
            {"charge_eff", spec.charge_eff},         {"discharge_eff", spec.discharge_eff},
            {"availability", spec.availability},     {"step_hours", spec.step_hours}};
}

BatterySpec battery_from_json(const nlohmann::json& j) {
    BatterySpec spec;
    spec.rated_power_mw = j.at("rated_power_mw").get<double>();
    spec.capacity_mwh = j.at("capacity_mwh").get<double>();
    spec.soc_min = j.at("soc_min").get<double>();
    spec.soc_max = j.at("soc_max").get<double>();
    spec.charge_eff = j.at("charge_eff").get<double>();
    spec.discharge_eff = j.at("discharge_eff").get<double>();
    spec.availability = j.at("availability").get<int>();
    spec.step_hours = j.at("step_hours").get<double>();
    return spec;
}

}  // namespace

void save_agent(const AgentArtifact& agent, const std::filesystem::path& path) {
    if (!agent.qtable.all_finite()) throw InternalError("refusing to save non-finite Q table");
    nlohmann::ordered_json payload;
    payload["battery"] = battery_to_json(agent.battery);
    payload["discretizer"] = {{"soc_bin_pct", agent.discretizer.soc_bin_pct},
                              {"signal_bins", agent.discretizer.signal_bins},
                              {"day_feature", to_string(agent.discretizer.day_feature)},
                              {"hour_feature", to_string(agent.discretizer.hour_feature)}};
    payload["hyperparams"] = {{"alpha", agent.hyperparams.alpha},
                              {"gamma", agent.hyperparams.gamma},
                              {"itr_lim", agent.hyperparams.itr_lim},
                              {"rew_eps", agent.hyperparams.rew_eps},
                              {"agt_num", agent.hyperparams.agt_num},
                              {"penalty", agent.hyperparams.penalty},
                              {"episodes_per_round", agent.hyperparams.episodes_per_round},
                              {"seed", agent.hyperparams.seed},
                              {"max_steps", agent.hyperparams.max_steps},
                              {"epsilon", agent.hyperparams.epsilon},
                              {"random_soc0", agent.hyperparams.random_soc0},
                              {"episode_steps", agent.hyperparams.episode_steps}};
    payload["training_window"] = {{"start", agent.training_window.start},
                                  {"len", agent.training_window.len}};
    payload["best_eval_reward"] = agent.best_eval_reward;
    payload["reward_scale"] = agent.reward_scale;

    nlohmann::ordered_json entries = nlohmann::ordered_json::array();
    for (const ObservationKey& key : agent.qtable.sorted_keys()) {
        const QTable::Row& row = *agent.qtable.row(key);
        for (Action a : kAllActions)
            entries.push_back({key.day, key.hour, key.soc, key.solar, key.wind, key.price,
                               key.demand, action_level(a), row[action_index(a)]});
    }
    payload["qtable"] = std::move(entries);

    nlohmann::ordered_json doc;
    doc["format_version"] = agent.format_version;
    char checksum[32];
    std::snprintf(checksum, sizeof checksum, "fnv1a64:%016llx",
                  static_cast<unsigned long long>(fnv1a64(payload.dump())));
    doc["checksum"] = checksum;
    doc["payload"] = std::move(payload);
    atomic_write_file(path, doc.dump(1) + "\n");
}

AgentArtifact load_agent(const std::filesystem::path& path) {
    // ordered_json keeps the on-disk key order, which the checksum covers.
    nlohmann::ordered_json doc;
    try {
        doc = nlohmann::ordered_json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw CorruptFileError(path.string() + ": not a valid agent file: " + e.what());
    }
    try {
        const int version = doc.at("format_version").get<int>();
        if (version != kAgentFormatVersion)
            throw VersionError(version, kAgentFormatVersion, path.string());
        const std::string checksum = doc.at("checksum").get<std::string>();
        // Re-serialize through ordered_json so the checksum input matches
        // what save_agent hashed.
        const nlohmann::ordered_json payload = doc.at("payload");
        char expected[32];
        std::snprintf(expected, sizeof expected, "fnv1a64:%016llx",
                      static_cast<unsigned long long>(fnv1a64(payload.dump())));
        if (checksum != expected)
            throw CorruptFileError(path.string() + ": checksum mismatch (file damaged?)");

        AgentArtifact agent;
        agent.format_version = version;
        agent.battery = battery_from_json(payload.at("battery"));
        const auto& d = payload.at("discretizer");
        agent.discretizer.soc_bin_pct = d.at("soc_bin_pct").get<double>();
        agent.discretizer.signal_bins = d.at("signal_bins").get<int>();
        agent.discretizer.day_feature = day_feature_from_string(d.at("day_feature"));
        agent.discretizer.hour_feature = hour_feature_from_string(d.at("hour_feature"));
        const auto& h = payload.at("hyperparams");
        agent.hyperparams.alpha = h.at("alpha").get<double>();
        agent.hyperparams.gamma = h.at("gamma").get<double>();
        agent.hyperparams.itr_lim = h.at("itr_lim").get<int>();
        agent.hyperparams.rew_eps = h.at("rew_eps").get<double>();
        agent.hyperparams.agt_num = h.at("agt_num").get<int>();
        agent.hyperparams.penalty = h.at("penalty").get<double>();
        agent.hyperparams.episodes_per_round = h.at("episodes_per_round").get<int>();
        agent.hyperparams.seed = h.at("seed").get<std::uint64_t>();
        agent.hyperparams.max_steps = h.at("max_steps").get<long>();
        agent.hyperparams.epsilon = h.at("epsilon").get<double>();
        agent.hyperparams.random_soc0 = h.at("random_soc0").get<bool>();
        agent.hyperparams.episode_steps = h.at("episode_steps").get<long>();
        agent.training_window.start = payload.at("training_window").at("start").get<Eigen::Index>();
        agent.training_window.len = payload.at("training_window").at("len").get<Eigen::Index>();
        agent.best_eval_reward = payload.at("best_eval_reward").get<double>();
        agent.reward_scale = payload.at("reward_scale").get<double>();
        for (const auto& entry : payload.at("qtable")) {
            ObservationKey key;
            key.day = entry.at(0).get<std::int16_t>();
            key.hour = entry.at(1).get<std::int16_t>();
            key.soc = entry.at(2).get<std::int16_t>();
            key.solar = entry.at(3).get<std::int16_t>();
            key.wind = entry.at(4).get<std::int16_t>();
            key.price = entry.at(5).get<std::int16_t>();
            key.demand = entry.at(6).get<std::int16_t>();
            agent.qtable.set(key, action_from_level(entry.at(7).get<double>()),
                             entry.at(8).get<double>());
        }
        return agent;
    } catch (const nlohmann::json::exception& e) {
        throw CorruptFileError(path.string() + ": malformed agent file: " + e.what());
    }
}

}  // namespace prosumer
