#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <unordered_map>
#include <vector>

#include "prosumer/battery.hpp"
#include "prosumer/bench.hpp"
#include "prosumer/calendar.hpp"
#include "prosumer/timeseries.hpp"

namespace prosumer {

inline constexpr int kAgentFormatVersion = 1;

enum class DayFeature { DayOfYear, Month, None };
enum class HourFeature { Hour, None };

DayFeature day_feature_from_string(const std::string& tag);
HourFeature hour_feature_from_string(const std::string& tag);
std::string to_string(DayFeature f);
std::string to_string(HourFeature f);

// Maps the continuous observation (calendar, SOC, per-unit signals) onto
// small integer bins. Signals must be per-unit in [0, 1]; a value of
// exactly 1 lands in the top bin.
struct Discretizer {
    double soc_bin_pct = 5.0;
    int signal_bins = 10;
    DayFeature day_feature = DayFeature::Month;
    HourFeature hour_feature = HourFeature::Hour;

    void validate() const;
    int soc_bin_count() const { return static_cast<int>(100.0 / soc_bin_pct) + 1; }

    friend bool operator==(const Discretizer&, const Discretizer&) = default;
};

struct ObservationKey {
    std::int16_t day = 0;
    std::int16_t hour = 0;
    std::int16_t soc = 0;
    std::int16_t solar = 0;
    std::int16_t wind = 0;
    std::int16_t price = 0;
    std::int16_t demand = 0;

    std::uint64_t packed() const {
        auto u = [](std::int16_t v) { return static_cast<std::uint64_t>(v); };
        return u(day) | u(hour) << 9 | u(soc) << 14 | u(solar) << 26 | u(wind) << 34 |
               u(price) << 42 | u(demand) << 50;
    }

    friend bool operator==(const ObservationKey&, const ObservationKey&) = default;
    friend auto operator<=>(const ObservationKey&, const ObservationKey&) = default;
};

struct ObservationKeyHash {
    std::size_t operator()(const ObservationKey& k) const {
        std::uint64_t x = k.packed() + 0x9e3779b97f4a7c15ull;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
        return static_cast<std::size_t>(x ^ (x >> 31));
    }
};

// Sparse observation -> 5 action values; untouched entries read as 0.
class QTable {
public:
    using Row = Eigen::Array<double, kActionCount, 1>;

    double value(const ObservationKey& key, Action a) const {
        auto it = rows_.find(key);
        return it == rows_.end() ? 0.0 : it->second[action_index(a)];
    }

    // Maximum value over the actions enabled in `mask`.
    double max_value(const ObservationKey& key, const FeasibleMask& mask) const;

    void set(const ObservationKey& key, Action a, double value);

    std::size_t observation_count() const { return rows_.size(); }
    bool all_finite() const;
    std::vector<ObservationKey> sorted_keys() const;
    const Row* row(const ObservationKey& key) const {
        auto it = rows_.find(key);
        return it == rows_.end() ? nullptr : &it->second;
    }

    friend bool operator==(const QTable& a, const QTable& b);

private:
    std::unordered_map<ObservationKey, Row, ObservationKeyHash> rows_;
};

struct Hyperparams {
    double alpha = 0.2;
    double gamma = 0.9;
    int itr_lim = 20;
    double rew_eps = 0.4;
    int agt_num = 20;
    double penalty = -10.0;
    int episodes_per_round = 50;
    std::uint64_t seed = 1;
    long max_steps = 100000;  // global training budget, in environment steps
    // Exploration is a uniform-random draw per step; epsilon > 0 switches to
    // epsilon-greedy (exploit the table with probability 1 - epsilon).
    double epsilon = 0.0;
    // Exploring starts: draw each training episode's initial stored energy
    // uniformly over the storage bounds instead of starting at soc0. The
    // evaluation rollouts always start at soc0.
    bool random_soc0 = false;
    // Episode length in steps; 0 = one sweep of the whole training window.
    // When positive, each episode runs over a sub-window of this length
    // whose start is drawn among day-aligned offsets, and evaluation
    // averages greedy rollouts over all such sub-windows.
    long episode_steps = 0;

    void validate() const;

    friend bool operator==(const Hyperparams&, const Hyperparams&) = default;
};

struct AgentArtifact {
    QTable qtable;
    Discretizer discretizer;
    Hyperparams hyperparams;
    BatterySpec battery;
    WindowSpec training_window;
    double best_eval_reward = 0.0;
    double reward_scale = 1.0;
    int format_version = kAgentFormatVersion;

    friend bool operator==(const AgentArtifact&, const AgentArtifact&);
};

struct TraceStep {
    int t = 0;
    Timestamp timestamp;
    ObservationKey observation;
    bool has_observation = false;  // plan re-simulations carry no observation
    double action_level = 0.0;
    double grid_power = 0.0;
    double cost = 0.0;
    double reward = 0.0;
    double soc_pct = 0.0;  // state of charge after the step
};

struct EpisodeTrace {
    std::vector<TraceStep> steps;
    double total_cost = 0.0;
    double total_reward = 0.0;
};

ObservationKey discretize(const ProsumerState& state, const Timestamp& ts, const ExoRow& exo,
                          const Discretizer& disc, const BatterySpec& spec);

// q <- (1 - alpha) q + alpha (r + gamma max_next)
inline double bellman_update(double q, double reward, double max_next, double alpha,
                             double gamma) {
    return (1.0 - alpha) * q + alpha * (reward + gamma * max_next);
}

struct TrainRound {
    int round = 0;
    long episodes = 0;
    long steps = 0;
    double eval_reward = 0.0;
    bool saved = false;
};

struct TrainResult {
    AgentArtifact agent;
    std::vector<TrainRound> log;
    int save_count = 0;
};

using SaveCallback = std::function<void(const AgentArtifact&, int save_index)>;

// Algorithm: episodes sweep the training window with uniform-random
// exploration (a random untried action per step, redrawn while it violates
// storage bounds; if all five violate, the step earns `penalty` and the
// state is held). Every executed step gets a Bellman update. After each
// round of episodes the greedy policy is evaluated on the window; a result
// exceeding the last saved reward by at least rew_eps snapshots the agent.
// Training stops after agt_num snapshots or when max_steps runs out.
TrainResult train_agent(const MarketSeries& series, const WindowSpec& window,
                        const BatterySpec& spec, const Discretizer& disc, const Hyperparams& hp,
                        double soc0_mwh, double reward_scale,
                        const SaveCallback& on_save = {});

EpisodeTrace greedy_rollout(const AgentArtifact& agent, const ScenarioPath& path,
                            double soc0_mwh);

void save_agent(const AgentArtifact& agent, const std::filesystem::path& path);
AgentArtifact load_agent(const std::filesystem::path& path);

}  // namespace prosumer
