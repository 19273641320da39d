#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <string>
#include <vector>

#include "prosumer/battery.hpp"
#include "prosumer/calendar.hpp"

namespace prosumer {

struct SeriesMeta {
    double power_base_mw = 1.0;
    double price_base = 1.0;
    bool normalized = false;
    double step_hours = 1.0;

    friend bool operator==(const SeriesMeta&, const SeriesMeta&) = default;
};

// Market time series, column-major: price (currency/MWh), demand/wind/solar
// (MW), all divided by their bases once normalized.
struct MarketSeries {
    std::vector<Timestamp> timestamps;
    Eigen::ArrayXd price;
    Eigen::ArrayXd demand;
    Eigen::ArrayXd wind;
    Eigen::ArrayXd solar;
    SeriesMeta meta;

    Eigen::Index size() const { return price.size(); }

    ExoRow row(Eigen::Index i) const { return {price[i], demand[i], wind[i], solar[i]}; }
};

// A window of market rows with a scenario probability.
struct ScenarioPath {
    std::vector<Timestamp> timestamps;
    Eigen::ArrayXd price;
    Eigen::ArrayXd demand;
    Eigen::ArrayXd wind;
    Eigen::ArrayXd solar;
    double probability = 1.0;
    SeriesMeta meta;

    Eigen::Index size() const { return price.size(); }

    ExoRow row(Eigen::Index i) const { return {price[i], demand[i], wind[i], solar[i]}; }
};

struct WindowSpec {
    Eigen::Index start = 0;
    Eigen::Index len = 0;

    friend bool operator==(const WindowSpec&, const WindowSpec&) = default;
};

enum class SamplingMethod { HistoricalWindows };

SamplingMethod sampling_method_from_string(const std::string& tag);
std::string to_string(SamplingMethod method);

struct ScenarioSet {
    std::vector<ScenarioPath> scenarios;
    std::uint64_t seed = 0;
    SamplingMethod method = SamplingMethod::HistoricalWindows;

    std::size_t count() const { return scenarios.size(); }
    Eigen::Index horizon() const { return scenarios.empty() ? 0 : scenarios.front().size(); }
};

// Logical column name -> CSV header name.
struct ColumnMap {
    std::string timestamp = "timestamp";
    std::string price = "price";
    std::string demand = "demand";
    std::string wind = "wind";
    std::string solar = "solar";
};

// Reads a CSV with a header row. Validates: all mapped columns present,
// numeric cells parse, power columns non-negative, timestamps strictly
// increasing with uniform spacing of step_hours. prosumer_scale multiplies
// the power columns on the way in (regional data scaled to one prosumer).
MarketSeries load_series(const std::filesystem::path& path, const ColumnMap& columns,
                         double step_hours = 1.0, double prosumer_scale = 1.0);

// Divides power columns by power_base and the price column by its own
// maximum (recorded as price_base). Rejects a second normalization.
MarketSeries normalize(const MarketSeries& series, double power_base_mw);

ScenarioPath slice_window(const MarketSeries& series, Eigen::Index start, Eigen::Index len);

// Contiguous sub-series (same metadata).
MarketSeries series_window(const MarketSeries& series, const WindowSpec& window);

// Draws `count` windows of length `len`, each with probability 1/count.
// HistoricalWindows draws (with replacement) among windows of the source
// series whose start hour-of-day equals anchor_hour; anchor_hour < 0 means
// "use the hour of the first row". Deterministic given seed.
ScenarioSet sample_scenarios(const MarketSeries& series, int count, Eigen::Index len,
                             std::uint64_t seed, SamplingMethod method,
                             int anchor_hour = -1);

// Normalized-dataset container written by the ingest command:
// <dir>/dataset.csv plus <dir>/dataset.meta.json.
void write_dataset(const std::filesystem::path& dir, const MarketSeries& series);
MarketSeries read_dataset(const std::filesystem::path& dir);

// Battery spec re-expressed in the units of a series: when the series is
// per-unit, rated power and capacity are divided by the power base so the
// power balance stays consistent. SOC percentages are unaffected.
inline BatterySpec battery_in_series_units(BatterySpec spec, const SeriesMeta& meta) {
    if (meta.normalized) {
        spec.rated_power_mw /= meta.power_base_mw;
        spec.capacity_mwh /= meta.power_base_mw;
    }
    spec.step_hours = meta.step_hours;
    return spec;
}

// Default reward scale for transition(): price_base * power_base * step_hours
// against raw-unit costs, which makes per-step rewards O(1). A normalized
// series already carries both bases in its costs, so its scale reduces to
// step_hours.
double default_reward_scale(const SeriesMeta& meta);

}  // namespace prosumer
