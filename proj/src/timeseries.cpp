#include "prosumer/timeseries.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "prosumer/errors.hpp"
#include "prosumer/io.hpp"
#include "prosumer/rng.hpp"

namespace prosumer {

double parse_double(std::string_view text, const std::string& context) {
    double value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size())
        throw DataError("cannot parse number '" + std::string(text) + "' (" + context + ")");
    return value;
}

long parse_long(std::string_view text, const std::string& context) {
    long value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size())
        throw DataError("cannot parse integer '" + std::string(text) + "' (" + context + ")");
    return value;
}

void atomic_write_file(const std::filesystem::path& path, const std::string& content) {
    namespace fs = std::filesystem;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot open " + tmp.string() + " for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw DataError("short write to " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

SamplingMethod sampling_method_from_string(const std::string& tag) {
    if (tag == "historical-windows") return SamplingMethod::HistoricalWindows;
    throw ConfigError("unknown scenario sampling method '" + tag + "'");
}

std::string to_string(SamplingMethod method) {
    switch (method) {
        case SamplingMethod::HistoricalWindows: return "historical-windows";
    }
    return "?";
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(field);
            field.clear();
        } else if (c != '\r') {
            field += c;
        }
    }
    fields.push_back(field);
    for (auto& f : fields) {
        auto b = f.find_first_not_of(" \t");
        auto e = f.find_last_not_of(" \t");
        f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
    }
    return fields;
}

std::size_t find_column(const std::vector<std::string>& header, const std::string& name,
                        const std::filesystem::path& path) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
        throw DataError("missing column '" + name + "' in " + path.string());
    return static_cast<std::size_t>(it - header.begin());
}

}  // namespace

MarketSeries load_series(const std::filesystem::path& path, const ColumnMap& columns,
                         double step_hours, double prosumer_scale) {
    if (step_hours <= 0) throw ConfigError("step_hours must be > 0");
    if (prosumer_scale <= 0) throw ConfigError("prosumer_scale must be > 0");
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());

    std::string line;
    if (!std::getline(in, line)) throw DataError(path.string() + " is empty");
    const auto header = split_csv_line(line);
    const std::size_t c_ts = find_column(header, columns.timestamp, path);
    const std::size_t c_price = find_column(header, columns.price, path);
    const std::size_t c_demand = find_column(header, columns.demand, path);
    const std::size_t c_wind = find_column(header, columns.wind, path);
    const std::size_t c_solar = find_column(header, columns.solar, path);

    MarketSeries series;
    series.meta.step_hours = step_hours;
    std::vector<double> price, demand, wind, solar;

    const std::int64_t step_seconds = static_cast<std::int64_t>(std::llround(step_hours * 3600));
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto fields = split_csv_line(line);
        if (fields.size() < header.size())
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(header.size()) + " fields, got " +
                            std::to_string(fields.size()));
        auto cell = [&](std::size_t col) -> const std::string& { return fields[col]; };
        auto num = [&](std::size_t col, const std::string& name) {
            return parse_double(cell(col), path.string() + ":" + std::to_string(line_no) +
                                               " column '" + name + "'");
        };
        Timestamp ts;
        try {
            ts = parse_timestamp(cell(c_ts));
        } catch (const DataError& e) {
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
        if (!series.timestamps.empty()) {
            const std::int64_t gap = ts.epoch_seconds - series.timestamps.back().epoch_seconds;
            if (gap <= 0)
                throw DataError(path.string() + ":" + std::to_string(line_no) +
                                ": timestamps must be strictly increasing");
            if (gap != step_seconds)
                throw DataError(path.string() + ":" + std::to_string(line_no) +
                                ": timestamp spacing " + std::to_string(gap) +
                                " s, expected uniform " + std::to_string(step_seconds) + " s");
        }
        series.timestamps.push_back(ts);
        price.push_back(num(c_price, columns.price));
        for (auto [col, name, dest] : {std::tuple{c_demand, &columns.demand, &demand},
                                       std::tuple{c_wind, &columns.wind, &wind},
                                       std::tuple{c_solar, &columns.solar, &solar}}) {
            double v = num(col, *name);
            if (v < 0)
                throw DataError(path.string() + ":" + std::to_string(line_no) + ": column '" +
                                *name + "' is negative (" + fmt_double(v) + ")");
            dest->push_back(v * prosumer_scale);
        }
    }
    if (series.timestamps.empty()) throw DataError(path.string() + " has no data rows");

    const auto n = static_cast<Eigen::Index>(price.size());
    series.price = Eigen::Map<Eigen::ArrayXd>(price.data(), n);
    series.demand = Eigen::Map<Eigen::ArrayXd>(demand.data(), n);
    series.wind = Eigen::Map<Eigen::ArrayXd>(wind.data(), n);
    series.solar = Eigen::Map<Eigen::ArrayXd>(solar.data(), n);
    return series;
}

MarketSeries normalize(const MarketSeries& series, double power_base_mw) {
    if (power_base_mw <= 0) throw ConfigError("power_base_mw must be > 0");
    if (series.meta.normalized) throw DataError("series is already normalized");
    const double price_base = series.price.maxCoeff();
    if (price_base <= 0)
        throw DataError("price_base undefined: price column has no positive entries");
    MarketSeries out = series;
    out.price /= price_base;
    out.demand /= power_base_mw;
    out.wind /= power_base_mw;
    out.solar /= power_base_mw;
    out.meta.power_base_mw = power_base_mw;
    out.meta.price_base = price_base;
    out.meta.normalized = true;
    return out;
}

ScenarioPath slice_window(const MarketSeries& series, Eigen::Index start, Eigen::Index len) {
    if (start < 0 || len < 1 || start + len > series.size())
        throw DataError("window [" + std::to_string(start) + ", " + std::to_string(start + len) +
                        ") out of range for series of length " + std::to_string(series.size()));
    ScenarioPath path;
    path.timestamps.assign(series.timestamps.begin() + start,
                           series.timestamps.begin() + start + len);
    path.price = series.price.segment(start, len);
    path.demand = series.demand.segment(start, len);
    path.wind = series.wind.segment(start, len);
    path.solar = series.solar.segment(start, len);
    path.probability = 1.0;
    path.meta = series.meta;
    return path;
}

MarketSeries series_window(const MarketSeries& series, const WindowSpec& window) {
    ScenarioPath p = slice_window(series, window.start, window.len);
    MarketSeries out;
    out.timestamps = std::move(p.timestamps);
    out.price = std::move(p.price);
    out.demand = std::move(p.demand);
    out.wind = std::move(p.wind);
    out.solar = std::move(p.solar);
    out.meta = series.meta;
    return out;
}

ScenarioSet sample_scenarios(const MarketSeries& series, int count, Eigen::Index len,
                             std::uint64_t seed, SamplingMethod method, int anchor_hour) {
    if (count < 1) throw ConfigError("scenario count must be >= 1");
    if (len < 1) throw ConfigError("scenario length must be >= 1");
    if (anchor_hour < 0) anchor_hour = calendar_features(series.timestamps.at(0)).hour_of_day;

    std::vector<Eigen::Index> starts;
    for (Eigen::Index i = 0; i + len <= series.size(); ++i)
        if (calendar_features(series.timestamps[static_cast<std::size_t>(i)]).hour_of_day ==
            anchor_hour)
            starts.push_back(i);
    if (starts.empty())
        throw DataError("series too short: no window of length " + std::to_string(len) +
                        " starts at hour " + std::to_string(anchor_hour));

    ScenarioSet set;
    set.seed = seed;
    set.method = method;
    Rng rng(seed);
    const double tau = 1.0 / count;
    for (int s = 0; s < count; ++s) {
        auto path = slice_window(series, starts[rng.uniform_index(starts.size())], len);
        path.probability = tau;
        set.scenarios.push_back(std::move(path));
    }
    return set;
}

void write_dataset(const std::filesystem::path& dir, const MarketSeries& series) {
    std::ostringstream csv;
    csv << "timestamp,price,demand,wind,solar\n";
    for (Eigen::Index i = 0; i < series.size(); ++i) {
        csv << format_timestamp(series.timestamps[static_cast<std::size_t>(i)]) << ','
            << fmt_double(series.price[i]) << ',' << fmt_double(series.demand[i]) << ','
            << fmt_double(series.wind[i]) << ',' << fmt_double(series.solar[i]) << '\n';
    }
    atomic_write_file(dir / "dataset.csv", csv.str());

    nlohmann::ordered_json meta;
    meta["rows"] = series.size();
    meta["power_base_mw"] = series.meta.power_base_mw;
    meta["price_base"] = series.meta.price_base;
    meta["normalized"] = series.meta.normalized;
    meta["step_hours"] = series.meta.step_hours;
    atomic_write_file(dir / "dataset.meta.json", meta.dump(2) + "\n");
}

MarketSeries read_dataset(const std::filesystem::path& dir) {
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(read_file(dir / "dataset.meta.json"));
    } catch (const nlohmann::json::exception& e) {
        throw CorruptFileError((dir / "dataset.meta.json").string() + ": " + e.what());
    }
    const double step_hours = meta.at("step_hours").get<double>();
    MarketSeries series = load_series(dir / "dataset.csv", ColumnMap{}, step_hours);
    series.meta.power_base_mw = meta.at("power_base_mw").get<double>();
    series.meta.price_base = meta.at("price_base").get<double>();
    series.meta.normalized = meta.at("normalized").get<bool>();
    if (meta.at("rows").get<Eigen::Index>() != series.size())
        throw CorruptFileError((dir / "dataset.csv").string() + ": row count differs from meta");
    return series;
}

double default_reward_scale(const SeriesMeta& meta) {
    if (meta.normalized) return meta.step_hours;
    return meta.price_base * meta.power_base_mw * meta.step_hours;
}

}  // namespace prosumer
