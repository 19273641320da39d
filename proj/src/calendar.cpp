#include "prosumer/calendar.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>

#include "prosumer/errors.hpp"

namespace prosumer {

bool is_leap_year(int year) {
    return (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
}

// Howard Hinnant's days-from-civil algorithm.
std::int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

namespace {

void civil_from_days(std::int64_t z, int& y, int& m, int& d) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t yy = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
    m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
    y = static_cast<int>(yy + (m <= 2));
}

int parse_int(const std::string& s, std::size_t pos, std::size_t len, const std::string& what) {
    if (pos + len > s.size()) throw DataError("timestamp '" + s + "': truncated " + what);
    int value = 0;
    auto [ptr, ec] = std::from_chars(s.data() + pos, s.data() + pos + len, value);
    if (ec != std::errc() || ptr != s.data() + pos + len)
        throw DataError("timestamp '" + s + "': bad " + what);
    return value;
}

constexpr std::array<int, 12> kDaysInMonth = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};

}  // namespace

Timestamp parse_timestamp(const std::string& text) {
    // YYYY-MM-DD[T ]hh:mm:ss[.frac][Z|±hh:mm]
    Timestamp ts;
    if (text.size() < 19) throw DataError("timestamp '" + text + "': too short");
    ts.year = parse_int(text, 0, 4, "year");
    ts.month = parse_int(text, 5, 2, "month");
    ts.day = parse_int(text, 8, 2, "day");
    ts.hour = parse_int(text, 11, 2, "hour");
    ts.minute = parse_int(text, 14, 2, "minute");
    ts.second = parse_int(text, 17, 2, "second");
    if (text[4] != '-' || text[7] != '-' || (text[10] != 'T' && text[10] != ' ') ||
        text[13] != ':' || text[16] != ':')
        throw DataError("timestamp '" + text + "': bad separators");
    if (ts.month < 1 || ts.month > 12) throw DataError("timestamp '" + text + "': month out of range");
    int dim = kDaysInMonth[ts.month - 1] + (ts.month == 2 && is_leap_year(ts.year) ? 1 : 0);
    if (ts.day < 1 || ts.day > dim) throw DataError("timestamp '" + text + "': day out of range");
    if (ts.hour > 23 || ts.minute > 59 || ts.second > 60)
        throw DataError("timestamp '" + text + "': time out of range");

    std::size_t pos = 19;
    if (pos < text.size() && text[pos] == '.') {  // fractional seconds ignored
        ++pos;
        while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
    }
    if (pos < text.size()) {
        char c = text[pos];
        if (c == 'Z' || c == 'z') {
            ++pos;
        } else if (c == '+' || c == '-') {
            int oh = parse_int(text, pos + 1, 2, "offset hour");
            if (pos + 3 >= text.size() || text[pos + 3] != ':')
                throw DataError("timestamp '" + text + "': bad offset");
            int om = parse_int(text, pos + 4, 2, "offset minute");
            ts.offset_minutes = (oh * 60 + om) * (c == '+' ? 1 : -1);
            pos += 6;
        }
        if (pos != text.size()) throw DataError("timestamp '" + text + "': trailing characters");
    }

    ts.epoch_seconds = days_from_civil(ts.year, ts.month, ts.day) * 86400 + ts.hour * 3600 +
                       ts.minute * 60 + ts.second - ts.offset_minutes * 60;
    return ts;
}

std::string format_timestamp(const Timestamp& ts) {
    char buf[40];
    if (ts.offset_minutes == 0) {
        std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02dZ", ts.year, ts.month, ts.day,
                      ts.hour, ts.minute, ts.second);
    } else {
        int om = ts.offset_minutes;
        char sign = om < 0 ? '-' : '+';
        if (om < 0) om = -om;
        std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d%c%02d:%02d", ts.year,
                      ts.month, ts.day, ts.hour, ts.minute, ts.second, sign, om / 60, om % 60);
    }
    return buf;
}

CalendarFeatures calendar_features(const Timestamp& ts) {
    std::int64_t doy =
        days_from_civil(ts.year, ts.month, ts.day) - days_from_civil(ts.year, 1, 1);
    return {static_cast<int>(doy), ts.hour};
}

Timestamp add_hours(const Timestamp& ts, double hours) {
    std::int64_t delta = static_cast<std::int64_t>(std::llround(hours * 3600.0));
    std::int64_t civil = ts.epoch_seconds + ts.offset_minutes * 60 + delta;
    std::int64_t days = civil >= 0 ? civil / 86400 : (civil - 86399) / 86400;
    std::int64_t sod = civil - days * 86400;
    Timestamp out;
    civil_from_days(days, out.year, out.month, out.day);
    out.hour = static_cast<int>(sod / 3600);
    out.minute = static_cast<int>((sod % 3600) / 60);
    out.second = static_cast<int>(sod % 60);
    out.offset_minutes = ts.offset_minutes;
    out.epoch_seconds = ts.epoch_seconds + delta;
    return out;
}

}  // namespace prosumer
