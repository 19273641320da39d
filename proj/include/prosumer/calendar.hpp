#pragma once

#include <cstdint>
#include <string>

namespace prosumer {

// One point in civil time as written in the input file, plus the UTC epoch
// derived from it. Market observations key off the civil fields (local
// trading hours); spacing checks use the epoch.
struct Timestamp {
    int year = 1970;
    int month = 1;  // 1-12
    int day = 1;    // 1-31
    int hour = 0;
    int minute = 0;
    int second = 0;
    int offset_minutes = 0;  // civil = UTC + offset
    std::int64_t epoch_seconds = 0;

    friend bool operator==(const Timestamp& a, const Timestamp& b) {
        return a.epoch_seconds == b.epoch_seconds;
    }
};

struct CalendarFeatures {
    int day_of_year;  // 0-365 (365 only in leap years)
    int hour_of_day;  // 0-23, interval start
};

bool is_leap_year(int year);

// Days since 1970-01-01 for a civil date (proleptic Gregorian).
std::int64_t days_from_civil(int year, int month, int day);

// Parses an RFC-3339 timestamp: 2019-01-01T00:00:00Z, ...T00:00:00+01:00,
// or without an offset (treated as UTC). Throws DataError on malformed input.
Timestamp parse_timestamp(const std::string& text);

// Canonical RFC-3339 rendering ("Z" for zero offset).
std::string format_timestamp(const Timestamp& ts);

CalendarFeatures calendar_features(const Timestamp& ts);

Timestamp add_hours(const Timestamp& ts, double hours);

}  // namespace prosumer
