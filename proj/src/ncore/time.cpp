#include "ncore/time.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>

namespace ncore {

std::string format_rfc3339(Timestamp t) {
    std::time_t tt = static_cast<std::time_t>(t);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ", tm.tm_year + 1900,
                  tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec);
    return buf;
}

namespace {

bool parse_int(std::string_view s, size_t pos, size_t len, int& out) {
    if (pos + len > s.size()) return false;
    int v = 0;
    for (size_t i = pos; i < pos + len; ++i) {
        if (s[i] < '0' || s[i] > '9') return false;
        v = v * 10 + (s[i] - '0');
    }
    out = v;
    return true;
}

std::optional<Timestamp> from_fields(int year, int mon, int day, int hour, int min, int sec) {
    if (mon < 1 || mon > 12 || day < 1 || day > 31) return std::nullopt;
    if (hour > 23 || min > 59 || sec > 60) return std::nullopt;
    std::tm tm{};
    tm.tm_year = year - 1900;
    tm.tm_mon = mon - 1;
    tm.tm_mday = day;
    tm.tm_hour = hour;
    tm.tm_min = min;
    tm.tm_sec = sec;
    std::time_t tt = timegm(&tm);
    if (tt == static_cast<std::time_t>(-1)) return std::nullopt;
    return static_cast<Timestamp>(tt);
}

}  // namespace

std::optional<Timestamp> parse_rfc3339(std::string_view s) {
    int year, mon, day, hour, min, sec;
    if (!parse_int(s, 0, 4, year) || !parse_int(s, 5, 2, mon) || !parse_int(s, 8, 2, day))
        return std::nullopt;
    if (s.size() < 20 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != 't'))
        return std::nullopt;
    if (!parse_int(s, 11, 2, hour) || !parse_int(s, 14, 2, min) || !parse_int(s, 17, 2, sec))
        return std::nullopt;
    if (s[13] != ':' || s[16] != ':') return std::nullopt;
    size_t pos = 19;
    if (pos < s.size() && s[pos] == '.') {
        ++pos;
        size_t digits = 0;
        while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos, ++digits;
        if (digits == 0) return std::nullopt;
    }
    if (pos >= s.size()) return std::nullopt;
    if (s[pos] == 'Z' || s[pos] == 'z') {
        if (pos + 1 != s.size()) return std::nullopt;
        return from_fields(year, mon, day, hour, min, sec);
    }
    // Numeric offset: +hh:mm / -hh:mm
    if (s[pos] != '+' && s[pos] != '-') return std::nullopt;
    bool neg = s[pos] == '-';
    int oh, om;
    if (!parse_int(s, pos + 1, 2, oh) || pos + 3 >= s.size() || s[pos + 3] != ':' ||
        !parse_int(s, pos + 4, 2, om) || pos + 6 != s.size())
        return std::nullopt;
    auto base = from_fields(year, mon, day, hour, min, sec);
    if (!base) return std::nullopt;
    int64_t off = (oh * 3600 + om * 60) * (neg ? -1 : 1);
    return *base - off;
}

std::optional<Timestamp> parse_oai_datestamp(std::string_view s) {
    if (s.size() == 10) {
        int year, mon, day;
        if (!parse_int(s, 0, 4, year) || s[4] != '-' || !parse_int(s, 5, 2, mon) || s[7] != '-' ||
            !parse_int(s, 8, 2, day))
            return std::nullopt;
        return from_fields(year, mon, day, 0, 0, 0);
    }
    if (s.size() == 20 && s.back() == 'Z') return parse_rfc3339(s);
    return std::nullopt;
}

Timestamp system_now() {
    return std::chrono::duration_cast<std::chrono::seconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

}  // namespace ncore
