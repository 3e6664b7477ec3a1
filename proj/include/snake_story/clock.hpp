#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

namespace snake_story {

// Milliseconds on the local civil time line (a wall-clock reading with the
// time zone already applied). Logs print these values directly.
using TimePoint = std::chrono::sys_time<std::chrono::milliseconds>;

struct CivilTime {
    int year = 1970;
    unsigned month = 1;
    unsigned day = 1;
    int hour = 0;  // 0-23
    int minute = 0;
    int second = 0;

    friend bool operator==(const CivilTime&, const CivilTime&) = default;
};

inline CivilTime to_civil(TimePoint t) {
    using namespace std::chrono;
    const auto day_start = floor<days>(t);
    const year_month_day ymd{day_start};
    const hh_mm_ss hms{floor<seconds>(t - day_start)};
    return {static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
            static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
            static_cast<int>(hms.seconds().count())};
}

inline TimePoint from_civil(const CivilTime& c) {
    using namespace std::chrono;
    const sys_days d{year{c.year} / month{c.month} / day{c.day}};
    return TimePoint{d} + hours{c.hour} + minutes{c.minute} + seconds{c.second};
}

// "3/6/2023 7:29:47 PM": month, day and hour are not zero-padded.
inline std::string format_log_timestamp(TimePoint t) {
    const CivilTime c = to_civil(t);
    const int h12 = c.hour % 12 == 0 ? 12 : c.hour % 12;
    char buf[48];
    std::snprintf(buf, sizeof buf, "%u/%u/%d %d:%02d:%02d %s", c.month, c.day, c.year, h12, c.minute, c.second,
                  c.hour < 12 ? "AM" : "PM");
    return buf;
}

namespace detail {
inline bool read_uint(std::string_view& s, int& out, std::size_t min_digits, std::size_t max_digits) {
    std::size_t n = 0;
    int v = 0;
    while (n < s.size() && n < max_digits && s[n] >= '0' && s[n] <= '9') {
        v = v * 10 + (s[n] - '0');
        ++n;
    }
    if (n < min_digits) return false;
    s.remove_prefix(n);
    out = v;
    return true;
}
inline bool expect(std::string_view& s, std::string_view lit) {
    if (!s.starts_with(lit)) return false;
    s.remove_prefix(lit.size());
    return true;
}
}  // namespace detail

// Parses the canonical form written by format_log_timestamp. Zero-padded
// fields are rejected so that accepted input always round-trips.
inline std::optional<TimePoint> parse_log_timestamp(std::string_view s) {
    int mo = 0, d = 0, y = 0, h = 0, mi = 0, se = 0;
    auto no_pad = [](std::string_view v) { return v.empty() || v[0] != '0'; };
    if (!no_pad(s) || !detail::read_uint(s, mo, 1, 2) || !detail::expect(s, "/")) return std::nullopt;
    if (!no_pad(s) || !detail::read_uint(s, d, 1, 2) || !detail::expect(s, "/")) return std::nullopt;
    if (!detail::read_uint(s, y, 4, 4) || !detail::expect(s, " ")) return std::nullopt;
    if (!no_pad(s) || !detail::read_uint(s, h, 1, 2) || !detail::expect(s, ":")) return std::nullopt;
    if (!detail::read_uint(s, mi, 2, 2) || !detail::expect(s, ":")) return std::nullopt;
    if (!detail::read_uint(s, se, 2, 2) || !detail::expect(s, " ")) return std::nullopt;
    bool pm = false;
    if (detail::expect(s, "PM")) {
        pm = true;
    } else if (!detail::expect(s, "AM")) {
        return std::nullopt;
    }
    if (!s.empty()) return std::nullopt;
    if (mo < 1 || mo > 12 || d < 1 || h < 1 || h > 12 || mi > 59 || se > 59) return std::nullopt;
    using namespace std::chrono;
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) return std::nullopt;
    const int h24 = (h % 12) + (pm ? 12 : 0);
    return from_civil({y, static_cast<unsigned>(mo), static_cast<unsigned>(d), h24, mi, se});
}

class Clock {
public:
    virtual ~Clock() = default;
    virtual TimePoint now() = 0;
};

// Test and replay clock: time moves only when advanced.
class ManualClock final : public Clock {
public:
    explicit ManualClock(TimePoint start = from_civil({2023, 3, 6, 19, 29, 47})) : now_(start) {}

    TimePoint now() override {
        std::lock_guard lock(mu_);
        return now_;
    }
    void advance(std::chrono::milliseconds d) {
        std::lock_guard lock(mu_);
        now_ += d;
    }
    void set(TimePoint t) {
        std::lock_guard lock(mu_);
        now_ = t;
    }

private:
    std::mutex mu_;
    TimePoint now_;
};

// Local wall clock.
class SystemClock final : public Clock {
public:
    TimePoint now() override {
        using namespace std::chrono;
        const auto utc = time_point_cast<milliseconds>(system_clock::now());
        const std::time_t tt = system_clock::to_time_t(utc);
        std::tm local{};
        localtime_r(&tt, &local);
        return utc + seconds{local.tm_gmtoff};
    }
};

}  // namespace snake_story
