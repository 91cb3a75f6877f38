#include "phasetrace/time.hpp"

#include <cctype>
#include <cstdio>

namespace phasetrace {
namespace {

using namespace std::chrono;

// Reads exactly `width` digits starting at `pos`.
bool read_digits(std::string_view s, std::size_t pos, std::size_t width, int& out) {
    if (pos + width > s.size()) return false;
    int value = 0;
    for (std::size_t i = pos; i < pos + width; ++i) {
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
        value = value * 10 + (s[i] - '0');
    }
    out = value;
    return true;
}

std::optional<Date> parse_date_prefix(std::string_view s) {
    int y = 0, m = 0, d = 0;
    if (!read_digits(s, 0, 4, y) || s.size() < 10 || s[4] != '-' || !read_digits(s, 5, 2, m) ||
        s[7] != '-' || !read_digits(s, 8, 2, d)) {
        return std::nullopt;
    }
    year_month_day ymd{year{y}, month{static_cast<unsigned>(m)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) return std::nullopt;
    return sys_days{ymd};
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

}  // namespace

std::optional<Date> parse_date(std::string_view text) {
    text = trim(text);
    if (text.size() != 10) return std::nullopt;
    return parse_date_prefix(text);
}

std::optional<Timestamp> parse_timestamp(std::string_view text) {
    text = trim(text);
    auto date = parse_date_prefix(text);
    if (!date) return std::nullopt;
    if (text.size() == 10) return Timestamp{*date};

    if (text[10] != 'T' && text[10] != 't' && text[10] != ' ') return std::nullopt;
    int hh = 0, mm = 0, ss = 0;
    if (!read_digits(text, 11, 2, hh) || text.size() < 16 || text[13] != ':' ||
        !read_digits(text, 14, 2, mm)) {
        return std::nullopt;
    }
    std::size_t pos = 16;
    if (pos < text.size() && text[pos] == ':') {
        if (!read_digits(text, pos + 1, 2, ss)) return std::nullopt;
        pos += 3;
        if (pos < text.size() && (text[pos] == '.' || text[pos] == ',')) {
            ++pos;
            std::size_t digits = 0;
            while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) {
                ++pos;
                ++digits;
            }
            if (digits == 0) return std::nullopt;
        }
    }
    if (hh > 23 || mm > 59 || ss > 60) return std::nullopt;

    long offset_seconds = 0;
    std::string_view zone = text.substr(pos);
    if (zone == "Z" || zone == "z" || zone.empty()) {
        offset_seconds = 0;
    } else if (zone[0] == '+' || zone[0] == '-') {
        int oh = 0, om = 0;
        if (zone.size() == 6 && zone[3] == ':' && read_digits(zone, 1, 2, oh) &&
            read_digits(zone, 4, 2, om)) {
        } else if (zone.size() == 5 && read_digits(zone, 1, 2, oh) && read_digits(zone, 3, 2, om)) {
        } else if (zone.size() == 3 && read_digits(zone, 1, 2, oh)) {
        } else {
            return std::nullopt;
        }
        if (oh > 23 || om > 59) return std::nullopt;
        offset_seconds = (oh * 3600L + om * 60L) * (zone[0] == '-' ? -1 : 1);
    } else {
        return std::nullopt;
    }

    Timestamp local = Timestamp{*date} + hours{hh} + minutes{mm} + seconds{ss};
    return local - seconds{offset_seconds};
}

std::string format_date(Date date) {
    year_month_day ymd{date};
    char buf[48];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

std::string format_timestamp(Timestamp ts) {
    Date date = to_date(ts);
    hh_mm_ss hms{ts - date};
    char buf[48];
    std::snprintf(buf, sizeof buf, "T%02ld:%02ld:%02ldZ", static_cast<long>(hms.hours().count()),
                  static_cast<long>(hms.minutes().count()), static_cast<long>(hms.seconds().count()));
    return format_date(date) + buf;
}

}  // namespace phasetrace
