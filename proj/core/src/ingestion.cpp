#include "phasetrace/ingestion.hpp"

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <istream>
#include <iterator>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include <nlohmann/json.hpp>

#include "phasetrace/error.hpp"

namespace phasetrace {
namespace {

using json = nlohmann::json;

bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(), is_space);
}

/// Builds a RawEvent from named fields; returns a rejection reason on failure.
std::optional<std::string> make_record(std::size_t line, const std::optional<std::string>& user_id,
                                       const std::optional<std::string>& timestamp,
                                       const std::optional<std::string>& source,
                                       const std::optional<std::string>& text, RawEvent& out) {
    if (!user_id || user_id->empty()) return "missing field \"user_id\"";
    if (!text) return "missing field \"text\"";
    for (const auto* s : {&*user_id, &*text}) {
        if (!is_valid_utf8(*s)) return "invalid UTF-8";
    }
    if (source && !is_valid_utf8(*source)) return "invalid UTF-8";

    out.line = line;
    out.user_id = *user_id;
    out.source = source && !source->empty() ? *source : "unknown";
    out.text = *text;
    if (!timestamp || blank(*timestamp)) {
        out.timestamp_status = TimestampStatus::missing;
    } else if (auto ts = parse_timestamp(*timestamp)) {
        out.timestamp = ts;
        out.timestamp_status = TimestampStatus::present;
    } else {
        out.timestamp_status = TimestampStatus::unparseable;
    }
    return std::nullopt;
}

std::optional<std::string> string_field(const json& obj, const char* name) {
    auto it = obj.find(name);
    if (it == obj.end() || it->is_null()) return std::nullopt;
    if (it->is_string()) return it->get<std::string>();
    if (it->is_number_integer()) return std::to_string(it->get<long long>());
    return std::nullopt;
}

void parse_jsonl(std::istream& in, ParsedEvents& out) {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (blank(line)) continue;
        if (!is_valid_utf8(line)) {
            out.rejections.push_back({lineno, "invalid UTF-8"});
            continue;
        }
        json obj = json::parse(line, nullptr, /*allow_exceptions=*/false);
        if (obj.is_discarded() || !obj.is_object()) {
            out.rejections.push_back({lineno, "not a JSON object"});
            continue;
        }
        auto text_it = obj.find("text");
        if (text_it != obj.end() && !text_it->is_string()) {
            out.rejections.push_back({lineno, "field \"text\" is not a string"});
            continue;
        }
        RawEvent record;
        auto reason = make_record(lineno, string_field(obj, "user_id"), string_field(obj, "timestamp"),
                                  string_field(obj, "source"), string_field(obj, "text"), record);
        if (reason) {
            out.rejections.push_back({lineno, *reason});
        } else {
            out.records.push_back(std::move(record));
        }
    }
    if (in.bad()) throw IoError("read error while parsing JSONL input");
}

struct CsvRow {
    std::size_t line;
    std::vector<std::string> cells;
};

/// RFC 4180 reader. Quoted cells may span lines; `line` is where the row starts.
std::vector<CsvRow> read_csv(std::string_view data, std::vector<Rejection>& rejections) {
    std::vector<CsvRow> rows;
    std::size_t lineno = 1;
    std::size_t i = 0;
    while (i < data.size()) {
        CsvRow row{lineno, {}};
        std::string cell;
        bool quoted = false;
        bool in_quotes = false;
        bool row_done = false;
        bool broken = false;
        while (i < data.size() && !row_done) {
            char c = data[i];
            if (in_quotes) {
                if (c == '"') {
                    if (i + 1 < data.size() && data[i + 1] == '"') {
                        cell.push_back('"');
                        i += 2;
                        continue;
                    }
                    in_quotes = false;
                    ++i;
                    continue;
                }
                if (c == '\n') ++lineno;
                cell.push_back(c);
                ++i;
                continue;
            }
            switch (c) {
                case '"':
                    if (cell.empty() && !quoted) {
                        quoted = in_quotes = true;
                    } else {
                        broken = true;
                        cell.push_back(c);
                    }
                    ++i;
                    break;
                case ',':
                    row.cells.push_back(std::move(cell));
                    cell.clear();
                    quoted = false;
                    ++i;
                    break;
                case '\r':
                    ++i;
                    break;
                case '\n':
                    ++lineno;
                    ++i;
                    row_done = true;
                    break;
                default:
                    if (quoted) broken = true;
                    cell.push_back(c);
                    ++i;
            }
        }
        if (in_quotes) {
            rejections.push_back({row.line, "unterminated quoted field"});
            break;
        }
        row.cells.push_back(std::move(cell));
        if (broken) {
            rejections.push_back({row.line, "malformed quoting"});
            continue;
        }
        if (row.cells.size() == 1 && blank(row.cells[0])) continue;
        rows.push_back(std::move(row));
    }
    return rows;
}

void parse_csv(std::istream& in, ParsedEvents& out) {
    std::string data{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    if (in.bad()) throw IoError("read error while parsing CSV input");
    if (data.empty()) return;

    auto rows = read_csv(data, out.rejections);
    if (rows.empty()) return;

    std::map<std::string, std::size_t> columns;
    for (std::size_t c = 0; c < rows.front().cells.size(); ++c) {
        std::string name = rows.front().cells[c];
        if (c == 0 && name.rfind("\xEF\xBB\xBF", 0) == 0) name.erase(0, 3);
        columns.emplace(name, c);
    }
    auto cell = [&](const CsvRow& row, const char* name) -> std::optional<std::string> {
        auto it = columns.find(name);
        if (it == columns.end() || it->second >= row.cells.size()) return std::nullopt;
        return row.cells[it->second];
    };
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.cells.size() != rows.front().cells.size()) {
            out.rejections.push_back({row.line, "expected " + std::to_string(rows.front().cells.size()) +
                                                    " columns, found " + std::to_string(row.cells.size())});
            continue;
        }
        RawEvent record;
        auto reason = make_record(row.line, cell(row, "user_id"), cell(row, "timestamp"),
                                  cell(row, "source"), cell(row, "text"), record);
        if (reason) {
            out.rejections.push_back({row.line, *reason});
        } else {
            out.records.push_back(std::move(record));
        }
    }
    std::stable_sort(out.rejections.begin(), out.rejections.end(),
                     [](const Rejection& a, const Rejection& b) { return a.line < b.line; });
}

Event complete(const RawEvent& r, Timestamp ts) {
    return Event{r.user_id, ts, r.source, r.text};
}

}  // namespace

std::string EventKey::str() const { return user_id + "@" + format_timestamp(timestamp); }

InputFormat parse_input_format(std::string_view tag) {
    if (tag == "jsonl") return InputFormat::jsonl;
    if (tag == "csv") return InputFormat::csv;
    throw ConfigError("unknown input format \"" + std::string(tag) + "\" (expected jsonl or csv)");
}

ParsedEvents parse_events(std::istream& in, InputFormat format) {
    ParsedEvents out;
    switch (format) {
        case InputFormat::jsonl:
            parse_jsonl(in, out);
            break;
        case InputFormat::csv:
            parse_csv(in, out);
            break;
    }
    return out;
}

ParsedEvents parse_events_file(const std::filesystem::path& path, InputFormat format) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return parse_events(in, format);
}

std::string_view to_string(RemovalRule rule) {
    switch (rule) {
        case RemovalRule::duplicate: return "duplicate";
        case RemovalRule::too_short: return "too_short";
        case RemovalRule::unparseable_timestamp: return "unparseable_timestamp";
    }
    return "unknown";
}

bool is_valid_utf8(std::string_view s) {
    std::size_t i = 0;
    while (i < s.size()) {
        auto c = static_cast<unsigned char>(s[i]);
        std::size_t len;
        std::uint32_t cp;
        if (c < 0x80) {
            ++i;
            continue;
        } else if ((c & 0xE0) == 0xC0) {
            len = 2;
            cp = c & 0x1F;
        } else if ((c & 0xF0) == 0xE0) {
            len = 3;
            cp = c & 0x0F;
        } else if ((c & 0xF8) == 0xF0) {
            len = 4;
            cp = c & 0x07;
        } else {
            return false;
        }
        if (i + len > s.size()) return false;
        for (std::size_t k = 1; k < len; ++k) {
            auto cc = static_cast<unsigned char>(s[i + k]);
            if ((cc & 0xC0) != 0x80) return false;
            cp = (cp << 6) | (cc & 0x3F);
        }
        // overlong forms, surrogates, out of range
        if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000) ||
            cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
            return false;
        }
        i += len;
    }
    return true;
}

std::size_t utf8_length(std::string_view s) {
    return static_cast<std::size_t>(std::count_if(
        s.begin(), s.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xC0) != 0x80; }));
}

std::string normalize_text(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (char c : text) {
        if (is_space(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return out;
}

PreparedTimeline prepare_timeline(std::vector<Event> events, const PrepConfig& cfg) {
    PreparedTimeline out;
    if (!events.empty()) out.timeline.user_id = events.front().user_id;
    for (const auto& e : events) {
        if (e.user_id != out.timeline.user_id) {
            throw ContractError("prepare_timeline: events from users \"" + out.timeline.user_id +
                                "\" and \"" + e.user_id + "\" mixed in one timeline");
        }
    }

    std::set<std::tuple<std::string_view, Timestamp, std::string_view>> seen;
    std::vector<Event> kept;
    kept.reserve(events.size());
    const std::size_t min_length = std::max<std::size_t>(cfg.min_text_length, 1);
    for (auto& e : events) {
        if (cfg.lowercase) e.text = normalize_text(e.text);
        if (utf8_length(e.text) < min_length || blank(e.text)) {
            out.removed.push_back({std::move(e), RemovalRule::too_short});
            continue;
        }
        kept.push_back(std::move(e));
    }
    if (cfg.dedup) {
        std::vector<Event> unique;
        unique.reserve(kept.size());
        std::vector<bool> duplicate(kept.size(), false);
        for (std::size_t i = 0; i < kept.size(); ++i) {
            duplicate[i] = !seen.emplace(kept[i].user_id, kept[i].timestamp, kept[i].text).second;
        }
        for (std::size_t i = 0; i < kept.size(); ++i) {
            if (duplicate[i]) {
                out.removed.push_back({std::move(kept[i]), RemovalRule::duplicate});
            } else {
                unique.push_back(std::move(kept[i]));
            }
        }
        kept = std::move(unique);
    }
    std::stable_sort(kept.begin(), kept.end(),
                     [](const Event& a, const Event& b) { return a.timestamp < b.timestamp; });
    out.timeline.events = std::move(kept);
    return out;
}

TimestampRepair infer_missing_timestamps(const std::vector<RawEvent>& records) {
    std::vector<std::optional<Timestamp>> known;
    known.reserve(records.size());
    for (const auto& r : records) known.push_back(r.timestamp);
    if (std::none_of(known.begin(), known.end(), [](const auto& t) { return t.has_value(); })) {
        throw UnrecoverableDataError("no record carries a timestamp; cannot infer missing ones");
    }

    const std::size_t n = records.size();
    std::vector<std::optional<Timestamp>> before(n), after(n);
    std::optional<Timestamp> last;
    for (std::size_t i = 0; i < n; ++i) {
        before[i] = last;
        if (known[i]) last = known[i];
    }
    last.reset();
    for (std::size_t i = n; i-- > 0;) {
        after[i] = last;
        if (known[i]) last = known[i];
    }

    TimestampRepair out;
    out.events.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (known[i]) {
            out.events.push_back(complete(records[i], *known[i]));
            continue;
        }
        Timestamp ts;
        if (before[i] && after[i]) {
            ts = *before[i] + (*after[i] - *before[i]) / 2;
        } else {
            ts = before[i] ? *before[i] : *after[i];
        }
        out.events.push_back(complete(records[i], ts));
        ++out.inferred;
    }
    return out;
}

IngestResult ingest(const ParsedEvents& parsed, const PrepConfig& cfg) {
    IngestResult out;
    out.rejections = parsed.rejections;

    std::map<std::string, std::vector<RawEvent>> by_user;
    for (const auto& r : parsed.records) {
        if (r.timestamp_status == TimestampStatus::unparseable && cfg.drop_unparseable_timestamps) {
            out.rejections.push_back({r.line, "unparseable timestamp"});
            continue;
        }
        if (r.timestamp_status != TimestampStatus::present && !cfg.infer_timestamps) {
            out.rejections.push_back({r.line, r.timestamp_status == TimestampStatus::missing
                                                  ? "missing timestamp"
                                                  : "unparseable timestamp"});
            continue;
        }
        by_user[r.user_id].push_back(r);
    }

    for (auto& [user, records] : by_user) {
        TimestampRepair repaired;
        try {
            repaired = infer_missing_timestamps(records);
        } catch (const UnrecoverableDataError&) {
            for (const auto& r : records) {
                out.rejections.push_back({r.line, "timestamp not recoverable from neighbouring records"});
            }
            continue;
        }
        auto prepared = prepare_timeline(std::move(repaired.events), cfg);
        if (prepared.timeline.events.empty()) {
            prepared.timeline.user_id = user;
        }
        out.removed.insert(out.removed.end(), std::make_move_iterator(prepared.removed.begin()),
                           std::make_move_iterator(prepared.removed.end()));
        out.timelines.push_back(std::move(prepared.timeline));
    }
    std::stable_sort(out.rejections.begin(), out.rejections.end(),
                     [](const Rejection& a, const Rejection& b) { return a.line < b.line; });
    return out;
}

}  // namespace phasetrace
