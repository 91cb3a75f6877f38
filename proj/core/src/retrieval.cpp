#include "phasetrace/retrieval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "phasetrace/error.hpp"

namespace phasetrace {
namespace {

bool word_char(char c) {
    auto u = static_cast<unsigned char>(c);
    return u >= 0x80 || std::isalnum(u);
}

std::string segment_text(const Segment& s) {
    return fmt::format("Phase {} of {} from {} to {}: mean severity {:.3f}, trend {}, slope {:+.4f} per day, "
                       "{} active days.",
                       s.position, s.total, format_date(s.start_date), format_date(s.end_date), s.mean_severity,
                       to_string(s.trend), s.slope, s.last - s.first + 1);
}

}  // namespace

std::string_view to_string(DocumentKind kind) {
    switch (kind) {
        case DocumentKind::event: return "event";
        case DocumentKind::segment_stats: return "segment_stats";
        case DocumentKind::segment_summary: return "segment_summary";
        case DocumentKind::note: return "note";
    }
    return "event";
}

std::string Document::date_label() const {
    if (!date_begin) return "";
    if (!date_end || *date_end == *date_begin) return format_date(*date_begin);
    return format_date(*date_begin) + ".." + format_date(*date_end);
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string current;
    for (char c : text) {
        if (word_char(c)) {
            current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        } else if (!current.empty()) {
            out.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) out.push_back(std::move(current));
    return out;
}

void EvidenceIndex::add(Document doc) {
    for (const auto& t : tokenize(doc.text)) {
        ++doc.term_counts[t];
        ++doc.length;
    }
    for (const auto& [term, count] : doc.term_counts) ++document_frequency_[term];
    by_key_.emplace(doc.key, documents_.size());
    documents_.push_back(std::move(doc));
}

EvidenceIndex EvidenceIndex::build(std::string user_id, std::span<const EnrichedEvent> events,
                                   const std::vector<Segment>& segments,
                                   const std::vector<PhaseReport>& phase_reports, const std::vector<Note>& notes) {
    EvidenceIndex index;
    index.user_id_ = std::move(user_id);

    std::map<std::string, int> seen;
    for (const auto& e : events) {
        std::string key = "event:" + key_of(e.event).str();
        int n = ++seen[key];
        if (n > 1) key += "#" + std::to_string(n);
        Date d = to_date(e.event.timestamp);
        index.events_.emplace(key, e);
        index.add({key, DocumentKind::event, d, d, e.event.text, {}, 0});
    }
    for (const auto& s : segments) {
        index.add({"segment:" + std::to_string(s.position), DocumentKind::segment_stats, s.start_date, s.end_date,
                   segment_text(s), {}, 0});
    }
    for (const auto& p : phase_reports) {
        index.add({"phase:" + std::to_string(p.segment.position), DocumentKind::segment_summary,
                   p.segment.start_date, p.segment.end_date, p.text, {}, 0});
    }
    for (const auto& note : notes) {
        if (index.by_key_.contains(note.key)) {
            throw ValidationError("duplicate evidence key \"" + note.key + "\"");
        }
        index.add({note.key, DocumentKind::note, note.date, note.date, note.text, {}, 0});
    }

    std::size_t total = 0;
    for (const auto& d : index.documents_) total += d.length;
    index.average_length_ =
        index.documents_.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(index.documents_.size());
    return index;
}

double EvidenceIndex::idf(std::string_view term) const {
    auto it = document_frequency_.find(term);
    const double df = it == document_frequency_.end() ? 0.0 : static_cast<double>(it->second);
    const double n = static_cast<double>(documents_.size());
    return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
}

std::vector<ScoredDocument> EvidenceIndex::query(const Query& q) const {
    std::vector<ScoredDocument> out;
    if (documents_.empty() || q.top_k == 0) return out;

    auto terms = tokenize(q.text);
    std::set<std::string> unique(terms.begin(), terms.end());
    std::vector<std::pair<std::string, double>> weighted;
    for (const auto& t : unique) weighted.emplace_back(t, idf(t));

    std::optional<std::pair<Date, Date>> window;
    if (q.date_anchor) {
        const auto w = std::chrono::days{std::max(q.window_days, 0)};
        window = std::make_pair(*q.date_anchor - w, *q.date_anchor + w);
    }

    for (const auto& doc : documents_) {
        if (window) {
            if (!doc.date_begin) continue;
            const Date end = doc.date_end.value_or(*doc.date_begin);
            if (end < window->first || *doc.date_begin > window->second) continue;
        }
        double score = 0.0;
        const double norm = kBm25K1 * (1.0 - kBm25B + kBm25B * static_cast<double>(doc.length) /
                                                          std::max(average_length_, 1e-12));
        for (const auto& [term, weight] : weighted) {
            auto it = doc.term_counts.find(term);
            if (it == doc.term_counts.end()) continue;
            const double tf = it->second;
            score += weight * tf * (kBm25K1 + 1.0) / (tf + norm);
        }
        out.push_back({&doc, score});
    }

    auto recency = [](const Document& d) { return d.date_end ? d.date_end : d.date_begin; };
    std::sort(out.begin(), out.end(), [&](const ScoredDocument& a, const ScoredDocument& b) {
        if (a.score != b.score) return a.score > b.score;
        auto da = recency(*a.document), db = recency(*b.document);
        if (da != db) return da > db;  // nullopt sorts first, so undated ranks last
        return a.document->key < b.document->key;
    });
    if (out.size() > q.top_k) out.resize(q.top_k);
    return out;
}

const Document* EvidenceIndex::find(std::string_view key) const {
    auto it = by_key_.find(key);
    return it == by_key_.end() ? nullptr : &documents_[it->second];
}

const EnrichedEvent* EvidenceIndex::event_for(std::string_view key) const {
    auto it = events_.find(key);
    return it == events_.end() ? nullptr : &it->second;
}

Answer answer(const EvidenceIndex& index, const Query& q, GenerationBackend& backend, const PromptSet& prompts) {
    Answer out;
    AnswerRequest payload;
    payload.question = q.text;
    std::string listed;
    for (const auto& hit : index.query(q)) {
        const Document& d = *hit.document;
        Citation c{d.key, d.date_label(), truncate_utf8(d.text, kDefaultExcerptChars)};
        if (!listed.empty()) listed += "\n";
        listed += fmt::format("[{}]{} {}", c.key, c.date.empty() ? "" : " (" + c.date + ")", c.excerpt);
        out.cited_keys.push_back(c.key);
        payload.evidence.push_back(c);
    }
    out.evidence = payload.evidence;
    if (listed.empty()) listed = "(no evidence retrieved)";
    std::string prompt = prompts.render(
        "answer", {{"preamble", prompts.get("preamble")}, {"evidence", listed}, {"question", q.text}});
    out.text = backend.complete({std::move(prompt), std::move(payload)});
    return out;
}

}  // namespace phasetrace
