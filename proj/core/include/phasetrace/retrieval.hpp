/// @file retrieval.hpp
/// @brief Per-user evidence index and grounded question answering.
///
/// Ranking is Okapi BM25 over lowercase alphanumeric tokens (no stemming):
///
///     idf(t)      = ln(1 + (N - df(t) + 0.5) / (df(t) + 0.5))
///     score(d, q) = Σ_{t ∈ unique(q)} idf(t) · tf(t,d)·(k1+1) / (tf(t,d) + k1·(1 - b + b·|d|/avgdl))
///
/// with k1 = 1.2 and b = 0.75, statistics taken over the whole index.
/// Ties are broken by later date first, then by key.

#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "phasetrace/enrichment.hpp"
#include "phasetrace/generation.hpp"
#include "phasetrace/reporting.hpp"
#include "phasetrace/segmentation.hpp"

namespace phasetrace {

inline constexpr double kBm25K1 = 1.2;
inline constexpr double kBm25B = 0.75;

enum class DocumentKind { event, segment_stats, segment_summary, note };

std::string_view to_string(DocumentKind kind);

struct Note {
    std::string key;
    std::optional<Date> date;
    std::string text;
};

struct Document {
    std::string key;
    DocumentKind kind = DocumentKind::event;
    std::optional<Date> date_begin;
    std::optional<Date> date_end;
    std::string text;
    std::map<std::string, int, std::less<>> term_counts;
    std::size_t length = 0;  ///< tokens

    /// "YYYY-MM-DD", "YYYY-MM-DD..YYYY-MM-DD" or empty.
    std::string date_label() const;
};

/// Lowercases ASCII and splits on anything that is not an ASCII letter or
/// digit. Bytes >= 0x80 count as word characters so UTF-8 words stay whole.
std::vector<std::string> tokenize(std::string_view text);

struct Query {
    std::string text;
    std::optional<Date> date_anchor;
    int window_days = 30;
    std::size_t top_k = 10;
};

struct ScoredDocument {
    const Document* document = nullptr;
    double score = 0.0;
};

class EvidenceIndex {
public:
    EvidenceIndex() = default;

    /// Event keys are "event:<user>@<timestamp>" (suffixed "#2", "#3", ...
    /// for same-instant events); segment descriptors are "segment:<k>",
    /// phase reports "phase:<k>"; notes keep their own keys.
    /// Throws ValidationError on duplicate note keys.
    static EvidenceIndex build(std::string user_id, std::span<const EnrichedEvent> events,
                               const std::vector<Segment>& segments, const std::vector<PhaseReport>& phase_reports,
                               const std::vector<Note>& notes);

    /// Every document is a candidate; with a date anchor only those overlapping
    /// [anchor - window, anchor + window] are (undated ones are excluded).
    /// Documents sharing no term with the query score zero and rank after
    /// matching ones, so a filtered query is a subset of the unfiltered one.
    std::vector<ScoredDocument> query(const Query& q) const;

    const std::vector<Document>& documents() const noexcept { return documents_; }
    const Document* find(std::string_view key) const;
    /// The stored event behind an event document, or null.
    const EnrichedEvent* event_for(std::string_view key) const;
    const std::string& user_id() const noexcept { return user_id_; }
    std::size_t size() const noexcept { return documents_.size(); }

private:
    void add(Document doc);
    double idf(std::string_view term) const;

    std::string user_id_;
    std::vector<Document> documents_;
    std::map<std::string, std::size_t, std::less<>> by_key_;
    std::map<std::string, std::size_t, std::less<>> document_frequency_;
    std::map<std::string, EnrichedEvent, std::less<>> events_;
    double average_length_ = 0.0;
};

struct Answer {
    std::string text;
    std::vector<std::string> cited_keys;  ///< exactly the documents supplied to the backend
    std::vector<Citation> evidence;
};

/// Retrieves, then asks `backend` to answer from the retrieved documents only.
Answer answer(const EvidenceIndex& index, const Query& q, GenerationBackend& backend,
              const PromptSet& prompts = PromptSet::builtin());

}  // namespace phasetrace
