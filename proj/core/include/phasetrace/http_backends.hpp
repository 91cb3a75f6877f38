/// @file http_backends.hpp
/// @brief JSON-over-HTTP classifier and chat-completion clients.
///
/// Classifier protocol:
///     POST <url>  {"texts": [...], "dimensions": [...]}
///     200         {"results": [[{"dimension": d, "probs": {class: p}}, ...], ...]}   one entry per text
///
/// Chat protocol:
///     POST <url>  {"model": m, "temperature": t, "messages": [{"role": "user", "content": prompt}]}
///     200         {"content": "..."}  (OpenAI-style {"choices":[{"message":{"content":...}}]} also accepted)
///
/// Connection failures, 429 and 5xx are retried with exponential backoff;
/// exhausting the retries raises TransportError.

#pragma once

#include <string>

#include "phasetrace/enrichment.hpp"
#include "phasetrace/generation.hpp"

namespace phasetrace {

struct HttpSettings {
    std::string url;    ///< full endpoint URL, http:// or https://
    std::string token;  ///< sent as "Authorization: Bearer <token>" when non-empty
    int timeout_seconds = 30;
    int max_retries = 2;
    int backoff_ms = 200;
};

class HttpClassifierBackend final : public ClassifierBackend {
public:
    explicit HttpClassifierBackend(HttpSettings settings);

    std::vector<std::vector<ClassDistribution>> classify(std::span<const Event> events,
                                                         std::span<const std::string> dimensions) override;

private:
    HttpSettings settings_;
};

class HttpChatBackend final : public GenerationBackend {
public:
    HttpChatBackend(HttpSettings settings, std::string model, double temperature = 0.0);

    std::string complete(const GenerationRequest& request) override;
    std::string name() const override { return "http_chat:" + model_; }

private:
    HttpSettings settings_;
    std::string model_;
    double temperature_;
};

/// POSTs `body` as JSON and returns the response body of a 2xx reply.
/// Shared by both backends; exposed for tests.
std::string post_json(const HttpSettings& settings, const std::string& body);

}  // namespace phasetrace
