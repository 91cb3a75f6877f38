#include "phasetrace/http_backends.hpp"

#include <chrono>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "phasetrace/error.hpp"

namespace phasetrace {
namespace {

using json = nlohmann::json;

struct SplitUrl {
    std::string origin;  ///< scheme://host[:port]
    std::string path;
};

SplitUrl split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("endpoint URL lacks a scheme: \"" + url + "\"");
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

std::string post_json(const HttpSettings& settings, const std::string& body) {
    if (settings.url.empty()) throw ConfigError("HTTP backend has no endpoint URL");
    const SplitUrl target = split_url(settings.url);
    std::string last_error;
    for (int attempt = 0; attempt <= settings.max_retries; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(settings.backoff_ms << (attempt - 1)));
        }
        httplib::Client client(target.origin);
        client.set_connection_timeout(settings.timeout_seconds, 0);
        client.set_read_timeout(settings.timeout_seconds, 0);
        client.set_write_timeout(settings.timeout_seconds, 0);
        httplib::Headers headers;
        if (!settings.token.empty()) headers.emplace("Authorization", "Bearer " + settings.token);

        auto res = client.Post(target.path, headers, body, "application/json");
        if (!res) {
            last_error = "request to " + settings.url + " failed: " + httplib::to_string(res.error());
        } else if (res->status >= 200 && res->status < 300) {
            return res->body;
        } else {
            last_error = "request to " + settings.url + " returned HTTP " + std::to_string(res->status);
            if (res->status != 429 && res->status < 500) break;
        }
        spdlog::debug("{} (attempt {})", last_error, attempt + 1);
    }
    throw TransportError(last_error);
}

HttpClassifierBackend::HttpClassifierBackend(HttpSettings settings) : settings_(std::move(settings)) {}

std::vector<std::vector<ClassDistribution>> HttpClassifierBackend::classify(std::span<const Event> events,
                                                                            std::span<const std::string> dimensions) {
    json request{{"texts", json::array()}, {"dimensions", dimensions}};
    for (const auto& e : events) request["texts"].push_back(e.text);
    json reply = json::parse(post_json(settings_, request.dump()), nullptr, false);
    if (reply.is_discarded() || !reply.contains("results") || !reply["results"].is_array()) {
        throw ValidationError("classifier reply lacks a \"results\" array");
    }
    const auto& results = reply["results"];
    if (results.size() != events.size()) {
        throw ValidationError("classifier returned " + std::to_string(results.size()) + " results for " +
                              std::to_string(events.size()) + " texts");
    }
    std::vector<std::vector<ClassDistribution>> out;
    out.reserve(events.size());
    for (std::size_t i = 0; i < results.size(); ++i) {
        auto& row = out.emplace_back();
        if (!results[i].is_array()) {
            throw ValidationError("classifier result for event " + key_of(events[i]).str() + " is not an array");
        }
        for (const auto& item : results[i]) {
            if (!item.is_object() || !item.contains("dimension") || !item["dimension"].is_string() ||
                !item.contains("probs") || !item["probs"].is_object()) {
                throw ValidationError("malformed classifier result for event " + key_of(events[i]).str());
            }
            ClassDistribution dist{item["dimension"].get<std::string>(), {}};
            for (const auto& [name, p] : item["probs"].items()) {
                if (!p.is_number()) {
                    throw ValidationError("non-numeric probability for event " + key_of(events[i]).str());
                }
                dist.probs[name] = p.get<double>();
            }
            row.push_back(std::move(dist));
        }
    }
    return out;
}

HttpChatBackend::HttpChatBackend(HttpSettings settings, std::string model, double temperature)
    : settings_(std::move(settings)), model_(std::move(model)), temperature_(temperature) {}

std::string HttpChatBackend::complete(const GenerationRequest& request) {
    json body{{"model", model_},
              {"temperature", temperature_},
              {"messages", json::array({json{{"role", "user"}, {"content", request.prompt}}})}};
    json reply = json::parse(post_json(settings_, body.dump()), nullptr, false);
    if (reply.is_discarded() || !reply.is_object()) throw TransportError("chat endpoint returned non-JSON body");
    if (reply.contains("content") && reply["content"].is_string()) return reply["content"].get<std::string>();
    if (reply.contains("choices") && reply["choices"].is_array() && !reply["choices"].empty()) {
        const auto& msg = reply["choices"][0]["message"];
        if (msg.is_object() && msg.contains("content") && msg["content"].is_string()) {
            return msg["content"].get<std::string>();
        }
    }
    throw TransportError("chat endpoint reply lacks \"content\"");
}

}  // namespace phasetrace
