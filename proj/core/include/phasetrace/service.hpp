/// @file service.hpp
/// @brief Read-only HTTP view over an artifact store plus the query loop.
///
///     GET  /users
///     GET  /users/{id}/trajectory
///     GET  /users/{id}/segments[?variant=<tag>]
///     GET  /users/{id}/reports/{variant}
///     POST /users/{id}/query   {question, date?, window_days?, top_k?}
///
/// Every artifact is loaded and validated when the service is constructed;
/// requests never touch the store afterwards.

#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <string>
#include <string_view>

#include "phasetrace/generation.hpp"
#include "phasetrace/store.hpp"

namespace phasetrace {

struct ServiceOptions {
    std::size_t max_inflight_queries = 4;
    std::string token;  ///< when set, requests need "Authorization: Bearer <token>"
};

struct HttpResponse {
    int status = 200;
    std::string body;  ///< JSON
};

class Service {
public:
    /// Throws ValidationError when a stored artifact is corrupt or
    /// inconsistent with its user's series.
    Service(const ArtifactStore& store, std::shared_ptr<GenerationBackend> generator, PromptSet prompts,
            ServiceOptions options = {});
    ~Service();

    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// `target` is the request path with an optional query string.
    HttpResponse handle(std::string_view method, std::string_view target, std::string_view body,
                        std::string_view authorization = {}) const;

    std::size_t user_count() const noexcept;

private:
    struct State;
    std::unique_ptr<State> state_;
};

/// A listening server on a background thread. Port 0 picks a free port.
class ServerHandle {
public:
    ServerHandle(const Service& service, const std::string& host, int port);
    ~ServerHandle();

    ServerHandle(const ServerHandle&) = delete;
    ServerHandle& operator=(const ServerHandle&) = delete;

    int port() const noexcept;
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Blocks serving `service` until the process is stopped.
void serve(const Service& service, const std::string& host, int port);

}  // namespace phasetrace
