#include "phasetrace/service.hpp"

#include <semaphore>
#include <thread>
#include <vector>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "phasetrace/error.hpp"
#include "phasetrace/serialization.hpp"

namespace phasetrace {
namespace {

struct UserView {
    DailySeries series;
    bool has_series = false;
    std::map<AblationVariant, Segmentation> segmentations;
    std::map<AblationVariant, GlobalReport> reports;
    std::unique_ptr<EvidenceIndex> index;
};

HttpResponse json_response(int status, const Json& body) { return {status, body.dump()}; }

HttpResponse error_response(int status, const std::string& message) {
    return json_response(status, Json{{"error", message}});
}

std::string url_decode(std::string_view s) {
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '%' && i + 2 < s.size() && std::isxdigit(static_cast<unsigned char>(s[i + 1])) &&
            std::isxdigit(static_cast<unsigned char>(s[i + 2]))) {
            out += static_cast<char>(std::stoi(std::string(s.substr(i + 1, 2)), nullptr, 16));
            i += 2;
        } else if (s[i] == '+') {
            out += ' ';
        } else {
            out += s[i];
        }
    }
    return out;
}

std::vector<std::string> split_path(std::string_view path) {
    std::vector<std::string> parts;
    std::size_t i = 0;
    while (i < path.size()) {
        while (i < path.size() && path[i] == '/') ++i;
        std::size_t j = path.find('/', i);
        if (j == std::string_view::npos) j = path.size();
        if (j > i) parts.push_back(url_decode(path.substr(i, j - i)));
        i = j;
    }
    return parts;
}

std::map<std::string, std::string> parse_query(std::string_view q) {
    std::map<std::string, std::string> out;
    std::size_t i = 0;
    while (i <= q.size() && !q.empty()) {
        std::size_t j = q.find('&', i);
        if (j == std::string_view::npos) j = q.size();
        auto pair = q.substr(i, j - i);
        auto eq = pair.find('=');
        if (!pair.empty()) {
            out[url_decode(pair.substr(0, eq))] = eq == std::string_view::npos ? "" : url_decode(pair.substr(eq + 1));
        }
        if (j == q.size()) break;
        i = j + 1;
    }
    return out;
}

}  // namespace

struct Service::State {
    std::map<std::string, UserView, std::less<>> users;
    std::shared_ptr<GenerationBackend> generator;
    PromptSet prompts;
    ServiceOptions options;
    mutable std::counting_semaphore<> inflight;

    State(std::shared_ptr<GenerationBackend> g, PromptSet p, ServiceOptions o)
        : generator(std::move(g)),
          prompts(std::move(p)),
          options(std::move(o)),
          inflight(static_cast<std::ptrdiff_t>(std::max<std::size_t>(1, options.max_inflight_queries))) {}

    HttpResponse list_users() const;
    HttpResponse trajectory(const std::string& id, const UserView& u) const;
    HttpResponse segments(const std::string& id, const UserView& u, const std::string& variant) const;
    HttpResponse report(const UserView& u, const std::string& variant) const;
    HttpResponse query(const UserView& u, std::string_view body) const;
};

Service::Service(const ArtifactStore& store, std::shared_ptr<GenerationBackend> generator, PromptSet prompts,
                 ServiceOptions options)
    : state_(std::make_unique<State>(std::move(generator), std::move(prompts), std::move(options))) {
    if (!state_->generator) throw ContractError("service needs a generation backend");
    for (const auto& id : store.users()) {
        UserView view;
        store.read_timeline(id);
        const auto dir = store.user_dir(id);
        if (std::filesystem::exists(dir / "trajectory.jsonl")) {
            view.series = store.read_series(id);
            view.has_series = true;
        }
        for (auto v : kAllVariants) {
            if (auto seg = store.read_segmentation(id, v)) {
                if (!view.has_series) {
                    throw ValidationError("user " + id + ": segmentation stored without a trajectory");
                }
                try {
                    validate_segmentation(*seg, view.series);
                } catch (const ValidationError& e) {
                    throw ValidationError("user " + id + ", " + std::string(to_string(v)) + " segmentation: " + e.what());
                }
                view.segmentations.emplace(v, std::move(*seg));
            }
            if (auto rep = store.read_report(id, v)) view.reports.emplace(v, std::move(*rep));
        }
        if (std::filesystem::exists(dir / "enriched.jsonl")) {
            view.index = std::make_unique<EvidenceIndex>(build_user_index(store, id));
        }
        state_->users.emplace(id, std::move(view));
    }
    spdlog::info("service loaded {} users from {}", state_->users.size(), store.root().string());
}

Service::~Service() = default;

std::size_t Service::user_count() const noexcept { return state_->users.size(); }

HttpResponse Service::State::list_users() const {
    Json out = Json::array();
    for (const auto& [id, u] : users) {
        Json variants = Json::array();
        for (const auto& [v, r] : u.reports) variants.push_back(std::string(to_string(v)));
        out.push_back(Json{{"user_id", id},
                           {"days", u.has_series ? u.series.size() : 0},
                           {"report_variants", variants}});
    }
    return json_response(200, Json{{"users", out}});
}

HttpResponse Service::State::trajectory(const std::string& id, const UserView& u) const {
    if (!u.has_series) return error_response(404, "no trajectory stored for user " + id);
    Json points = Json::array();
    for (const auto& p : u.series.points) points.push_back(to_json(p));
    return json_response(200, Json{{"user_id", id}, {"smoothing_window", u.series.smoothing_window}, {"points", points}});
}

HttpResponse Service::State::segments(const std::string& id, const UserView& u, const std::string& variant) const {
    AblationVariant v;
    try {
        v = parse_variant(variant.empty() ? "full" : variant);
    } catch (const ConfigError& e) {
        return error_response(400, e.what());
    }
    auto it = u.segmentations.find(v);
    if (it == u.segmentations.end()) {
        return error_response(404, "no " + std::string(to_string(v)) + " segmentation stored for user " + id);
    }
    Json out{{"user_id", id}, {"variant", std::string(to_string(v))}};
    const Json seg = to_json(it->second);
    for (const auto& [k, val] : seg.items()) out[k] = val;
    return json_response(200, out);
}

HttpResponse Service::State::report(const UserView& u, const std::string& variant) const {
    AblationVariant v;
    try {
        v = parse_variant(variant);
    } catch (const ConfigError& e) {
        return error_response(400, e.what());
    }
    auto it = u.reports.find(v);
    if (it == u.reports.end()) return error_response(404, "no " + std::string(to_string(v)) + " report stored");
    Json out = to_json(it->second);
    out["variant"] = std::string(to_string(v));
    out["text"] = render_report_text(it->second);
    return json_response(200, out);
}

HttpResponse Service::State::query(const UserView& u, std::string_view body) const {
    if (!u.index) return error_response(404, "no evidence index for this user");
    Json req = Json::parse(body, nullptr, false);
    if (req.is_discarded() || !req.is_object()) return error_response(400, "body must be a JSON object");
    if (!req.contains("question") || !req["question"].is_string() || req["question"].get<std::string>().empty()) {
        return error_response(400, "\"question\" must be a non-empty string");
    }
    Query q;
    q.text = req["question"].get<std::string>();
    if (req.contains("date") && !req["date"].is_null()) {
        auto d = req["date"].is_string() ? parse_date(req["date"].get<std::string>()) : std::nullopt;
        if (!d) return error_response(400, "\"date\" must be YYYY-MM-DD");
        q.date_anchor = *d;
    }
    if (req.contains("window_days")) {
        if (!req["window_days"].is_number_integer() || req["window_days"].get<int>() < 0) {
            return error_response(400, "\"window_days\" must be a non-negative integer");
        }
        q.window_days = req["window_days"].get<int>();
    }
    if (req.contains("top_k")) {
        if (!req["top_k"].is_number_integer() || req["top_k"].get<int>() < 1) {
            return error_response(400, "\"top_k\" must be a positive integer");
        }
        q.top_k = req["top_k"].get<std::size_t>();
    }

    inflight.acquire();
    struct Release {
        std::counting_semaphore<>& s;
        ~Release() { s.release(); }
    } release{inflight};

    Answer a;
    try {
        a = answer(*u.index, q, *generator, prompts);
    } catch (const TransportError& e) {
        return error_response(502, e.what());
    }
    Json evidence = Json::array();
    for (const auto& c : a.evidence) {
        const Document* doc = u.index->find(c.key);
        evidence.push_back(Json{{"key", c.key},
                                {"kind", doc ? std::string(to_string(doc->kind)) : std::string("unknown")},
                                {"date", c.date},
                                {"excerpt", c.excerpt}});
    }
    return json_response(200, Json{{"answer", a.text}, {"evidence", evidence}});
}

HttpResponse Service::handle(std::string_view method, std::string_view target, std::string_view body,
                             std::string_view authorization) const {
    const auto& s = *state_;
    if (!s.options.token.empty() && authorization != "Bearer " + s.options.token) {
        return error_response(401, "missing or invalid bearer token");
    }
    const auto qpos = target.find('?');
    const auto parts = split_path(target.substr(0, qpos));
    const auto params = parse_query(qpos == std::string_view::npos ? std::string_view{} : target.substr(qpos + 1));

    if (parts.empty() || parts[0] != "users") return error_response(404, "no such endpoint");
    if (parts.size() == 1) {
        if (method != "GET") return error_response(405, "method not allowed");
        return s.list_users();
    }
    auto it = s.users.find(parts[1]);
    if (parts.size() < 3 || parts.size() > 4) return error_response(404, "no such endpoint");
    if (it == s.users.end()) return error_response(404, "unknown user " + parts[1]);
    const UserView& user = it->second;
    const std::string& what = parts[2];

    try {
        if (what == "trajectory" && parts.size() == 3) {
            if (method != "GET") return error_response(405, "method not allowed");
            return s.trajectory(parts[1], user);
        }
        if (what == "segments" && parts.size() == 3) {
            if (method != "GET") return error_response(405, "method not allowed");
            auto v = params.find("variant");
            return s.segments(parts[1], user, v == params.end() ? "" : v->second);
        }
        if (what == "reports" && parts.size() == 4) {
            if (method != "GET") return error_response(405, "method not allowed");
            return s.report(user, parts[3]);
        }
        if (what == "query" && parts.size() == 3) {
            if (method != "POST") return error_response(405, "method not allowed");
            return s.query(user, body);
        }
    } catch (const std::exception& e) {
        spdlog::error("{} {}: {}", method, target, e.what());
        return error_response(500, e.what());
    }
    return error_response(404, "no such endpoint");
}

namespace {

void install_routes(httplib::Server& server, const Service& service) {
    auto dispatch = [&service](const httplib::Request& req, httplib::Response& res) {
        auto out = service.handle(req.method, req.target, req.body, req.get_header_value("Authorization"));
        res.status = out.status;
        res.set_content(out.body, "application/json");
    };
    server.Get(R"(/users.*)", dispatch);
    server.Post(R"(/users.*)", dispatch);
}

}  // namespace

struct ServerHandle::Impl {
    httplib::Server server;
    std::thread thread;
    int port = 0;
};

ServerHandle::ServerHandle(const Service& service, const std::string& host, int port)
    : impl_(std::make_unique<Impl>()) {
    install_routes(impl_->server, service);
    if (port == 0) {
        impl_->port = impl_->server.bind_to_any_port(host);
    } else {
        impl_->port = impl_->server.bind_to_port(host, port) ? port : -1;
    }
    if (impl_->port < 0) throw IoError("cannot bind " + host + ":" + std::to_string(port));
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
}

ServerHandle::~ServerHandle() { stop(); }

int ServerHandle::port() const noexcept { return impl_->port; }

void ServerHandle::stop() {
    if (!impl_ || !impl_->thread.joinable()) return;
    impl_->server.stop();
    impl_->thread.join();
}

void serve(const Service& service, const std::string& host, int port) {
    httplib::Server server;
    install_routes(server, service);
    spdlog::info("listening on {}:{}", host, port);
    if (!server.listen(host, port)) throw IoError("cannot listen on " + host + ":" + std::to_string(port));
}

}  // namespace phasetrace
