#include "tsfeatlime/http_service.hpp"

#include <charconv>

#include "httplib.h"
#include "json.hpp"
#include "tsfeatlime/errors.hpp"

namespace tsfl {

namespace {

using nlohmann::json;

void send_error(httplib::Response& res, int status, std::string_view code, std::string_view message) {
    res.status = status;
    res.set_content(json{{"code", code}, {"message", message}}.dump(), "application/json");
}

std::size_t parse_index(const std::string& text, std::string_view what) {
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size()) {
        throw ValidationError(std::string(what) + " must be a positive integer");
    }
    return v;
}

std::size_t json_index(const json& body, const char* key) {
    const auto it = body.find(key);
    if (it == body.end()) throw ValidationError(std::string("missing field '") + key + "'");
    if (!it->is_number_integer() || it->get<long long>() < 1) {
        throw ValidationError(std::string("field '") + key + "' must be a positive integer");
    }
    return it->get<std::size_t>();
}

std::string json_string(const json& body, const char* key) {
    const auto it = body.find(key);
    if (it == body.end() || !it->is_string()) {
        throw ValidationError(std::string("field '") + key + "' must be a string");
    }
    return it->get<std::string>();
}

json parse_body(const httplib::Request& req) {
    json body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object()) throw ValidationError("request body must be a JSON object");
    return body;
}

template <typename Fn>
httplib::Server::Handler guarded(Fn fn) {
    return [fn](const httplib::Request& req, httplib::Response& res) {
        try {
            fn(req, res);
        } catch (const NotFoundError& e) {
            send_error(res, 404, "not_found", e.what());
        } catch (const ConflictError& e) {
            send_error(res, 409, "conflict", e.what());
        } catch (const ConfigError& e) {
            send_error(res, 400, "validation", e.what());
        } catch (const json::exception& e) {
            send_error(res, 400, "validation", e.what());
        } catch (const std::exception& e) {
            send_error(res, 500, "internal", e.what());
        }
    };
}

}  // namespace

struct StudyServer::Impl {
    explicit Impl(ExerciseStudy& s) : study(s) {}
    ExerciseStudy& study;
    httplib::Server server;
};

StudyServer::StudyServer(ExerciseStudy& study, std::string static_dir)
    : impl_(std::make_unique<Impl>(study)) {
    auto& svr = impl_->server;
    ExerciseStudy& st = study;

    svr.Post("/api/session", guarded([&st](const httplib::Request& req, httplib::Response& res) {
        const json body = parse_body(req);
        const Group group = parse_group(json_string(body, "group"));
        const std::string participant = json_string(body, "participant");
        const Background background =
            body.contains("background") ? parse_background(json_string(body, "background")) : Background::NonCS;
        std::optional<std::uint64_t> seed;
        if (body.contains("seed")) {
            if (!body["seed"].is_number_unsigned()) throw ValidationError("field 'seed' must be a non-negative integer");
            seed = body["seed"].get<std::uint64_t>();
        }
        const auto s = st.create_session(group, participant, background, seed);
        res.status = 201;
        res.set_content(session_to_json(s), "application/json");
    }));

    svr.Get(R"(/api/session/([^/]+))", guarded([&st](const httplib::Request& req, httplib::Response& res) {
        res.set_content(session_to_json(st.session(req.matches[1])), "application/json");
    }));

    svr.Get(R"(/api/session/([^/]+)/round/([^/]+))",
            guarded([&st](const httplib::Request& req, httplib::Response& res) {
                const std::size_t round = parse_index(req.matches[2], "round");
                res.set_content(round_view_to_json(st.round_view(req.matches[1], round)), "application/json");
            }));

    svr.Post(R"(/api/session/([^/]+)/answer)", guarded([&st](const httplib::Request& req, httplib::Response& res) {
        const json body = parse_body(req);
        const auto result = st.answer(req.matches[1], json_index(body, "round"), json_index(body, "question"),
                                      parse_verdict(json_string(body, "choice")));
        res.set_content(answer_to_json(result), "application/json");
    }));

    svr.Post("/api/whatif", guarded([&st](const httplib::Request& req, httplib::Response& res) {
        const json body = parse_body(req);
        const std::string id = json_string(body, "session");
        const std::size_t round = body.contains("round") ? json_index(body, "round") : 1;
        const std::size_t month = body.contains("t*") ? json_index(body, "t*") : json_index(body, "month");
        const Direction direction = parse_direction(json_string(body, "direction"));
        std::optional<double> delta;
        for (const char* key : {"delta", "\xCE\xB4"}) {
            if (body.contains(key)) {
                if (!body[key].is_number()) throw ValidationError("perturbation magnitude must be a number");
                delta = body[key].get<double>();
            }
        }
        const auto session = st.session(id);
        const auto result = st.whatif(id, round, month, direction, delta);
        res.set_content(whatif_to_json(result, session.group == Group::Treatment), "application/json");
    }));

    svr.Get("/api/export", guarded([&st](const httplib::Request&, httplib::Response& res) {
        res.set_content(st.export_results(), "text/csv");
    }));

    if (!static_dir.empty() && !svr.set_mount_point("/", static_dir)) {
        throw ConfigError("static directory '" + static_dir + "' does not exist");
    }
}

StudyServer::~StudyServer() { stop(); }

int StudyServer::bind_any_port(const std::string& host) { return impl_->server.bind_to_any_port(host); }

bool StudyServer::bind(const std::string& host, int port) { return impl_->server.bind_to_port(host, port); }

bool StudyServer::listen_after_bind() { return impl_->server.listen_after_bind(); }

void StudyServer::stop() {
    if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

void StudyServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace tsfl
