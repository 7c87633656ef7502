#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "httplib.h"
#include "json.hpp"
#include "pseudovos/error.hpp"
#include "pseudovos/review.hpp"

// HTTP binding of ReviewService.
//
//   GET  /api/sequences
//   GET  /api/sequences/{id}
//   GET  /api/sequences/{id}/frames/{k}/image
//   GET  /api/sequences/{id}/frames/{k}/masks
//   POST /api/decisions
//   GET  /api/state
//   GET  /api/verdicts
//   GET  /api/queue
namespace pseudovos::review {

class ReviewServer {
public:
    explicit ReviewServer(ReviewService& service)
        : service_(service)
    {
        using httplib::Request;
        using httplib::Response;
        server_.set_default_headers({{"Access-Control-Allow-Origin", "*"}});

        server_.Get("/api/sequences", [this](const Request&, Response& res) { send(res, service_.list_sequences()); });
        server_.Get(R"(/api/sequences/([^/]+))", [this](const Request& req, Response& res) {
            send(res, service_.sequence_metadata(req.matches[1]), req.matches[1]);
        });
        server_.Get(R"(/api/sequences/([^/]+)/frames/(-?\d+)/masks)", [this](const Request& req, Response& res) {
            send(res, service_.frame_masks(req.matches[1], std::stoi(req.matches[2])), req.matches[1]);
        });
        server_.Get(R"(/api/sequences/([^/]+)/frames/(-?\d+)/image)", [this](const Request& req, Response& res) {
            try {
                const auto path = service_.frame_image_path(req.matches[1], std::stoi(req.matches[2]));
                std::ifstream in(path, std::ios::binary);
                require(static_cast<bool>(in), ErrorCategory::io, "cannot read frame " + path.string());
                std::ostringstream buf;
                buf << in.rdbuf();
                const auto ext = path.extension().string();
                res.set_content(buf.str(), ext == ".pgm" ? "image/x-portable-graymap"
                                           : ext == ".ppm" ? "image/x-portable-pixmap"
                                           : ext == ".png" ? "image/png"
                                           : ext == ".jpg" || ext == ".jpeg" ? "image/jpeg"
                                                                              : "application/octet-stream");
            } catch (const Error& e) {
                send(res, error_response(e), req.matches[1]);
            }
        });
        server_.Post("/api/decisions", [this](const Request& req, Response& res) {
            nlohmann::json body;
            try {
                body = nlohmann::json::parse(req.body);
            } catch (const nlohmann::json::exception& e) {
                send(res, error_response(Error(ErrorCategory::parse, e.what())));
                return;
            }
            send(res, service_.post_decision(body));
        });
        server_.Get("/api/state", [this](const Request&, Response& res) { send(res, service_.state()); });
        server_.Get("/api/verdicts", [this](const Request&, Response& res) { send(res, service_.verdicts()); });
        server_.Get("/api/queue", [this](const Request&, Response& res) { send(res, service_.queue()); });
    }

    // Binds to the port (0 picks a free one) and returns the bound port.
    int bind(const std::string& host, int port)
    {
        if (port == 0) {
            port_ = server_.bind_to_any_port(host);
            require(port_ > 0, ErrorCategory::io, "cannot bind to " + host);
        } else {
            require(server_.bind_to_port(host, port), ErrorCategory::io,
                    "cannot bind to " + host + ":" + std::to_string(port) + " (port busy?)");
            port_ = port;
        }
        return port_;
    }

    // Blocks until stop() is called.
    void listen() { server_.listen_after_bind(); }
    void stop() { server_.stop(); }
    void wait_until_ready() const { server_.wait_until_ready(); }
    int port() const noexcept { return port_; }

private:
    static void send(httplib::Response& res, const review::Response& r, const std::string& id = {})
    {
        nlohmann::json body = r.body;
        if (r.status == 404 && !id.empty())
            body["id"] = id;
        res.status = r.status;
        res.set_content(body.dump(), "application/json");
    }

    ReviewService& service_;
    httplib::Server server_;
    int port_ = 0;
};

} // namespace pseudovos::review
