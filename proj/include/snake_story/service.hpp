#pragma once

// HTTP and WebSocket front end for SessionHub, on Boost.Beast.
//
//   POST /sessions              create, 201 {session_id, ws_url}
//   GET  /sessions              index of sessions
//   GET  /sessions/{id}/log     log bytes so far
//   WS   /sessions/{id}/ws      wire_v1 stream
//   GET  /...                   static files from the web root

#include <atomic>
#include <deque>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "snake_story/session_hub.hpp"

namespace snake_story {

namespace service_detail {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

using Request = http::request<http::string_body>;

inline std::string_view to_std(beast::string_view s) { return {s.data(), s.size()}; }
inline beast::string_view to_beast(std::string_view s) { return {s.data(), s.size()}; }
using Response = http::response<http::string_body>;

// Close code sent to a socket replaced by a newer connection.
inline constexpr std::uint16_t kTakeoverCloseCode = 4000;

inline Response make_response(const Request& req, http::status status, std::string body,
                              std::string_view content_type = "application/json") {
    Response res{status, req.version()};
    res.set(http::field::server, "snake-story");
    res.set(http::field::content_type, to_beast(content_type));
    res.keep_alive(req.keep_alive());
    res.body() = std::move(body);
    res.prepare_payload();
    return res;
}

inline Response json_response(const Request& req, http::status status, const nlohmann::json& j) {
    return make_response(req, status, j.dump());
}

inline Response error_response(const Request& req, http::status status, std::string_view message) {
    return json_response(req, status, {{"error", message}});
}

inline std::vector<std::string> split_path(std::string_view target) {
    if (auto q = target.find('?'); q != std::string_view::npos) target = target.substr(0, q);
    std::vector<std::string> parts;
    std::size_t i = 0;
    while (i < target.size()) {
        while (i < target.size() && target[i] == '/') ++i;
        std::size_t j = i;
        while (j < target.size() && target[j] != '/') ++j;
        if (j > i) parts.emplace_back(target.substr(i, j - i));
        i = j;
    }
    return parts;
}

inline std::string_view mime_type(const std::filesystem::path& p) {
    const auto ext = p.extension().string();
    if (ext == ".html" || ext == ".htm") return "text/html; charset=utf-8";
    if (ext == ".js" || ext == ".mjs") return "text/javascript";
    if (ext == ".css") return "text/css";
    if (ext == ".json") return "application/json";
    if (ext == ".svg") return "image/svg+xml";
    if (ext == ".png") return "image/png";
    if (ext == ".ico") return "image/x-icon";
    return "application/octet-stream";
}

inline std::optional<std::string> read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline Response serve_static(const Request& req, const std::filesystem::path& root) {
    if (root.empty()) return error_response(req, http::status::not_found, "no web root configured");
    auto parts = split_path(to_std(req.target()));
    std::filesystem::path p = root;
    for (const auto& part : parts) {
        if (part == ".." || part == "." || part.find('\\') != std::string::npos) {
            return error_response(req, http::status::bad_request, "bad path");
        }
        p /= part;
    }
    std::error_code ec;
    if (std::filesystem::is_directory(p, ec)) p /= "index.html";
    auto body = read_file(p);
    if (!body) return error_response(req, http::status::not_found, "not found");
    return make_response(req, http::status::ok, std::move(*body), mime_type(p));
}

// Handles one plain HTTP request against the hub.
inline Response handle_http(SessionHub& hub, const Request& req) {
    const auto parts = split_path(to_std(req.target()));
    if (!parts.empty() && parts[0] == "sessions") {
        if (parts.size() == 1 && req.method() == http::verb::post) {
            nlohmann::json body;
            try {
                body = req.body().empty() ? nlohmann::json::object() : nlohmann::json::parse(req.body());
            } catch (const nlohmann::json::exception&) {
                return error_response(req, http::status::bad_request, "body is not valid JSON");
            }
            try {
                nlohmann::json created = hub.create(body);
                std::string host(req[http::field::host]);
                if (host.empty()) host = hub.config().bind_address + ":" + std::to_string(hub.config().port);
                created["ws_url"] = "ws://" + host + "/sessions/" + created["session_id"].get<std::string>() + "/ws";
                return json_response(req, http::status::created, created);
            } catch (const ConfigError& e) {
                return error_response(req, http::status::bad_request, e.what());
            } catch (const ProviderUnavailable& e) {
                return error_response(req, http::status::service_unavailable, e.what());
            }
        }
        if (parts.size() == 1 && req.method() == http::verb::get) {
            return json_response(req, http::status::ok, hub.list());
        }
        if (parts.size() == 3 && parts[2] == "log" && req.method() == http::verb::get) {
            try {
                return make_response(req, http::status::ok, hub.log_text(parts[1]), "text/plain; charset=utf-8");
            } catch (const UnknownSession& e) {
                return error_response(req, http::status::not_found, e.what());
            }
        }
        if (parts.size() == 3 && parts[2] == "ws") {
            if (!hub.contains(parts[1])) return error_response(req, http::status::not_found, "unknown session");
            return error_response(req, http::status::upgrade_required, "connect with a WebSocket client");
        }
        if (parts.size() <= 3) return error_response(req, http::status::method_not_allowed, "method not allowed");
        return error_response(req, http::status::not_found, "not found");
    }
    if (req.method() != http::verb::get && req.method() != http::verb::head) {
        return error_response(req, http::status::method_not_allowed, "method not allowed");
    }
    return serve_static(req, hub.config().web_root);
}

class WsSession : public std::enable_shared_from_this<WsSession> {
public:
    WsSession(tcp::socket&& socket, std::shared_ptr<SessionHub> hub, std::string id)
        : ws_(std::move(socket)), hub_(std::move(hub)), id_(std::move(id)) {}

    void run(Request req) {
        ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
        ws_.text(true);
        ws_.async_accept(req, beast::bind_front_handler(&WsSession::on_accept, shared_from_this()));
    }

private:
    void on_accept(beast::error_code ec) {
        if (ec) return;
        std::weak_ptr<WsSession> weak = shared_from_this();
        auto exec = ws_.get_executor();
        Listener l;
        l.notify = [weak, exec] {
            net::post(exec, [weak] {
                if (auto self = weak.lock()) self->flush();
            });
        };
        l.close = [weak, exec](const std::string& reason) {
            net::post(exec, [weak, reason] {
                if (auto self = weak.lock()) self->close(kTakeoverCloseCode, reason);
            });
        };
        try {
            gen_ = hub_->attach(id_, std::move(l));
        } catch (const UnknownSession& e) {
            close(websocket::close_code::policy_error, e.what());
            return;
        }
        do_read();
    }

    void do_read() {
        ws_.async_read(buffer_, beast::bind_front_handler(&WsSession::on_read, shared_from_this()));
    }

    void on_read(beast::error_code ec, std::size_t) {
        if (ec) {
            hub_->detach(id_, gen_);
            return;
        }
        const std::string text = beast::buffers_to_string(buffer_.data());
        buffer_.consume(buffer_.size());
        hub_->input(id_, gen_, text);
        do_read();
    }

    void flush() {
        if (closing_) return;
        Drained d = hub_->drain(id_, gen_);
        for (auto& m : d.messages) pending_.push_back(wire::envelope(m).dump());
        close_after_ = close_after_ || d.close_after;
        write_next();
    }

    void write_next() {
        if (writing_ || closing_) return;
        if (pending_.empty()) {
            if (close_after_) close(websocket::close_code::normal, "session ended");
            return;
        }
        writing_ = true;
        ws_.async_write(net::buffer(pending_.front()),
                        beast::bind_front_handler(&WsSession::on_write, shared_from_this()));
    }

    void on_write(beast::error_code ec, std::size_t) {
        writing_ = false;
        if (ec) return;
        if (closing_) {
            do_close();
            return;
        }
        pending_.pop_front();
        write_next();
    }

    void close(websocket::close_code code, std::string_view reason) { close(static_cast<std::uint16_t>(code), reason); }

    // Drops unsent messages and closes once any write in flight completes.
    void close(std::uint16_t code, std::string_view reason) {
        if (closing_) return;
        closing_ = true;
        pending_.clear();
        close_reason_ = websocket::close_reason(static_cast<websocket::close_code>(code), to_beast(reason));
        if (!writing_) do_close();
    }

    void do_close() {
        ws_.async_close(close_reason_, [self = shared_from_this()](beast::error_code) {});
    }

    websocket::stream<beast::tcp_stream> ws_;
    beast::flat_buffer buffer_;
    std::shared_ptr<SessionHub> hub_;
    std::string id_;
    std::uint64_t gen_ = 0;
    std::deque<std::string> pending_;
    bool writing_ = false;
    bool closing_ = false;
    bool close_after_ = false;
    websocket::close_reason close_reason_;
};

class HttpSession : public std::enable_shared_from_this<HttpSession> {
public:
    HttpSession(tcp::socket&& socket, std::shared_ptr<SessionHub> hub)
        : stream_(std::move(socket)), hub_(std::move(hub)) {}

    void run() {
        net::dispatch(stream_.get_executor(), beast::bind_front_handler(&HttpSession::do_read, shared_from_this()));
    }

private:
    void do_read() {
        req_ = {};
        stream_.expires_after(std::chrono::seconds(30));
        http::async_read(stream_, buffer_, req_, beast::bind_front_handler(&HttpSession::on_read, shared_from_this()));
    }

    void on_read(beast::error_code ec, std::size_t) {
        if (ec) {
            stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
            return;
        }
        if (websocket::is_upgrade(req_)) {
            const auto parts = split_path(to_std(req_.target()));
            if (parts.size() == 3 && parts[0] == "sessions" && parts[2] == "ws" && hub_->contains(parts[1])) {
                stream_.expires_never();
                std::make_shared<WsSession>(stream_.release_socket(), hub_, parts[1])->run(std::move(req_));
                return;
            }
            send(error_response(req_, http::status::not_found, "unknown session"));
            return;
        }
        Response res;
        try {
            res = handle_http(*hub_, req_);
        } catch (const std::exception& e) {
            res = error_response(req_, http::status::internal_server_error, e.what());
        }
        send(std::move(res));
    }

    void send(Response res) {
        res_ = std::make_shared<Response>(std::move(res));
        http::async_write(stream_, *res_, beast::bind_front_handler(&HttpSession::on_write, shared_from_this()));
    }

    void on_write(beast::error_code ec, std::size_t) {
        if (ec) return;
        if (!res_->keep_alive()) {
            stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
            return;
        }
        res_.reset();
        do_read();
    }

    beast::tcp_stream stream_;
    beast::flat_buffer buffer_;
    Request req_;
    std::shared_ptr<Response> res_;
    std::shared_ptr<SessionHub> hub_;
};

}  // namespace service_detail

// Owns the listening socket, the worker threads and the ticker that drives
// live games. start() returns once the port is bound.
class Server {
public:
    Server(ServiceConfig config, std::shared_ptr<Clock> clock = std::make_shared<SystemClock>(),
           ProviderFactory factory = default_provider_factory())
        : hub_(std::make_shared<SessionHub>(std::move(config), std::move(clock), std::move(factory))),
          ioc_(std::max(1, hub_->config().threads)), acceptor_(ioc_), ticker_(ioc_) {}

    ~Server() { stop(); }

    SessionHub& hub() { return *hub_; }
    unsigned short port() const { return port_; }

    void start() {
        namespace net = service_detail::net;
        using service_detail::tcp;
        const auto& c = hub_->config();
        tcp::endpoint ep{net::ip::make_address(c.bind_address), c.port};
        acceptor_.open(ep.protocol());
        acceptor_.set_option(net::socket_base::reuse_address(true));
        acceptor_.bind(ep);
        acceptor_.listen(net::socket_base::max_listen_connections);
        port_ = acceptor_.local_endpoint().port();
        do_accept();
        schedule_tick();
        for (int i = 0; i < std::max(1, c.threads); ++i) threads_.emplace_back([this] { ioc_.run(); });
    }

    // Blocks until stop() is called from elsewhere (or a signal handler).
    void wait() {
        for (auto& t : threads_) {
            if (t.joinable()) t.join();
        }
    }

    void stop() {
        if (stopped_.exchange(true)) return;
        ioc_.stop();
        wait();
    }

private:
    void do_accept() {
        acceptor_.async_accept(service_detail::net::make_strand(ioc_),
                               [this](boost::beast::error_code ec, service_detail::tcp::socket socket) {
                                   if (!ec) {
                                       std::make_shared<service_detail::HttpSession>(std::move(socket), hub_)->run();
                                   }
                                   if (acceptor_.is_open()) do_accept();
                               });
    }

    // Each live session ticks on the worker pool, so a slow provider call
    // holds up only its own session.
    void schedule_tick() {
        ticker_.expires_after(hub_->config().tick_period);
        ticker_.async_wait([this](boost::beast::error_code ec) {
            if (ec) return;
            for (const auto& id : hub_->ids()) {
                service_detail::net::post(ioc_, [hub = hub_, id] { hub->tick_session(id); });
            }
            schedule_tick();
        });
    }

    std::shared_ptr<SessionHub> hub_;
    service_detail::net::io_context ioc_;
    service_detail::tcp::acceptor acceptor_;
    service_detail::net::steady_timer ticker_;
    std::vector<std::thread> threads_;
    unsigned short port_ = 0;
    std::atomic<bool> stopped_{false};
};

}  // namespace snake_story
