#pragma once

// Scripted stand-in for the completion endpoint. Speaks the same wire
// protocol as GenerationClient expects and logs every request it receives.
//
// Script file: one JSON object per line, either
//   {"prompt": "...", "text": "...", "token_logprobs": [...], "fault": "..."}
//   {"record_id": "...", ...same fields...}
//   {"default": true, "text": "...", "token_logprobs": [...]}
//   {"timeout_delay_ms": 2000}
// Entries may add "model": "<tag>" to apply only to requests for that model.
// Faults: "timeout" (stall, then 504), "http-error" (500), "no-logprobs".
// Lookup order: exact prompt, then the X-Record-Id header, then the default;
// at each step a model-specific entry wins over a model-agnostic one.

#include <halm/detail/io.hpp>
#include <halm/errors.hpp>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace halm::mock {

using json = nlohmann::json;

enum class Fault { none, timeout, http_error, no_logprobs };

inline std::optional<Fault> parse_fault(std::string_view s) {
    if (s.empty() || s == "none") return Fault::none;
    if (s == "timeout") return Fault::timeout;
    if (s == "http-error") return Fault::http_error;
    if (s == "no-logprobs") return Fault::no_logprobs;
    return std::nullopt;
}

struct ScriptedResponse {
    std::string text;
    std::vector<double> token_logprobs;
    Fault fault = Fault::none;
};

struct Script {
    // Keyed by (model, prompt) / (model, record id); an empty model matches any request.
    using Key = std::pair<std::string, std::string>;
    std::map<Key, ScriptedResponse> by_prompt;
    std::map<Key, ScriptedResponse> by_record_id;
    ScriptedResponse fallback{"UNKNOWN", {-5.0}, Fault::none};
    std::chrono::milliseconds timeout_delay{2000};

    void add_prompt(std::string prompt, ScriptedResponse r, std::string model = {}) {
        by_prompt[{std::move(model), std::move(prompt)}] = std::move(r);
    }
    void add_record(std::string record_id, ScriptedResponse r, std::string model = {}) {
        by_record_id[{std::move(model), std::move(record_id)}] = std::move(r);
    }

    const ScriptedResponse& lookup(const std::string& model, const std::string& prompt,
                                   const std::string& record_id) const {
        for (const auto& m : {model, std::string{}}) {
            if (auto it = by_prompt.find({m, prompt}); it != by_prompt.end()) return it->second;
        }
        if (!record_id.empty()) {
            for (const auto& m : {model, std::string{}}) {
                if (auto it = by_record_id.find({m, record_id}); it != by_record_id.end()) return it->second;
            }
        }
        return fallback;
    }
};

inline Script load_script(const std::filesystem::path& path) {
    Script s;
    const auto lines = detail::read_lines(path);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (detail::is_blank(lines[i])) continue;
        try {
            const auto j = json::parse(lines[i]);
            if (j.contains("timeout_delay_ms")) {
                s.timeout_delay = std::chrono::milliseconds(j.at("timeout_delay_ms").get<long>());
                if (j.size() == 1) continue;
            }
            ScriptedResponse r;
            r.text = j.value("text", std::string{});
            r.token_logprobs = j.value("token_logprobs", std::vector<double>{});
            const auto fault = parse_fault(j.value("fault", std::string{}));
            if (!fault) throw ParseError(i + 1, "unknown fault");
            r.fault = *fault;
            const auto model = j.value("model", std::string{});
            if (j.value("default", false)) {
                s.fallback = std::move(r);
            } else if (j.contains("prompt")) {
                s.add_prompt(j.at("prompt").get<std::string>(), std::move(r), model);
            } else if (j.contains("record_id")) {
                s.add_record(j.at("record_id").get<std::string>(), std::move(r), model);
            } else {
                throw ParseError(i + 1, "script entry needs prompt, record_id or default");
            }
        } catch (const json::exception& e) {
            throw ParseError(i + 1, path.string() + ": " + e.what());
        }
    }
    return s;
}

struct LoggedRequest {
    std::string model;
    std::string prompt;
    std::string record_id;
    std::string authorization;
    int max_tokens = 0;
    double temperature = -1;
};

struct StartupError : Error {
    explicit StartupError(const std::string& what) : Error(ErrorKind::config, what) {}
};

class MockService {
public:
    explicit MockService(Script script) : script_(std::move(script)) {
        // No SO_REUSEPORT: a second service on a busy port must fail to bind.
        server_.set_socket_options([](socket_t sock) {
            int yes = 1;
            ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof yes);
        });
        server_.Post(R"(.*)", [this](const httplib::Request& req, httplib::Response& res) { handle(req, res); });
        server_.Get("/_log", [this](const httplib::Request&, httplib::Response& res) {
            res.set_content(log_json().dump(), "application/json");
        });
    }
    MockService(const MockService&) = delete;
    MockService& operator=(const MockService&) = delete;
    ~MockService() { stop(); }

    /// Binds 127.0.0.1:`port` (0 picks a free port) and serves on a background thread.
    void start(int port = 0, const std::string& host = "127.0.0.1") {
        if (port == 0) {
            port_ = server_.bind_to_any_port(host);
            if (port_ <= 0) throw StartupError("mock service: cannot bind any port on " + host);
        } else {
            if (!server_.bind_to_port(host, port)) {
                throw StartupError("mock service: port " + std::to_string(port) + " is in use");
            }
            port_ = port;
        }
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }

    void stop() {
        if (server_.is_running()) server_.stop();
        if (thread_.joinable()) thread_.join();
    }

    int port() const noexcept { return port_; }
    std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

    std::vector<LoggedRequest> request_log() const {
        std::lock_guard lock(mu_);
        return log_;
    }

    std::size_t calls_for(const std::string& prompt) const {
        std::lock_guard lock(mu_);
        std::size_t n = 0;
        for (const auto& r : log_) n += r.prompt == prompt ? 1 : 0;
        return n;
    }

    void clear_log() {
        std::lock_guard lock(mu_);
        log_.clear();
    }

private:
    json log_json() const {
        json arr = json::array();
        for (const auto& r : request_log()) {
            arr.push_back({{"model", r.model},
                           {"prompt", r.prompt}, {"record_id", r.record_id}, {"max_tokens", r.max_tokens},
                           {"temperature", r.temperature}});
        }
        return arr;
    }

    void handle(const httplib::Request& req, httplib::Response& res) {
        json body;
        try {
            body = json::parse(req.body);
        } catch (const json::parse_error&) {
            res.status = 400;
            res.set_content(R"({"error":"invalid JSON"})", "application/json");
            return;
        }
        LoggedRequest entry;
        entry.model = body.value("model", std::string{});
        entry.prompt = body.value("prompt", std::string{});
        entry.record_id = req.get_header_value("X-Record-Id");
        entry.authorization = req.get_header_value("Authorization");
        entry.max_tokens = body.value("max_tokens", 0);
        entry.temperature = body.value("temperature", -1.0);
        {
            std::lock_guard lock(mu_);
            log_.push_back(entry);
        }
        const auto& r = script_.lookup(entry.model, entry.prompt, entry.record_id);
        switch (r.fault) {
            case Fault::timeout:
                std::this_thread::sleep_for(script_.timeout_delay);
                res.status = 504;
                return;
            case Fault::http_error:
                res.status = 500;
                res.set_content(R"({"error":"scripted failure"})", "application/json");
                return;
            case Fault::no_logprobs:
                res.set_content(json{{"choices", json::array({json{{"text", r.text}, {"index", 0}}})}}.dump(),
                                "application/json");
                return;
            case Fault::none:
                break;
        }
        const json choice{{"text", r.text}, {"index", 0}, {"logprobs", {{"token_logprobs", r.token_logprobs}}}};
        res.set_content(json{{"object", "text_completion"}, {"choices", json::array({choice})}}.dump(),
                        "application/json");
    }

    Script script_;
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
    mutable std::mutex mu_;
    std::vector<LoggedRequest> log_;
};

}  // namespace halm::mock
