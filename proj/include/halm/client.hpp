#pragma once

// Client for a completion-style text-generation service, with a
// content-addressed on-disk response cache and an order-preserving
// concurrent corpus runner.
//
// Wire contract (POST <base>/v1/completions unless the URL carries a path):
//   request  {"model", "prompt", "max_tokens", "temperature": 0, "logprobs": 1}
//   response {"choices": [{"text": "...", "logprobs": {"token_logprobs": [...]}}]}
// Optional header X-Record-Id carries the record id; services may ignore it.

#include <halm/corpus.hpp>
#include <halm/errors.hpp>
#include <halm/hash.hpp>
#include <halm/inference.hpp>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace halm {

inline constexpr int default_max_new_tokens = 32;

struct GenerationRequest {
    std::string prompt;
    int max_new_tokens = default_max_new_tokens;
    // Greedy decoding is the only mode issued; log-probabilities are always requested.
};

struct GenerationResult {
    std::string text;
    std::vector<double> token_logprobs;

    friend bool operator==(const GenerationResult&, const GenerationResult&) = default;
};

struct EndpointConfig {
    std::string url = "http://127.0.0.1:8080";
    std::string model_tag = "model";
    std::string auth_token;
    int max_retries = 3;
    std::chrono::milliseconds backoff{200};
    std::chrono::milliseconds timeout{30000};
};

/// Canonical key material; any difference in model, prompt or decoding parameters changes the key.
inline json cache_key_material(const std::string& model_tag, const GenerationRequest& req) {
    return json{{"model_tag", model_tag},
                {"prompt", req.prompt},
                {"max_new_tokens", req.max_new_tokens},
                {"decoding", "greedy"},
                {"logprobs", true}};
}

inline std::string cache_key(const std::string& model_tag, const GenerationRequest& req) {
    return sha256_hex(cache_key_material(model_tag, req).dump());
}

/// One JSON file per response under <root>/<first two hex chars>/<key>.json.
class ResponseCache {
public:
    explicit ResponseCache(std::filesystem::path root) : root_(std::move(root)) {}

    const std::filesystem::path& root() const noexcept { return root_; }

    std::filesystem::path path_for(const std::string& key) const { return root_ / key.substr(0, 2) / (key + ".json"); }

    std::optional<GenerationResult> load(const std::string& key) const {
        const auto path = path_for(key);
        std::error_code ec;
        if (!std::filesystem::exists(path, ec)) return std::nullopt;
        try {
            const auto j = json::parse(detail::read_file(path));
            return GenerationResult{j.at("text").get<std::string>(),
                                    j.at("token_logprobs").get<std::vector<double>>()};
        } catch (const std::exception&) {
            return std::nullopt;  // unreadable entries are refetched
        }
    }

    void store(const std::string& key, const json& key_material, const GenerationResult& r) const {
        const json j{{"key", key_material}, {"text", r.text}, {"token_logprobs", r.token_logprobs}};
        detail::write_file_atomic(path_for(key), j.dump() + "\n");
    }

private:
    std::filesystem::path root_;
};

namespace detail {

struct ParsedUrl {
    std::string scheme_host_port;
    std::string path;
};

inline ParsedUrl parse_endpoint_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("endpoint URL needs a scheme: " + url);
    if (url.compare(0, scheme_end, "http") != 0) throw ConfigError("only http:// endpoints are supported: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos || path_start + 1 == url.size()) {
        return {url.substr(0, path_start), "/v1/completions"};
    }
    return {url.substr(0, path_start), url.substr(path_start)};
}

inline bool is_transient_status(int status) { return status == 408 || status == 429 || status >= 500; }

}  // namespace detail

/// Parses a completion response body. Missing log-probabilities raise CapabilityError.
inline GenerationResult parse_completion_response(const std::string& body, const std::string& context) {
    json j;
    try {
        j = json::parse(body);
    } catch (const json::parse_error& e) {
        throw TransportError(context + ": unparseable response body: " + e.what());
    }
    if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty()) {
        throw TransportError(context + ": response has no choices");
    }
    const auto& choice = j["choices"][0];
    GenerationResult r;
    r.text = choice.value("text", std::string{});
    const bool has_logprobs = choice.contains("logprobs") && choice["logprobs"].is_object() &&
                              choice["logprobs"].contains("token_logprobs") &&
                              choice["logprobs"]["token_logprobs"].is_array();
    if (!has_logprobs) {
        throw CapabilityError(context +
                              ": endpoint returned no per-token log-probabilities; enable logprobs on the service");
    }
    for (const auto& v : choice["logprobs"]["token_logprobs"]) {
        if (!v.is_number()) throw CapabilityError(context + ": null or non-numeric token log-probability");
        r.token_logprobs.push_back(v.get<double>());
    }
    return r;
}

class GenerationClient {
public:
    GenerationClient(EndpointConfig endpoint, std::optional<ResponseCache> cache)
        : endpoint_(std::move(endpoint)), url_(detail::parse_endpoint_url(endpoint_.url)), cache_(std::move(cache)) {}

    const EndpointConfig& endpoint() const noexcept { return endpoint_; }

    /// Cached or fetched result. `record_id` is used for error context and the X-Record-Id header.
    GenerationResult generate(const GenerationRequest& req, const std::string& record_id = {}) {
        if (req.max_new_tokens <= 0) throw ConfigError("max_new_tokens must be positive");
        const json key_material = cache_key_material(endpoint_.model_tag, req);
        const std::string key = sha256_hex(key_material.dump());
        if (cache_) {
            if (auto hit = cache_->load(key)) {
                cache_hits_.fetch_add(1);
                return *hit;
            }
        }
        GenerationResult r = fetch(req, record_id);
        if (cache_) cache_->store(key, key_material, r);
        return r;
    }

    /// Number of HTTP round-trips issued, retries included.
    std::size_t network_calls() const noexcept { return network_calls_.load(); }
    std::size_t cache_hits() const noexcept { return cache_hits_.load(); }

private:
    GenerationResult fetch(const GenerationRequest& req, const std::string& record_id) {
        const std::string context = record_id.empty() ? std::string("request") : "record " + record_id;
        const json body{{"model", endpoint_.model_tag},
                        {"prompt", req.prompt},
                        {"max_tokens", req.max_new_tokens},
                        {"temperature", 0.0},
                        {"logprobs", 1}};
        const std::string payload = body.dump();
        httplib::Headers headers;
        if (!endpoint_.auth_token.empty()) headers.emplace("Authorization", "Bearer " + endpoint_.auth_token);
        if (!record_id.empty()) headers.emplace("X-Record-Id", record_id);

        std::string last_error;
        int attempts = 0;
        for (int attempt = 0; attempt <= endpoint_.max_retries; ++attempt) {
            if (attempt > 0) std::this_thread::sleep_for(endpoint_.backoff * (1 << std::min(attempt - 1, 10)));
            httplib::Client http(url_.scheme_host_port);
            const auto secs = std::chrono::duration_cast<std::chrono::seconds>(endpoint_.timeout);
            const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(endpoint_.timeout - secs);
            http.set_connection_timeout(secs.count(), usecs.count());
            http.set_read_timeout(secs.count(), usecs.count());
            http.set_write_timeout(secs.count(), usecs.count());
            network_calls_.fetch_add(1);
            ++attempts;
            auto res = http.Post(url_.path, headers, payload, "application/json");
            if (!res) {
                last_error = "transport failure: " + httplib::to_string(res.error());
                continue;
            }
            if (res->status == 200) return parse_completion_response(res->body, context);
            last_error = "HTTP " + std::to_string(res->status);
            if (!detail::is_transient_status(res->status)) break;
        }
        throw TransportError(context + ": " + last_error + " after " + std::to_string(attempts) +
                             (attempts == 1 ? " attempt" : " attempts"));
    }

    EndpointConfig endpoint_;
    detail::ParsedUrl url_;
    std::optional<ResponseCache> cache_;
    std::atomic<std::size_t> network_calls_{0};
    std::atomic<std::size_t> cache_hits_{0};
};

/// A corpus run stopped early; lists the ids that did complete, in corpus order.
class RunAborted : public Error {
public:
    RunAborted(ErrorKind kind, const std::string& what, std::string failed_id, std::vector<std::string> done)
        : Error(kind, what), failed_id_(std::move(failed_id)), done_(std::move(done)) {}

    const std::string& failed_id() const noexcept { return failed_id_; }
    const std::vector<std::string>& done() const noexcept { return done_; }

    json manifest() const { return json{{"failed", failed_id_}, {"done", done_}, {"error", what()}}; }

private:
    std::string failed_id_;
    std::vector<std::string> done_;
};

struct RunOptions {
    PromptStyle style = PromptStyle::zeroshot_qa;
    int max_new_tokens = default_max_new_tokens;
    int max_in_flight = 1;
};

/// One Prediction per record, in corpus order regardless of completion order.
inline std::vector<Prediction> run_corpus(const Corpus& corpus, const PromptBuilder& prompts, GenerationClient& client,
                                          const RunOptions& opts) {
    if (opts.max_in_flight <= 0) throw ConfigError("max_in_flight must be positive");
    const auto& records = corpus.records();
    const std::size_t n = records.size();

    // Build every prompt up front so template and pool errors surface before any network traffic.
    std::vector<std::string> prompt_text;
    prompt_text.reserve(n);
    for (const auto& r : records) prompt_text.push_back(prompts(r));

    std::vector<std::optional<Prediction>> results(n);
    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};
    std::mutex failure_mu;
    std::optional<std::size_t> failed_at;
    std::optional<ErrorKind> failed_kind;
    std::string failed_what;

    auto worker = [&] {
        while (!stop.load()) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                auto g = client.generate({prompt_text[i], opts.max_new_tokens}, records[i].id);
                results[i] = make_prediction(records[i].id, std::move(g.text), std::move(g.token_logprobs),
                                             client.endpoint().model_tag, opts.style);
            } catch (const Error& e) {
                std::lock_guard lock(failure_mu);
                if (!failed_at || i < *failed_at) {
                    failed_at = i;
                    failed_kind = e.kind();
                    failed_what = e.what();
                }
                stop.store(true);
            }
        }
    };

    const auto workers = static_cast<std::size_t>(std::min<std::size_t>(opts.max_in_flight, std::max<std::size_t>(n, 1)));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    }

    if (failed_at) {
        std::vector<std::string> done;
        for (std::size_t i = 0; i < n; ++i) {
            if (results[i]) done.push_back(records[i].id);
        }
        throw RunAborted(*failed_kind, failed_what, records[*failed_at].id, std::move(done));
    }
    std::vector<Prediction> out;
    out.reserve(n);
    for (auto& r : results) out.push_back(std::move(*r));
    return out;
}

}  // namespace halm
