#include "pvsql/json_codec.hpp"
#include "pvsql/llm.hpp"
#include "pvsql/text.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

namespace pvsql {

namespace {

using Clock = std::chrono::steady_clock;

std::int64_t estimate_tokens(std::string_view s) { return static_cast<std::int64_t>((s.size() + 3) / 4); }

bool transient_status(int status) { return status == 408 || status == 429 || status >= 500; }

}  // namespace

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
    if (config_.api_key.empty()) {
        if (const char* key = std::getenv("PVSQL_API_KEY")) config_.api_key = key;
    }
    const auto& url = config_.endpoint;
    auto scheme = url.find("://");
    if (scheme == std::string::npos) throw BackendError("endpoint must be an http(s) URL: " + url);
    auto slash = url.find('/', scheme + 3);
    base_ = url.substr(0, slash);
    path_ = slash == std::string::npos ? "/" : url.substr(slash);
}

ChatResponse HttpBackend::complete(const ChatRequest& request) {
    Json body = {
        {"model", config_.model},
        {"messages", Json::array({{{"role", "user"}, {"content", request.text}}})},
        {"temperature", request.temperature},
        {"max_tokens", request.max_output_tokens},
    };
    for (const auto& [key, value] : config_.extra) {
        auto parsed = Json::parse(value, nullptr, false);
        body[key] = parsed.is_discarded() ? Json(value) : parsed;
    }
    auto payload = body.dump();

    httplib::Headers headers;
    if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

    std::string last_error;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        if (attempt > 0) {
            auto delay = config_.backoff_base_seconds * std::pow(2.0, attempt - 1);
            spdlog::warn("llm: retry {}/{} after {:.2f}s ({})", attempt, config_.max_retries, delay, last_error);
            std::this_thread::sleep_for(std::chrono::duration<double>(delay));
        }
        httplib::Client client(base_);
        auto secs = std::chrono::duration<double>(config_.timeout_seconds);
        client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(secs));
        client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(secs));
        auto t0 = Clock::now();
        auto res = client.Post(path_, headers, payload, "application/json");
        double latency = std::chrono::duration<double>(Clock::now() - t0).count();
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 401 || res->status == 403)
            throw AuthError("backend rejected credentials (HTTP " + std::to_string(res->status) + ")");
        if (transient_status(res->status)) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status < 200 || res->status >= 300)
            throw BackendError("HTTP " + std::to_string(res->status) + ": " + text::ellipsize(res->body, 300));

        auto reply = Json::parse(res->body, nullptr, false);
        if (reply.is_discarded()) throw BackendError("backend returned invalid JSON");
        ChatResponse out;
        out.latency_seconds = latency;
        try {
            const auto& content = reply.at("choices").at(0).at("message").at("content");
            out.text = content.is_string() ? content.get<std::string>() : "";
        } catch (const Json::exception&) {
            throw BackendError("backend response has no choices[0].message.content");
        }
        auto usage = reply.find("usage");
        if (usage != reply.end() && usage->is_object() && usage->contains("prompt_tokens") &&
            usage->contains("completion_tokens")) {
            out.tokens_in = usage->at("prompt_tokens").get<std::int64_t>();
            out.tokens_out = usage->at("completion_tokens").get<std::int64_t>();
        } else {
            out.tokens_in = estimate_tokens(request.text);
            out.tokens_out = estimate_tokens(out.text);
            out.estimated = true;
        }
        return out;
    }
    throw BackendError("backend unavailable after " + std::to_string(config_.max_retries) + " retries: " + last_error);
}

ScriptedBackend::ScriptedBackend(std::vector<ScriptStep> steps) : steps_(std::move(steps)) {}

std::vector<ScriptStep> ScriptedBackend::parse_script(std::string_view json_text) {
    auto doc = Json::parse(json_text, nullptr, false);
    if (doc.is_discarded() || !doc.is_array()) throw std::invalid_argument("mock script must be a JSON array");
    std::vector<ScriptStep> steps;
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const auto& e = doc[i];
        try {
            ScriptStep s;
            s.expect_kind = prompt_kind_from_string(e.at("expect_kind").get<std::string>());
            s.response_text = e.at("response_text").get<std::string>();
            s.tokens_in = e.value("tokens_in", std::int64_t{0});
            s.tokens_out = e.value("tokens_out", std::int64_t{0});
            steps.push_back(std::move(s));
        } catch (const std::exception& ex) {
            throw std::invalid_argument("mock script entry " + std::to_string(i) + ": " + ex.what());
        }
    }
    return steps;
}

std::unique_ptr<ScriptedBackend> ScriptedBackend::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot read mock script " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return std::make_unique<ScriptedBackend>(parse_script(ss.str()));
}

ChatResponse ScriptedBackend::complete(const ChatRequest& request) {
    std::lock_guard<std::mutex> lock(mu_);
    requests_.push_back(request);
    if (next_ >= steps_.size())
        throw BackendError("mock script exhausted after " + std::to_string(steps_.size()) + " responses");
    const auto& step = steps_[next_];
    if (step.expect_kind != request.kind) {
        throw ScriptMismatch("mock script step " + std::to_string(next_) + " expects a " +
                             std::string(to_string(step.expect_kind)) + " prompt but got " +
                             std::string(to_string(request.kind)));
    }
    ++next_;
    return ChatResponse{step.response_text, step.tokens_in, step.tokens_out, 0.0, false};
}

std::vector<ChatRequest> ScriptedBackend::requests() const {
    std::lock_guard<std::mutex> lock(mu_);
    return requests_;
}

std::size_t ScriptedBackend::remaining() const {
    std::lock_guard<std::mutex> lock(mu_);
    return steps_.size() - next_;
}

LlmSession::LlmSession(LlmBackend& backend, double temperature, int max_output_tokens)
    : backend_(backend), temperature_(temperature), max_output_tokens_(max_output_tokens) {}

ChatResponse LlmSession::call(PromptKind kind, std::string text) {
    ChatRequest req{kind, std::move(text), temperature_, max_output_tokens_};
    spdlog::debug("llm {} prompt:\n{}", to_string(kind), req.text);
    requests_.push_back(req);
    auto resp = backend_.complete(req);
    tokens_in_ += resp.tokens_in;
    tokens_out_ += resp.tokens_out;
    responses_.push_back(resp);
    spdlog::debug("llm {} response ({} in / {} out):\n{}", to_string(kind), resp.tokens_in, resp.tokens_out, resp.text);
    return resp;
}

}  // namespace pvsql
