#pragma once

// Chat-completion backends, prompt rendering and structured-output parsing.

#include "pvsql/core.hpp"

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pvsql {

enum class PromptKind { probe, generate, repair, error_judge, probe_judge, llm_extract, llm_verify };

std::string_view to_string(PromptKind k);
PromptKind prompt_kind_from_string(std::string_view s);

struct ChatRequest {
    PromptKind kind = PromptKind::probe;
    std::string text;
    double temperature = 0.0;
    int max_output_tokens = 1024;
};

struct ChatResponse {
    std::string text;
    std::int64_t tokens_in = 0;
    std::int64_t tokens_out = 0;
    double latency_seconds = 0.0;
    bool estimated = false;  // token counts guessed from text length
};

class BackendError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Rejected credentials. Never retried.
class AuthError : public BackendError {
public:
    using BackendError::BackendError;
};

// The scripted backend received a prompt kind other than the one it expected.
class ScriptMismatch : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

class LlmBackend {
public:
    virtual ~LlmBackend() = default;
    // Thread-safe.
    virtual ChatResponse complete(const ChatRequest& request) = 0;
    // False for backends that must serve one task at a time.
    virtual bool supports_concurrency() const { return true; }
};

struct HttpBackendConfig {
    std::string endpoint;  // full URL of the chat completions route
    std::string model;
    std::string api_key;   // empty: read PVSQL_API_KEY
    std::map<std::string, std::string> extra;  // merged into the request body
    int max_retries = 3;
    double backoff_base_seconds = 0.5;
    double timeout_seconds = 120.0;
};

// OpenAI-style `POST .../chat/completions` with a single user message.
class HttpBackend : public LlmBackend {
public:
    explicit HttpBackend(HttpBackendConfig config);
    ChatResponse complete(const ChatRequest& request) override;

private:
    HttpBackendConfig config_;
    std::string base_;  // scheme://host[:port]
    std::string path_;
};

struct ScriptStep {
    PromptKind expect_kind = PromptKind::probe;
    std::string response_text;
    std::int64_t tokens_in = 0;
    std::int64_t tokens_out = 0;
};

// Replays a fixed list of responses in order.
class ScriptedBackend : public LlmBackend {
public:
    explicit ScriptedBackend(std::vector<ScriptStep> steps);
    static std::unique_ptr<ScriptedBackend> from_file(const std::filesystem::path& path);
    static std::vector<ScriptStep> parse_script(std::string_view json_text);

    ChatResponse complete(const ChatRequest& request) override;
    bool supports_concurrency() const override { return false; }

    std::vector<ChatRequest> requests() const;
    std::size_t remaining() const;

private:
    mutable std::mutex mu_;
    std::vector<ScriptStep> steps_;
    std::size_t next_ = 0;
    std::vector<ChatRequest> requests_;
};

// Per-task call wrapper that accumulates token usage.
class LlmSession {
public:
    LlmSession(LlmBackend& backend, double temperature = 0.0, int max_output_tokens = 1024);

    ChatResponse call(PromptKind kind, std::string text);

    std::int64_t tokens_in() const { return tokens_in_; }
    std::int64_t tokens_out() const { return tokens_out_; }
    int calls() const { return static_cast<int>(requests_.size()); }
    const std::vector<ChatResponse>& responses() const { return responses_; }
    const std::vector<ChatRequest>& requests() const { return requests_; }

private:
    LlmBackend& backend_;
    double temperature_;
    int max_output_tokens_;
    std::int64_t tokens_in_ = 0;
    std::int64_t tokens_out_ = 0;
    std::vector<ChatResponse> responses_;
    std::vector<ChatRequest> requests_;
};

// ---- prompts ---------------------------------------------------------------

class MissingPlaceholder : public std::runtime_error {
public:
    explicit MissingPlaceholder(const std::string& name)
        : std::runtime_error("missing prompt placeholder {" + name + "}"), name_(name) {}
    const std::string& name() const { return name_; }

private:
    std::string name_;
};

using PromptContext = std::map<std::string, std::string>;

std::string_view prompt_template(PromptKind kind);
// Placeholder names of a template, in order of first appearance.
std::vector<std::string> prompt_placeholders(PromptKind kind);
// Lines starting with "## " in a template.
std::vector<std::string> prompt_headings(PromptKind kind);

std::string render_prompt(PromptKind kind, const PromptContext& context);

// CREATE TABLE statements, one per table, with primary and foreign keys.
std::string render_schema(const SchemaDescription& schema);
// "(none)" for an empty history; otherwise each probe's SQL and its first
// `max_rows` rows, cells cut at `max_cell_chars`.
std::string render_probe_history(const std::vector<ProbeRecord>& probes, std::size_t max_rows = 5,
                                 std::size_t max_cell_chars = 200);
// Probe history plus merged value mappings, relevant columns and insights.
std::string render_probe_observations(const GroundingContext& grounding);
std::string render_constraints(const std::vector<Constraint>& constraints);
std::string render_violations(const std::vector<Violation>& violations);
// Empty text rendered as "(none)".
std::string or_none(std::string_view s);

// ---- structured output -----------------------------------------------------

class Unparseable : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class EmptyAnswer : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class ProbeAction { probe, done };

struct ProbeDecision {
    ProbeAction action = ProbeAction::done;
    std::optional<std::string> probe_sql;
    ColumnMap relevant_columns;
    ValueMap value_mappings;
    std::string insight;  // optional free text the model may add
};

ProbeDecision parse_probe_decision(std::string_view text);
std::string parse_sql_answer(std::string_view text);

ErrorClass parse_error_verdict(std::string_view text);

struct ProbeVerdict {
    int probe_index = 0;
    bool relevant = false;
    bool new_insight = false;
    bool redundant = false;
    std::string reasoning;
};
std::vector<ProbeVerdict> parse_probe_verdicts(std::string_view text);

struct LlmConstraint {
    std::string type;
    std::string description;
    std::string sql_hint;
};
struct LlmExtraction {
    std::vector<LlmConstraint> constraints;
    std::vector<std::string> expected_columns;
    std::string expected_type;
};
LlmExtraction parse_llm_extraction(std::string_view text);

struct LlmIssue {
    std::string severity;
    std::string category;
    std::string description;
    std::string suggestion;
};
struct LlmVerification {
    bool is_valid = false;
    std::vector<LlmIssue> issues;
};
LlmVerification parse_llm_verification(std::string_view text);

// First balanced {...} in the text that parses as a JSON object, as
// serialized JSON. Throws Unparseable.
std::string extract_json_object(std::string_view text);

}  // namespace pvsql
