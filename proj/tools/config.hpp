#pragma once

// Flat INI-style run configuration shared by every subcommand.

#include "pvsql/agent.hpp"
#include "pvsql/executor.hpp"
#include "pvsql/llm.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>

namespace pvsql::cli {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct BackendSpec {
    std::string kind = "http";  // http | mock
    std::string endpoint;
    std::string model;
    std::string script_path;
    std::map<std::string, std::string> extra;
};

struct Config {
    AgentConfig agent;
    DbOptions db;
    std::filesystem::path db_root;
    BackendSpec backend;
    int workers = 0;  // 0: one per CPU
};

// Keys may be written bare or under a [section]; "[backend]\nkind = mock" and
// "backend.kind = mock" are the same key. The [extra] section (or extra.*
// keys) is passed through to the HTTP request body. Unknown keys and bad
// values throw ConfigError.
Config parse_config(std::string_view text);
Config load_config(const std::filesystem::path& path);

// Applies one key/value pair, as parse_config does.
void set_config_value(Config& config, const std::string& key, const std::string& value);

std::unique_ptr<LlmBackend> make_backend(const BackendSpec& spec);

}  // namespace pvsql::cli
