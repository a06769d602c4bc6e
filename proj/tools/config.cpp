#include "config.hpp"

#include "pvsql/text.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <fstream>
#include <sstream>

namespace pvsql::cli {

namespace {

std::string unquote(std::string v) {
    v = text::trim(v);
    if (v.size() >= 2 && (v.front() == '"' || v.front() == '\'') && v.back() == v.front())
        return v.substr(1, v.size() - 2);
    return v;
}

int to_int(const std::string& key, const std::string& v, int lo) {
    int out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size() || out < lo)
        throw ConfigError(key + ": expected an integer >= " + std::to_string(lo) + ", got '" + v + "'");
    return out;
}

double to_double(const std::string& key, const std::string& v, double lo) {
    try {
        std::size_t used = 0;
        double out = std::stod(v, &used);
        if (used == v.size() && out >= lo) return out;
    } catch (const std::exception&) {
    }
    throw ConfigError(key + ": expected a number >= " + std::to_string(lo) + ", got '" + v + "'");
}

void walk(Config& c, const boost::property_tree::ptree& tree, const std::string& prefix) {
    for (const auto& [name, child] : tree) {
        auto key = prefix.empty() ? name : prefix + "." + name;
        if (child.empty()) set_config_value(c, key, child.data());
        else walk(c, child, key);
    }
}

}  // namespace

void set_config_value(Config& c, const std::string& raw_key, const std::string& raw_value) {
    auto key = text::lower(text::trim(raw_key));
    auto v = unquote(raw_value);
    if (key == "max_probes" || key == "k") c.agent.max_probes = to_int(key, v, 0);
    else if (key == "max_repairs" || key == "m") c.agent.max_repairs = to_int(key, v, 0);
    else if (key == "mode") {
        try {
            c.agent.mode = mode_from_string(v);
        } catch (const std::exception& e) {
            throw ConfigError(std::string("mode: ") + e.what());
        }
    } else if (key == "temperature") c.agent.temperature = to_double(key, v, 0.0);
    else if (key == "max_output_tokens") c.agent.max_output_tokens = to_int(key, v, 1);
    else if (key == "timeout_seconds") c.db.timeout_seconds = to_double(key, v, 0.001);
    else if (key == "probe_row_cap") c.db.probe_row_cap = static_cast<std::size_t>(to_int(key, v, 1));
    else if (key == "db_root") c.db_root = v;
    else if (key == "workers") c.workers = to_int(key, v, 0);
    else if (key == "backend" || key == "backend.kind") {
        if (v != "http" && v != "mock") throw ConfigError("backend.kind: expected http or mock, got '" + v + "'");
        c.backend.kind = v;
    } else if (key == "backend.endpoint" || key == "endpoint") c.backend.endpoint = v;
    else if (key == "backend.model" || key == "model") c.backend.model = v;
    else if (key == "backend.script_path" || key == "script_path") c.backend.script_path = v;
    else if (text::istarts_with(key, "extra.") || text::istarts_with(key, "backend.extra.")) {
        auto name = raw_key.substr(raw_key.rfind('.') + 1);
        c.backend.extra[text::trim(name)] = v;
    } else {
        throw ConfigError("unknown config key '" + raw_key + "'");
    }
}

Config parse_config(std::string_view text) {
    boost::property_tree::ptree tree;
    std::istringstream in{std::string(text)};
    try {
        boost::property_tree::ini_parser::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(e.what());
    }
    Config c;
    walk(c, tree, "");
    return c;
}

Config load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::unique_ptr<LlmBackend> make_backend(const BackendSpec& spec) {
    if (spec.kind == "mock") {
        if (spec.script_path.empty()) throw ConfigError("backend.kind = mock needs backend.script_path");
        try {
            return ScriptedBackend::from_file(spec.script_path);
        } catch (const std::exception& e) {
            throw ConfigError(std::string("mock script: ") + e.what());
        }
    }
    if (spec.endpoint.empty() || spec.model.empty())
        throw ConfigError("backend.kind = http needs backend.endpoint and backend.model");
    HttpBackendConfig http;
    http.endpoint = spec.endpoint;
    http.model = spec.model;
    http.extra = spec.extra;
    try {
        return std::make_unique<HttpBackend>(http);
    } catch (const BackendError& e) {
        throw ConfigError(e.what());
    }
}

}  // namespace pvsql::cli
