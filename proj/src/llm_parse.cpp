#include "pvsql/json_codec.hpp"
#include "pvsql/llm.hpp"
#include "pvsql/text.hpp"

#include <cctype>

namespace pvsql {

namespace {

// End offset (exclusive) of the balanced object starting at `open`, or npos.
std::size_t matching_brace(std::string_view s, std::size_t open) {
    int depth = 0;
    bool in_string = false;
    for (std::size_t i = open; i < s.size(); ++i) {
        char c = s[i];
        if (in_string) {
            if (c == '\\') ++i;
            else if (c == '"') in_string = false;
            continue;
        }
        if (c == '"') in_string = true;
        else if (c == '{') ++depth;
        else if (c == '}' && --depth == 0) return i + 1;
    }
    return std::string_view::npos;
}

Json first_object(std::string_view text) {
    for (auto pos = text.find('{'); pos != std::string_view::npos; pos = text.find('{', pos + 1)) {
        auto end = matching_brace(text, pos);
        if (end == std::string_view::npos) continue;
        auto parsed = Json::parse(text.substr(pos, end - pos), nullptr, false);
        if (!parsed.is_discarded() && parsed.is_object()) return parsed;
    }
    throw Unparseable("no JSON object found in model output");
}

std::string as_text(const Json& j) {
    if (j.is_string()) return j.get<std::string>();
    if (j.is_null()) return "";
    return j.dump();
}

std::string text_field(const Json& obj, const char* key) {
    auto it = obj.find(key);
    return it == obj.end() ? "" : as_text(*it);
}

bool bool_field(const Json& obj, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end()) return false;
    if (it->is_boolean()) return it->get<bool>();
    if (it->is_number()) return it->get<double>() != 0;
    if (it->is_string()) {
        auto v = text::lower(text::trim(it->get<std::string>()));
        return v == "true" || v == "yes" || v == "1";
    }
    return false;
}

bool starts_keyword(std::string_view s, std::size_t pos, std::string_view kw) {
    if (pos > 0 && text::is_word_char(s[pos - 1])) return false;
    if (!text::istarts_with(s.substr(pos), kw)) return false;
    auto end = pos + kw.size();
    return end == s.size() || !text::is_word_char(s[end]);
}

std::size_t find_keyword(std::string_view s, std::string_view kw, bool line_start_only) {
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!starts_keyword(s, i, kw)) continue;
        if (!line_start_only) return i;
        auto j = i;
        while (j > 0 && (s[j - 1] == ' ' || s[j - 1] == '\t')) --j;
        if (j == 0 || s[j - 1] == '\n') return i;
    }
    return std::string_view::npos;
}

// Text up to the first ';' outside quotes and comments.
std::string first_statement(std::string_view s) {
    char quote = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        char c = s[i];
        if (quote) {
            if (c == quote) quote = 0;
            continue;
        }
        if (c == '\'' || c == '"' || c == '`') quote = c;
        else if (c == '[') quote = ']';
        else if (c == '-' && i + 1 < s.size() && s[i + 1] == '-') {
            auto nl = s.find('\n', i);
            if (nl == std::string_view::npos) break;
            i = nl;
        } else if (c == ';') {
            return std::string(s.substr(0, i));
        }
    }
    return std::string(s);
}

}  // namespace

std::string extract_json_object(std::string_view text) { return first_object(text).dump(); }

ProbeDecision parse_probe_decision(std::string_view text) {
    auto obj = first_object(text);
    ProbeDecision d;
    auto action = text::lower(text::trim(text_field(obj, "action")));
    auto sql = text::trim(text_field(obj, "probe_sql"));
    if (action == "probe") {
        if (sql.empty()) throw Unparseable("probe action without probe_sql");
        d.action = ProbeAction::probe;
        d.probe_sql = sql;
    } else if (action == "done") {
        d.action = ProbeAction::done;
    } else {
        throw Unparseable("unknown probe action \"" + action + "\"");
    }
    if (auto it = obj.find("relevant_columns"); it != obj.end() && it->is_object()) {
        for (const auto& [table, cols] : it->items()) {
            auto& list = d.relevant_columns[table];
            if (cols.is_array()) {
                for (const auto& c : cols) list.push_back(as_text(c));
            } else {
                list.push_back(as_text(cols));
            }
        }
    }
    if (auto it = obj.find("value_mappings"); it != obj.end() && it->is_object()) {
        for (const auto& [term, value] : it->items()) d.value_mappings[term] = as_text(value);
    }
    for (const char* key : {"insight", "insights"}) {
        auto it = obj.find(key);
        if (it == obj.end()) continue;
        if (it->is_array()) {
            std::vector<std::string> parts;
            for (const auto& x : *it) parts.push_back(as_text(x));
            d.insight = text::join(parts, "\n");
        } else {
            d.insight = as_text(*it);
        }
    }
    return d;
}

std::string parse_sql_answer(std::string_view answer) {
    std::string body(answer);
    if (auto fence = body.find("```"); fence != std::string::npos) {
        auto line_end = body.find('\n', fence);
        if (line_end != std::string::npos) {
            auto close = body.find("```", line_end);
            body = body.substr(line_end + 1, close == std::string::npos ? std::string::npos : close - line_end - 1);
        }
    }
    std::size_t start = std::string::npos;
    for (bool line_start : {true, false}) {
        for (std::string_view kw : {"SELECT", "WITH"}) {
            auto pos = find_keyword(body, kw, line_start);
            if (pos < start) start = pos;
        }
        if (start != std::string::npos) break;
    }
    if (start == std::string::npos) throw EmptyAnswer("model output contains no SQL statement");
    auto sql = text::trim(first_statement(std::string_view(body).substr(start)));
    if (sql.empty()) throw EmptyAnswer("model output contains no SQL statement");
    return sql;
}

ErrorClass parse_error_verdict(std::string_view text) {
    auto obj = first_object(text);
    auto kind = error_kind_from_string(text::trim(text_field(obj, "error_type")));
    if (!kind) throw Unparseable("unknown error_type \"" + text_field(obj, "error_type") + "\"");
    return ErrorClass{*kind, text_field(obj, "reasoning"), text_field(obj, "specific_issue")};
}

std::vector<ProbeVerdict> parse_probe_verdicts(std::string_view text) {
    auto obj = first_object(text);
    auto it = obj.find("evaluations");
    if (it == obj.end() || !it->is_array()) throw Unparseable("missing \"evaluations\" array");
    std::vector<ProbeVerdict> out;
    int index = 0;
    for (const auto& e : *it) {
        if (!e.is_object()) throw Unparseable("evaluation entry is not an object");
        ProbeVerdict v;
        auto idx = e.find("probe_index");
        v.probe_index = idx != e.end() && idx->is_number_integer() ? idx->get<int>() : index;
        v.relevant = bool_field(e, "relevant");
        v.new_insight = bool_field(e, "new_insight");
        v.redundant = bool_field(e, "redundant");
        v.reasoning = text_field(e, "reasoning");
        out.push_back(std::move(v));
        ++index;
    }
    return out;
}

LlmExtraction parse_llm_extraction(std::string_view text) {
    auto obj = first_object(text);
    LlmExtraction out;
    if (auto it = obj.find("constraints"); it != obj.end() && it->is_array()) {
        for (const auto& c : *it) {
            if (!c.is_object()) continue;
            out.constraints.push_back({text_field(c, "type"), text_field(c, "description"), text_field(c, "sql_hint")});
        }
    }
    if (auto it = obj.find("output_requirements"); it != obj.end() && it->is_object()) {
        if (auto cols = it->find("expected_columns"); cols != it->end() && cols->is_array()) {
            for (const auto& c : *cols) out.expected_columns.push_back(as_text(c));
        }
        out.expected_type = text_field(*it, "expected_type");
    }
    return out;
}

LlmVerification parse_llm_verification(std::string_view text) {
    auto obj = first_object(text);
    if (!obj.contains("is_valid")) throw Unparseable("missing \"is_valid\"");
    LlmVerification out;
    out.is_valid = bool_field(obj, "is_valid");
    if (auto it = obj.find("issues"); it != obj.end() && it->is_array()) {
        for (const auto& i : *it) {
            if (!i.is_object()) continue;
            out.issues.push_back({text_field(i, "severity"), text_field(i, "category"), text_field(i, "description"),
                                  text_field(i, "suggestion")});
        }
    }
    return out;
}

}  // namespace pvsql
