#include "pvsql/core.hpp"

#include "pvsql/text.hpp"

#include <array>
#include <cmath>
#include <sstream>
#include <utility>

namespace pvsql {

namespace {

constexpr std::array<std::pair<Difficulty, std::string_view>, 4> kDifficultyNames{{
    {Difficulty::simple, "simple"},
    {Difficulty::moderate, "moderate"},
    {Difficulty::challenging, "challenging"},
    {Difficulty::unknown, "unknown"},
}};

constexpr std::array<std::pair<ConstraintKind, std::string_view>, 11> kKindNames{{
    {ConstraintKind::Distinct, "Distinct"},
    {ConstraintKind::TopK, "TopK"},
    {ConstraintKind::Ranking, "Ranking"},
    {ConstraintKind::Count, "Count"},
    {ConstraintKind::Percent, "Percent"},
    {ConstraintKind::Sum, "Sum"},
    {ConstraintKind::Average, "Average"},
    {ConstraintKind::Extreme, "Extreme"},
    {ConstraintKind::Temporal, "Temporal"},
    {ConstraintKind::Compare, "Compare"},
    {ConstraintKind::LiteralPresence, "LiteralPresence"},
}};

constexpr std::array<std::pair<ViolationSource, std::string_view>, 4> kSourceNames{{
    {ViolationSource::syntax, "syntax"},
    {ViolationSource::execution, "execution"},
    {ViolationSource::constraint, "constraint"},
    {ViolationSource::llm, "llm"},
}};

constexpr std::array<std::pair<ErrorKind, std::string_view>, 3> kErrorKindNames{{
    {ErrorKind::DatabaseMisinterpretation, "DatabaseMisinterpretation"},
    {ErrorKind::QuestionMisinterpretation, "QuestionMisinterpretation"},
    {ErrorKind::SynthesisFailure, "SynthesisFailure"},
}};

template <typename E, std::size_t N>
std::string_view name_of(const std::array<std::pair<E, std::string_view>, N>& table, E value) {
    for (const auto& [e, name] : table) {
        if (e == value) return name;
    }
    return "?";
}

template <typename E, std::size_t N>
E value_of(const std::array<std::pair<E, std::string_view>, N>& table, std::string_view name,
           const char* what) {
    for (const auto& [e, n] : table) {
        if (n == name) return e;
    }
    throw DecodeError(std::string("unknown ") + what + ": " + std::string(name));
}

void merge_columns(ColumnMap& into, const ColumnMap& from) {
    for (const auto& [table, cols] : from) into[table] = cols;
}

}  // namespace

std::string_view to_string(Difficulty d) { return name_of(kDifficultyNames, d); }

Difficulty difficulty_from_string(std::string_view s) {
    auto lowered = text::lower(s);
    for (const auto& [e, n] : kDifficultyNames) {
        if (n == lowered) return e;
    }
    return Difficulty::unknown;
}

std::string_view to_string(ConstraintKind k) { return name_of(kKindNames, k); }

ConstraintKind constraint_kind_from_string(std::string_view s) {
    return value_of(kKindNames, s, "constraint kind");
}

std::string_view to_string(ViolationSource s) { return name_of(kSourceNames, s); }

ViolationSource violation_source_from_string(std::string_view s) {
    return value_of(kSourceNames, s, "violation source");
}

std::string_view to_string(ErrorKind k) { return name_of(kErrorKindNames, k); }

std::optional<ErrorKind> error_kind_from_string(std::string_view s) {
    auto upper = text::upper(text::trim(s));
    if (upper == "DATABASE_MISINTERPRETATION" || upper == "DATABASEMISINTERPRETATION")
        return ErrorKind::DatabaseMisinterpretation;
    if (upper == "QUESTION_MISINTERPRETATION" || upper == "QUESTIONMISINTERPRETATION")
        return ErrorKind::QuestionMisinterpretation;
    if (upper == "SQL_SYNTHESIS_FAILURE" || upper == "SYNTHESIS_FAILURE" ||
        upper == "SYNTHESISFAILURE")
        return ErrorKind::SynthesisFailure;
    return std::nullopt;
}

const TableInfo* SchemaDescription::find_table(std::string_view name) const {
    for (const auto& t : tables) {
        if (text::iequals(t.name, name)) return &t;
    }
    return nullptr;
}

std::optional<std::string> SchemaDescription::column_type(std::string_view column) const {
    for (const auto& t : tables) {
        for (const auto& c : t.columns) {
            if (text::iequals(c.name, column)) return c.declared_type;
        }
    }
    return std::nullopt;
}

std::optional<std::int64_t> Constraint::int_param() const {
    if (param && std::holds_alternative<std::int64_t>(*param)) return std::get<std::int64_t>(*param);
    return std::nullopt;
}

std::optional<std::string> Constraint::text_param() const {
    if (param && std::holds_alternative<std::string>(*param)) return std::get<std::string>(*param);
    return std::nullopt;
}

bool same_requirement(const Constraint& a, const Constraint& b) {
    return a.kind == b.kind && a.param == b.param;
}

bool requirement_less(const Constraint& a, const Constraint& b) {
    if (a.kind != b.kind) return a.kind < b.kind;
    return a.param < b.param;
}

std::string describe(const Constraint& c) {
    auto quoted_trigger = [&] {
        auto first = c.trigger.substr(0, c.trigger.find(Constraint::kTriggerSeparator));
        return "\"" + first + "\"";
    };
    switch (c.kind) {
        case ConstraintKind::Distinct:
            return "DISTINCT or GROUP BY for uniqueness";
        case ConstraintKind::TopK: {
            auto n = c.int_param().value_or(1);
            return quoted_trigger() + " requires ORDER BY ... LIMIT " + std::to_string(n);
        }
        case ConstraintKind::Ranking:
            return "Ranking requires a window function (RANK, DENSE_RANK or ROW_NUMBER with OVER)";
        case ConstraintKind::Count:
            return "Counting requires COUNT(*) or COUNT(column)";
        case ConstraintKind::Percent:
            return "Percentage calculation required";
        case ConstraintKind::Sum:
            return "Summation requires SUM()";
        case ConstraintKind::Average:
            return "Average requires AVG()";
        case ConstraintKind::Extreme:
            return "Extreme value requires MAX()/MIN() or ORDER BY ... LIMIT 1";
        case ConstraintKind::Temporal: {
            auto dir = c.text_param().value_or("latest");
            return quoted_trigger() + " requires ORDER BY a date/time column " +
                   (dir == "earliest" ? "ASC" : "DESC");
        }
        case ConstraintKind::Compare:
            return quoted_trigger() + " requires a " + c.text_param().value_or(">") +
                   " comparison in WHERE or HAVING";
        case ConstraintKind::LiteralPresence:
            return "\"" + c.text_param().value_or("") + "\" must appear in SQL";
    }
    return std::string(to_string(c.kind));
}

std::string cell_to_string(const Cell& c) {
    struct Visitor {
        std::string operator()(std::monostate) const { return "NULL"; }
        std::string operator()(std::int64_t v) const { return std::to_string(v); }
        std::string operator()(double v) const {
            std::ostringstream os;
            os.precision(15);
            os << v;
            return os.str();
        }
        std::string operator()(const std::string& v) const { return v; }
        std::string operator()(const BlobHex& v) const { return "x'" + v.hex + "'"; }
    };
    return std::visit(Visitor{}, c);
}

void GroundingContext::add_probe(ProbeRecord probe) {
    for (const auto& [term, value] : probe.value_mappings) merged_value_mappings[term] = value;
    merge_columns(merged_relevant_columns, probe.relevant_columns);
    probes.push_back(std::move(probe));
}

void GroundingContext::add_insight(std::string_view text) {
    auto t = text::trim(text);
    if (t.empty()) return;
    if (!insights.empty()) insights += '\n';
    insights += t;
}

bool GroundingContext::empty() const {
    return probes.empty() && merged_value_mappings.empty() && merged_relevant_columns.empty() &&
           insights.empty();
}

}  // namespace pvsql
