#pragma once

// Domain types shared by every pvsql module. All of them are plain values:
// copyable, comparable, and safe to hand between worker threads.

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace pvsql {

enum class Difficulty { simple, moderate, challenging, unknown };

std::string_view to_string(Difficulty d);
Difficulty difficulty_from_string(std::string_view s);

// One benchmark item.
struct Task {
    std::string task_id;
    std::string db_id;
    std::string question;
    std::string evidence;
    std::optional<std::string> gold_sql;
    Difficulty difficulty = Difficulty::unknown;

    bool operator==(const Task&) const = default;
};

struct ColumnInfo {
    std::string name;
    std::string declared_type;
    bool primary_key = false;

    bool operator==(const ColumnInfo&) const = default;
};

struct TableInfo {
    std::string name;
    std::vector<ColumnInfo> columns;

    bool operator==(const TableInfo&) const = default;
};

struct ForeignKey {
    std::string from_table;
    std::string from_column;
    std::string to_table;
    std::string to_column;

    bool operator==(const ForeignKey&) const = default;
};

struct SchemaDescription {
    std::vector<TableInfo> tables;
    std::vector<ForeignKey> foreign_keys;

    const TableInfo* find_table(std::string_view name) const;
    // Declared type of the first column with this name in any table
    // (case-insensitive); nullopt when no table has it.
    std::optional<std::string> column_type(std::string_view column) const;

    bool operator==(const SchemaDescription&) const = default;
};

// Order of the enumerators is the fixed order used by check_all and by the
// extractor's output.
enum class ConstraintKind {
    Distinct,
    TopK,
    Ranking,
    Count,
    Percent,
    Sum,
    Average,
    Extreme,
    Temporal,
    Compare,
    LiteralPresence,
};

inline constexpr ConstraintKind kAllConstraintKinds[] = {
    ConstraintKind::Distinct, ConstraintKind::TopK,     ConstraintKind::Ranking,
    ConstraintKind::Count,    ConstraintKind::Percent,  ConstraintKind::Sum,
    ConstraintKind::Average,  ConstraintKind::Extreme,  ConstraintKind::Temporal,
    ConstraintKind::Compare,  ConstraintKind::LiteralPresence,
};

std::string_view to_string(ConstraintKind k);
ConstraintKind constraint_kind_from_string(std::string_view s);

// Integer for TopK; ">", ">=", "<", "<=" for Compare; "max"/"min" for Extreme;
// "latest"/"earliest" for Temporal; the literal text for LiteralPresence.
using ConstraintParam = std::variant<std::int64_t, std::string>;

struct Constraint {
    ConstraintKind kind{};
    std::optional<ConstraintParam> param;
    // Matched text from the question or evidence. Merged duplicates carry
    // their triggers joined with kTriggerSeparator.
    std::string trigger;

    static constexpr std::string_view kTriggerSeparator = "; ";

    std::optional<std::int64_t> int_param() const;
    std::optional<std::string> text_param() const;

    bool operator==(const Constraint&) const = default;
};

// Dedup/identity key: (kind, param). Trigger text does not participate.
bool same_requirement(const Constraint& a, const Constraint& b);
bool requirement_less(const Constraint& a, const Constraint& b);

// Short requirement phrase shown to the model, e.g. "\"top 3\" requires
// ORDER BY ... LIMIT 3".
std::string describe(const Constraint& c);

enum class ViolationSource { syntax, execution, constraint, llm };

std::string_view to_string(ViolationSource s);
ViolationSource violation_source_from_string(std::string_view s);

struct Violation {
    ViolationSource source{};
    std::optional<Constraint> constraint;
    std::string message;

    bool operator==(const Violation&) const = default;
};

// A cell of a sampled result row. Blobs are carried as lowercase hex.
struct BlobHex {
    std::string hex;
    bool operator==(const BlobHex&) const = default;
};
using Cell = std::variant<std::monostate, std::int64_t, double, std::string, BlobHex>;
using Row = std::vector<Cell>;

std::string cell_to_string(const Cell& c);

struct SampledRows {
    std::vector<std::string> columns;
    std::vector<Row> rows;
    bool truncated = false;

    bool operator==(const SampledRows&) const = default;
};

using ColumnMap = std::map<std::string, std::vector<std::string>>;
using ValueMap = std::map<std::string, std::string>;

// One probe and what came back: sampled rows, or the engine's error text.
struct ProbeRecord {
    std::string probe_sql;
    std::variant<SampledRows, std::string> result;
    ColumnMap relevant_columns;
    ValueMap value_mappings;

    bool failed() const { return std::holds_alternative<std::string>(result); }

    bool operator==(const ProbeRecord&) const = default;
};

struct GroundingContext {
    std::vector<ProbeRecord> probes;
    ValueMap merged_value_mappings;
    ColumnMap merged_relevant_columns;
    std::string insights;

    // Appends a probe and folds its maps into the merged views; later
    // entries override earlier ones.
    void add_probe(ProbeRecord probe);
    void add_insight(std::string_view text);
    bool empty() const;

    bool operator==(const GroundingContext&) const = default;
};

struct Draft {
    std::string sql;
    std::vector<Violation> violations;

    bool operator==(const Draft&) const = default;
};

struct RunRecord {
    Task task;
    std::string mode;
    GroundingContext grounding;
    std::vector<Constraint> constraints;
    std::vector<Draft> drafts;
    std::string final_sql;
    int probe_count = 0;
    int repair_count = 0;
    std::int64_t tokens_in = 0;
    std::int64_t tokens_out = 0;
    int llm_calls = 0;
    double wall_seconds = 0.0;
    bool failed = false;
    std::string error;

    // Filled in by the benchmark harness.
    std::optional<bool> ex_correct;
    std::optional<double> gold_seconds;
    std::optional<double> pred_seconds;

    bool operator==(const RunRecord&) const = default;
};

enum class ErrorKind { DatabaseMisinterpretation, QuestionMisinterpretation, SynthesisFailure };

std::string_view to_string(ErrorKind k);
// Accepts both the enum spelling and the judge's DATABASE_MISINTERPRETATION
// style labels.
std::optional<ErrorKind> error_kind_from_string(std::string_view s);

struct ErrorClass {
    ErrorKind kind{};
    std::string reasoning;
    std::string specific_issue;

    bool operator==(const ErrorClass&) const = default;
};

// Thrown when a JSON document does not match one of the encodings above.
class DecodeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace pvsql
