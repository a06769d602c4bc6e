#include "pvsql/llm.hpp"

#include "pvsql/text.hpp"

#include <fmt/format.h>

#include <set>

namespace pvsql {

namespace {

constexpr std::string_view kProbe = R"(## Background
You are helping to solve a text-to-SQL problem. Before writing the final SQL query, you can run exploratory "probe" queries on the database to understand its content. Probes help discover addition knowledge that are not apparent from the schema alone.

## Task
Analyze the question and schema, then decide whether to request a probe query or proceed to SQL generation.

## Context
Question: {question}
Evidence (hints provided with the question): {evidence}
Database Schema: {schema}
Prior Probes (queries you already ran and their results): {prior_probe_results}

## Instructions
- If you need more information, generate a probe query (e.g., SELECT DISTINCT column FROM table LIMIT 5).
- If you have enough information, set action to "done".
- Record any value mappings you discover (e.g., "California" maps to "CA" in the database).

## Output Format (JSON)
{
  "action": "probe" | "done",
  "probe_sql": "SELECT ...",
  "relevant_columns": {"table": ["col1", "col2"]},
  "value_mappings": {"term_in_question": "exact_db_value"}
}
)";

constexpr std::string_view kGenerate = R"(## Task
Write a SQL query to answer the question based on the provided context.

## Context
Question: {question}
Evidence (hints provided with the question): {evidence}
Database Schema: {schema}

Probe Observations (results from exploratory queries run on the database, showing actual values and formats):
{probe_results}

Extracted Constraints (requirements derived from the question, e.g., needs DISTINCT, needs LIMIT, needs COUNT):
{constraints}

## Rules
- Write a single SQL statement only.
- Return only what is asked (no extra columns).
- Follow evidence/hints strictly when provided.
- Use exact database values discovered from probes (e.g., use "CA" not "California" if probes showed state codes).

## Output
SQL query only.
)";

// The two observation/constraint blocks after the schema carry G and C into
// the repair call.
constexpr std::string_view kRepair = R"(## Background
A SQL query was generated but failed verification. The verifier checks for constraint violations (e.g., missing DISTINCT when the question asks for unique values, missing LIMIT for top-k queries) and execution errors (e.g., invalid column names, syntax errors).

## Task
Fix the SQL query to resolve the detected violations.

## Context
Question: {question}
Evidence (hints provided with the question): {evidence}
Database Schema: {schema}

Probe Observations (results from exploratory queries run on the database, showing actual values and formats):
{probe_results}

Extracted Constraints (requirements derived from the question, e.g., needs DISTINCT, needs LIMIT, needs COUNT):
{constraints}

Original SQL (the query that failed verification):
{original_sql}

## Violations Detected (errors found by the verifier):
{violation_messages}

## Instructions
- Carefully address each violation listed above.
- Output the corrected SQL only (no explanation).
)";

constexpr std::string_view kErrorJudge = R"(## Background
You are analyzing why a text-to-SQL model failed to generate the correct query. By comparing the predicted SQL with the ground truth, you will classify the root cause of the error to help understand model weaknesses.

## Task
Analyze the failure and classify it into one error category.

## Context
Question: {question}
Evidence (hints provided with the question): {evidence}
Database Schema: {schema}
Ground Truth SQL (the correct answer): {gold_sql}
Predicted SQL (what the model generated): {predicted_sql}
Execution Error (if the predicted SQL failed to run): {exec_error}

## Error Types
Classify into exactly one category:

1. **DATABASE_MISINTERPRETATION**:
Failed to understand database content, schema, or relationships.
Examples: wrong table/column, misunderstood foreign keys or data formats.

2. **QUESTION_MISINTERPRETATION**:
Misinterpreted the question.
Examples: wrong filter conditions, misunderstood aggregation requirements.

3. **SQL_SYNTHESIS_FAILURE**:
Understood context correctly but failed to generate correct SQL.
Examples: wrong JOIN syntax, missing clauses, syntax errors.

## Output Format (JSON)
{
  "error_type": "...",
  "reasoning": "...",
  "specific_issue": "..."
}
)";

constexpr std::string_view kProbeJudge = R"(## Background
You are evaluating the quality of probe queries for text-to-SQL grounding. Probes are exploratory SQL queries that help understand database content before generating the final query.

## Task
For each probe query, assess three aspects:

1. **RELEVANCE**: Is this probe relevant to answering the question? (yes/no)
2. **NEW_INSIGHT**: Does this probe provide information not available from schema alone? (yes/no)
  - Schema-only info: table/column names, data types, foreign keys
  - New insights: actual data values, data formats, value distributions, NULL patterns
3. **REDUNDANT**: Does this probe duplicate information from previous probes? (yes/no)

## Context
Question: {question}
Evidence: {evidence}
Schema: {schema}
Probes to evaluate: {probes}

## Output Format (JSON)
{
  "evaluations": [
    {"probe_index": 0, "relevant": true/false,
     "new_insight": true/false, "redundant": true/false,
     "reasoning": "..."},
    ...
  ]
}
)";

constexpr std::string_view kLlmExtract = R"(## Task
You are a SQL requirements analyst. Extract semantic constraints from the natural language question and evidence.

## Context
Question: {question}
Evidence: {evidence}

## Instructions
Focus on identifying:
- DISTINCT requirements (unique, different, distinct values)
- Aggregation needs (count, sum, avg, max, min)
- Ordering/ranking requirements (top N, highest, lowest, oldest, newest)
- Percentage/ratio calculations
- Comparison operators (greater than, less than, equal to)
- Grouping requirements
- NULL handling needs
- Any specific value filtering mentioned

## Output Format (JSON)
{
  "constraints": [
    {
      "type": "distinct|limit|aggregation|...",
      "description": "human-readable description",
      "sql_hint": "what SQL construct should be used"
    }
  ],
  "output_requirements": {
    "expected_columns": ["col1", "col2"],
    "expected_type": "single_value|list|count|..."
  }
}
)";

constexpr std::string_view kLlmVerify = R"(## Task
You are a SQL verification expert. Verify if the generated SQL query correctly satisfies all requirements from the original question.

## Context
Question: {question}
Evidence: {evidence}
Extracted Constraints: {constraints}
Schema: {schema}
Generated SQL: {sql}

## Verification Checklist
Verify ALL aspects:
1. **Structural validity**: Is it a single valid SELECT/WITH statement?
2. **Semantic correctness**: Does the SQL return what the question asks?
3. **Filter correctness**: Are all filters/conditions applied?
4. **Aggregation correctness**: Is aggregation correct (COUNT vs COUNT(DISTINCT))?
5. **Ordering correctness**: Is ordering/limit correct for "top N" queries?
6. **JOIN correctness**: Are JOINs correct and complete?
7. **Output format**: Is the output format correct?

## Instructions
Be thorough but avoid false positives. Only flag issues that are clearly problems.

## Output Format (JSON)
{
  "is_valid": true/false,
  "issues": [
    {
      "severity": "error|warning",
      "category": "syntax|semantic|missing_constraint|...",
      "description": "detailed description of the issue",
      "suggestion": "how to fix it"
    }
  ]
}
)";

bool is_placeholder_char(char c) { return (c >= 'a' && c <= 'z') || c == '_'; }

// Calls fn(begin, end, name) for every `{name}` with a lowercase name.
template <typename Fn>
void scan_placeholders(std::string_view t, Fn&& fn) {
    std::size_t i = 0;
    while ((i = t.find('{', i)) != std::string_view::npos) {
        auto j = i + 1;
        while (j < t.size() && is_placeholder_char(t[j])) ++j;
        if (j > i + 1 && j < t.size() && t[j] == '}') {
            fn(i, j + 1, std::string(t.substr(i + 1, j - i - 1)));
            i = j + 1;
        } else {
            ++i;
        }
    }
}

std::string py_repr(const Cell& c, std::size_t max_chars) {
    struct Visitor {
        std::size_t max_chars;
        std::string operator()(std::monostate) const { return "None"; }
        std::string operator()(std::int64_t v) const { return std::to_string(v); }
        std::string operator()(double v) const { return fmt::format("{}", v); }
        std::string operator()(const std::string& s) const {
            return "'" + text::replace_all(text::ellipsize(s, max_chars), "'", "\\'") + "'";
        }
        std::string operator()(const BlobHex& b) const { return "x'" + text::ellipsize(b.hex, max_chars) + "'"; }
    };
    return std::visit(Visitor{max_chars}, c);
}

std::string render_rows(const SampledRows& rows, std::size_t max_rows, std::size_t max_cell_chars) {
    std::string out = "Columns: " + text::join(rows.columns, ", ") + "\nResult: [";
    std::size_t shown = std::min(max_rows, rows.rows.size());
    for (std::size_t i = 0; i < shown; ++i) {
        if (i) out += ", ";
        out += "(";
        const auto& row = rows.rows[i];
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (j) out += ", ";
            out += py_repr(row[j], max_cell_chars);
        }
        if (row.size() == 1) out += ",";
        out += ")";
    }
    if (rows.rows.size() > shown || rows.truncated) out += shown ? ", ..." : "...";
    out += "]";
    return out;
}

}  // namespace

std::string_view to_string(PromptKind k) {
    switch (k) {
        case PromptKind::probe: return "probe";
        case PromptKind::generate: return "generate";
        case PromptKind::repair: return "repair";
        case PromptKind::error_judge: return "error_judge";
        case PromptKind::probe_judge: return "probe_judge";
        case PromptKind::llm_extract: return "llm_extract";
        case PromptKind::llm_verify: return "llm_verify";
    }
    return "probe";
}

PromptKind prompt_kind_from_string(std::string_view s) {
    for (auto k : {PromptKind::probe, PromptKind::generate, PromptKind::repair, PromptKind::error_judge,
                   PromptKind::probe_judge, PromptKind::llm_extract, PromptKind::llm_verify}) {
        if (to_string(k) == s) return k;
    }
    throw std::invalid_argument("unknown prompt kind: " + std::string(s));
}

std::string_view prompt_template(PromptKind kind) {
    switch (kind) {
        case PromptKind::probe: return kProbe;
        case PromptKind::generate: return kGenerate;
        case PromptKind::repair: return kRepair;
        case PromptKind::error_judge: return kErrorJudge;
        case PromptKind::probe_judge: return kProbeJudge;
        case PromptKind::llm_extract: return kLlmExtract;
        case PromptKind::llm_verify: return kLlmVerify;
    }
    return kProbe;
}

std::vector<std::string> prompt_placeholders(PromptKind kind) {
    std::vector<std::string> out;
    std::set<std::string> seen;
    scan_placeholders(prompt_template(kind), [&](std::size_t, std::size_t, std::string name) {
        if (seen.insert(name).second) out.push_back(std::move(name));
    });
    return out;
}

std::vector<std::string> prompt_headings(PromptKind kind) {
    std::vector<std::string> out;
    for (const auto& line : text::split(prompt_template(kind), '\n')) {
        if (line.rfind("## ", 0) == 0) out.push_back(line);
    }
    return out;
}

std::string render_prompt(PromptKind kind, const PromptContext& context) {
    auto t = prompt_template(kind);
    std::string out;
    out.reserve(t.size() * 2);
    std::size_t last = 0;
    scan_placeholders(t, [&](std::size_t b, std::size_t e, const std::string& name) {
        auto it = context.find(name);
        if (it == context.end()) throw MissingPlaceholder(name);
        out.append(t.substr(last, b - last));
        out += it->second;
        last = e;
    });
    out.append(t.substr(last));
    return out;
}

std::string or_none(std::string_view s) {
    auto t = text::trim(s);
    return t.empty() ? "(none)" : std::string(s);
}

std::string render_schema(const SchemaDescription& schema) {
    std::string out;
    for (const auto& table : schema.tables) {
        if (!out.empty()) out += "\n";
        out += "CREATE TABLE " + table.name + " (\n";
        std::vector<std::string> lines;
        std::vector<std::string> pk;
        for (const auto& c : table.columns) {
            std::string line = "  " + c.name;
            if (!c.declared_type.empty()) line += " " + c.declared_type;
            lines.push_back(line);
            if (c.primary_key) pk.push_back(c.name);
        }
        if (!pk.empty()) lines.push_back("  PRIMARY KEY (" + text::join(pk, ", ") + ")");
        for (const auto& fk : schema.foreign_keys) {
            if (fk.from_table != table.name) continue;
            lines.push_back("  FOREIGN KEY (" + fk.from_column + ") REFERENCES " + fk.to_table + "(" + fk.to_column +
                            ")");
        }
        out += text::join(lines, ",\n") + "\n);";
    }
    return out;
}

std::string render_probe_history(const std::vector<ProbeRecord>& probes, std::size_t max_rows,
                                 std::size_t max_cell_chars) {
    if (probes.empty()) return "(none)";
    std::string out;
    for (std::size_t i = 0; i < probes.size(); ++i) {
        const auto& p = probes[i];
        out += "\nProbe " + std::to_string(i + 1) + ": " + p.probe_sql + "\n";
        if (const auto* err = std::get_if<std::string>(&p.result)) {
            out += "Error: " + *err + "\n";
        } else {
            out += render_rows(std::get<SampledRows>(p.result), max_rows, max_cell_chars) + "\n";
        }
    }
    return out;
}

std::string render_probe_observations(const GroundingContext& g) {
    if (g.empty()) return "(none)";
    std::string out;
    if (!g.probes.empty()) out += text::trim(render_probe_history(g.probes)) + "\n";
    if (!g.merged_value_mappings.empty()) {
        out += "Value mappings:\n";
        for (const auto& [term, value] : g.merged_value_mappings) out += "- \"" + term + "\" -> \"" + value + "\"\n";
    }
    if (!g.merged_relevant_columns.empty()) {
        out += "Relevant columns:\n";
        for (const auto& [table, cols] : g.merged_relevant_columns)
            out += "- " + table + ": " + text::join(cols, ", ") + "\n";
    }
    if (!text::trim(g.insights).empty()) out += "Insights:\n" + text::trim(g.insights) + "\n";
    return text::trim(out);
}

std::string render_constraints(const std::vector<Constraint>& constraints) {
    if (constraints.empty()) return "(none)";
    std::vector<std::string> lines;
    for (const auto& c : constraints) lines.push_back("- " + describe(c));
    return text::join(lines, "\n");
}

std::string render_violations(const std::vector<Violation>& violations) {
    if (violations.empty()) return "(none)";
    std::vector<std::string> lines;
    for (const auto& v : violations) lines.push_back("- " + v.message);
    return text::join(lines, "\n");
}

}  // namespace pvsql
