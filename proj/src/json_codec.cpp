#include "pvsql/json_codec.hpp"

namespace pvsql {

namespace {

template <typename T>
void get_optional(const Json& j, const char* key, std::optional<T>& out) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) {
        out.reset();
    } else {
        out = it->template get<T>();
    }
}

template <typename T>
void get_or(const Json& j, const char* key, T& out, T fallback) {
    auto it = j.find(key);
    out = (it == j.end() || it->is_null()) ? std::move(fallback) : it->template get<T>();
}

Json optional_json(const auto& opt) { return opt ? Json(*opt) : Json(nullptr); }

}  // namespace

void to_json(Json& j, const Task& v) {
    j = Json{{"task_id", v.task_id},
             {"db_id", v.db_id},
             {"question", v.question},
             {"evidence", v.evidence},
             {"gold_sql", optional_json(v.gold_sql)},
             {"difficulty", to_string(v.difficulty)}};
}

void from_json(const Json& j, Task& v) {
    v.task_id = j.at("task_id").get<std::string>();
    v.db_id = j.at("db_id").get<std::string>();
    v.question = j.at("question").get<std::string>();
    get_or(j, "evidence", v.evidence, std::string{});
    get_optional(j, "gold_sql", v.gold_sql);
    std::string diff;
    get_or(j, "difficulty", diff, std::string("unknown"));
    v.difficulty = difficulty_from_string(diff);
}

void to_json(Json& j, const ColumnInfo& v) {
    j = Json{{"column_name", v.name}, {"declared_type", v.declared_type}, {"is_primary_key", v.primary_key}};
}

void from_json(const Json& j, ColumnInfo& v) {
    v.name = j.at("column_name").get<std::string>();
    v.declared_type = j.at("declared_type").get<std::string>();
    v.primary_key = j.at("is_primary_key").get<bool>();
}

void to_json(Json& j, const TableInfo& v) { j = Json{{"table_name", v.name}, {"columns", v.columns}}; }

void from_json(const Json& j, TableInfo& v) {
    v.name = j.at("table_name").get<std::string>();
    v.columns = j.at("columns").get<std::vector<ColumnInfo>>();
}

void to_json(Json& j, const ForeignKey& v) {
    j = Json{{"from_table", v.from_table},
             {"from_column", v.from_column},
             {"to_table", v.to_table},
             {"to_column", v.to_column}};
}

void from_json(const Json& j, ForeignKey& v) {
    v.from_table = j.at("from_table").get<std::string>();
    v.from_column = j.at("from_column").get<std::string>();
    v.to_table = j.at("to_table").get<std::string>();
    v.to_column = j.at("to_column").get<std::string>();
}

void to_json(Json& j, const SchemaDescription& v) {
    j = Json{{"tables", v.tables}, {"foreign_keys", v.foreign_keys}};
}

void from_json(const Json& j, SchemaDescription& v) {
    v.tables = j.at("tables").get<std::vector<TableInfo>>();
    get_or(j, "foreign_keys", v.foreign_keys, std::vector<ForeignKey>{});
}

void to_json(Json& j, const Constraint& v) {
    Json param = nullptr;
    if (v.param) {
        std::visit([&](const auto& p) { param = p; }, *v.param);
    }
    j = Json{{"kind", to_string(v.kind)}, {"param", param}, {"trigger", v.trigger}};
}

void from_json(const Json& j, Constraint& v) {
    v.kind = constraint_kind_from_string(j.at("kind").get<std::string>());
    v.param.reset();
    if (auto it = j.find("param"); it != j.end() && !it->is_null()) {
        if (it->is_number_integer()) {
            v.param = it->get<std::int64_t>();
        } else if (it->is_string()) {
            v.param = it->get<std::string>();
        } else {
            throw DecodeError("constraint param must be an integer or a string");
        }
    }
    get_or(j, "trigger", v.trigger, std::string{});
}

void to_json(Json& j, const Violation& v) {
    j = Json{{"source", to_string(v.source)},
             {"constraint", optional_json(v.constraint)},
             {"message", v.message}};
}

void from_json(const Json& j, Violation& v) {
    v.source = violation_source_from_string(j.at("source").get<std::string>());
    get_optional(j, "constraint", v.constraint);
    v.message = j.at("message").get<std::string>();
}

void to_json(Json& j, const Cell& v) {
    struct Visitor {
        Json& j;
        void operator()(std::monostate) const { j = nullptr; }
        void operator()(std::int64_t x) const { j = x; }
        void operator()(double x) const { j = x; }
        void operator()(const std::string& x) const { j = x; }
        void operator()(const BlobHex& x) const { j = Json{{"blob", x.hex}}; }
    };
    std::visit(Visitor{j}, v);
}

void from_json(const Json& j, Cell& v) {
    if (j.is_null()) {
        v = std::monostate{};
    } else if (j.is_number_integer()) {
        v = j.get<std::int64_t>();
    } else if (j.is_number_float()) {
        v = j.get<double>();
    } else if (j.is_string()) {
        v = j.get<std::string>();
    } else if (j.is_object() && j.contains("blob")) {
        v = BlobHex{j.at("blob").get<std::string>()};
    } else {
        throw DecodeError("unsupported cell encoding: " + j.dump());
    }
}

void to_json(Json& j, const SampledRows& v) {
    j = Json{{"columns", v.columns}, {"rows", v.rows}, {"truncated", v.truncated}};
}

void from_json(const Json& j, SampledRows& v) {
    v.columns = j.at("columns").get<std::vector<std::string>>();
    v.rows = j.at("rows").get<std::vector<Row>>();
    get_or(j, "truncated", v.truncated, false);
}

void to_json(Json& j, const ProbeRecord& v) {
    Json result;
    if (const auto* rows = std::get_if<SampledRows>(&v.result)) {
        result = Json{{"rows", *rows}};
    } else {
        result = Json{{"error", std::get<std::string>(v.result)}};
    }
    j = Json{{"probe_sql", v.probe_sql},
             {"result", result},
             {"relevant_columns", v.relevant_columns},
             {"value_mappings", v.value_mappings}};
}

void from_json(const Json& j, ProbeRecord& v) {
    v.probe_sql = j.at("probe_sql").get<std::string>();
    const auto& result = j.at("result");
    if (result.contains("error")) {
        v.result = result.at("error").get<std::string>();
    } else {
        v.result = result.at("rows").get<SampledRows>();
    }
    get_or(j, "relevant_columns", v.relevant_columns, ColumnMap{});
    get_or(j, "value_mappings", v.value_mappings, ValueMap{});
}

void to_json(Json& j, const GroundingContext& v) {
    j = Json{{"probes", v.probes},
             {"merged_value_mappings", v.merged_value_mappings},
             {"merged_relevant_columns", v.merged_relevant_columns},
             {"insights", v.insights}};
}

void from_json(const Json& j, GroundingContext& v) {
    get_or(j, "probes", v.probes, std::vector<ProbeRecord>{});
    get_or(j, "merged_value_mappings", v.merged_value_mappings, ValueMap{});
    get_or(j, "merged_relevant_columns", v.merged_relevant_columns, ColumnMap{});
    get_or(j, "insights", v.insights, std::string{});
}

void to_json(Json& j, const Draft& v) { j = Json{{"sql", v.sql}, {"violations", v.violations}}; }

void from_json(const Json& j, Draft& v) {
    v.sql = j.at("sql").get<std::string>();
    get_or(j, "violations", v.violations, std::vector<Violation>{});
}

void to_json(Json& j, const RunRecord& v) {
    j = Json{{"task_id", v.task.task_id},
             {"task", v.task},
             {"mode", v.mode},
             {"grounding", v.grounding},
             {"constraints", v.constraints},
             {"drafts", v.drafts},
             {"final_sql", v.final_sql},
             {"probe_count", v.probe_count},
             {"repair_count", v.repair_count},
             {"tokens_in", v.tokens_in},
             {"tokens_out", v.tokens_out},
             {"llm_calls", v.llm_calls},
             {"wall_seconds", v.wall_seconds},
             {"failed", v.failed},
             {"error", v.error},
             {"ex_correct", optional_json(v.ex_correct)},
             {"gold_seconds", optional_json(v.gold_seconds)},
             {"pred_seconds", optional_json(v.pred_seconds)}};
}

void from_json(const Json& j, RunRecord& v) {
    v.task = j.at("task").get<Task>();
    get_or(j, "mode", v.mode, std::string("rule"));
    get_or(j, "grounding", v.grounding, GroundingContext{});
    get_or(j, "constraints", v.constraints, std::vector<Constraint>{});
    get_or(j, "drafts", v.drafts, std::vector<Draft>{});
    get_or(j, "final_sql", v.final_sql, std::string{});
    get_or(j, "probe_count", v.probe_count, 0);
    get_or(j, "repair_count", v.repair_count, 0);
    get_or(j, "tokens_in", v.tokens_in, std::int64_t{0});
    get_or(j, "tokens_out", v.tokens_out, std::int64_t{0});
    get_or(j, "llm_calls", v.llm_calls, 0);
    get_or(j, "wall_seconds", v.wall_seconds, 0.0);
    get_or(j, "failed", v.failed, false);
    get_or(j, "error", v.error, std::string{});
    get_optional(j, "ex_correct", v.ex_correct);
    get_optional(j, "gold_seconds", v.gold_seconds);
    get_optional(j, "pred_seconds", v.pred_seconds);
}

void to_json(Json& j, const ErrorClass& v) {
    j = Json{{"kind", to_string(v.kind)}, {"reasoning", v.reasoning}, {"specific_issue", v.specific_issue}};
}

void from_json(const Json& j, ErrorClass& v) {
    auto kind = error_kind_from_string(j.at("kind").get<std::string>());
    if (!kind) throw DecodeError("unknown error kind: " + j.at("kind").dump());
    v.kind = *kind;
    get_or(j, "reasoning", v.reasoning, std::string{});
    get_or(j, "specific_issue", v.specific_issue, std::string{});
}

}  // namespace pvsql
