#pragma once

// Canonical JSON encodings for the core types. Field names follow the type
// definitions in core.hpp; these are the shapes written to trace files.

#include "pvsql/core.hpp"

#include <json.hpp>

namespace pvsql {

using Json = nlohmann::json;

void to_json(Json& j, const Task& v);
void from_json(const Json& j, Task& v);
void to_json(Json& j, const ColumnInfo& v);
void from_json(const Json& j, ColumnInfo& v);
void to_json(Json& j, const TableInfo& v);
void from_json(const Json& j, TableInfo& v);
void to_json(Json& j, const ForeignKey& v);
void from_json(const Json& j, ForeignKey& v);
void to_json(Json& j, const SchemaDescription& v);
void from_json(const Json& j, SchemaDescription& v);
void to_json(Json& j, const Constraint& v);
void from_json(const Json& j, Constraint& v);
void to_json(Json& j, const Violation& v);
void from_json(const Json& j, Violation& v);
void to_json(Json& j, const Cell& v);
void from_json(const Json& j, Cell& v);
void to_json(Json& j, const SampledRows& v);
void from_json(const Json& j, SampledRows& v);
void to_json(Json& j, const ProbeRecord& v);
void from_json(const Json& j, ProbeRecord& v);
void to_json(Json& j, const GroundingContext& v);
void from_json(const Json& j, GroundingContext& v);
void to_json(Json& j, const Draft& v);
void from_json(const Json& j, Draft& v);
void to_json(Json& j, const RunRecord& v);
void from_json(const Json& j, RunRecord& v);
void to_json(Json& j, const ErrorClass& v);
void from_json(const Json& j, ErrorClass& v);

// from_json wrapper that turns nlohmann exceptions into DecodeError.
template <typename T>
T decode(const Json& j) {
    try {
        return j.get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw DecodeError(e.what());
    }
}

}  // namespace pvsql
