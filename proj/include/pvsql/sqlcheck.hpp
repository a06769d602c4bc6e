#pragma once

// Constraint satisfaction checks over a parsed query, and the inverse
// mapping that reads constraints back out of a reference query.
//
// A construct anywhere in the statement (CTEs and subqueries included)
// satisfies a constraint. Nothing here touches a database.

#include "pvsql/core.hpp"
#include "pvsql/sql_ast.hpp"

#include <optional>
#include <vector>

namespace pvsql {

using sql::parse_sql;
using sql::ParseError;
using sql::SqlAst;

// Optional schema lets the temporal check recognise date columns by their
// declared type in addition to their names.
std::optional<Violation> check_constraint(const SqlAst& ast, const Constraint& c,
                                          const SchemaDescription* schema = nullptr);

// Per-constraint results concatenated in ConstraintKind order (stable within
// a kind).
std::vector<Violation> check_all(const SqlAst& ast, const std::vector<Constraint>& constraints,
                                 const SchemaDescription* schema = nullptr);

// Oracle constraint list read from a reference query. The result always
// passes check_all against the same tree.
std::vector<Constraint> derive_constraints_from_sql(const SqlAst& gold);

// True if the name or declared type of a column marks it as holding dates or
// times ("date", "time", "year", "day" in the name; DATE/TIME in the type).
bool is_date_like_column(std::string_view name, const SchemaDescription* schema = nullptr);

}  // namespace pvsql
