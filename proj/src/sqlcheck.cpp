#include "pvsql/sqlcheck.hpp"

#include "pvsql/text.hpp"

#include <algorithm>
#include <set>

namespace pvsql {

namespace {

using sql::Clause;
using sql::Expr;
using sql::ExprKind;
using sql::LiteralType;
using sql::Query;
using sql::TokenType;

bool is_function(const Expr& e, std::initializer_list<std::string_view> names) {
    if (e.kind != ExprKind::Function) return false;
    return std::any_of(names.begin(), names.end(), [&](std::string_view n) { return e.name == n; });
}

bool any_expr(const SqlAst& ast, const std::function<bool(const Expr&, Clause)>& pred) {
    bool found = false;
    sql::for_each_expr_deep(ast.query, [&](const Expr& e, Clause c) {
        if (!found && pred(e, c)) found = true;
    });
    return found;
}

bool any_query(const SqlAst& ast, const std::function<bool(const Query&)>& pred) {
    bool found = false;
    sql::for_each_query(ast.query, [&](const Query& q) {
        if (!found && pred(q)) found = true;
    });
    return found;
}

bool is_constant(const Expr& e) {
    if (e.kind == ExprKind::Literal || e.kind == ExprKind::Parameter) return true;
    if (e.kind == ExprKind::Unary && (e.name == "-" || e.name == "+") && e.args.size() == 1)
        return is_constant(e.args[0]);
    return false;
}

std::string flip(const std::string& op) {
    if (op == "<") return ">";
    if (op == "<=") return ">=";
    if (op == ">") return "<";
    if (op == ">=") return "<=";
    return op;
}

bool is_relational(const std::string& op) { return op == "<" || op == "<=" || op == ">" || op == ">="; }

// Relational operators used in WHERE/HAVING, normalised so the column side
// reads on the left (`5 < x` counts as `>`).
std::set<std::string> comparison_directions(const SqlAst& ast, bool include_between) {
    std::set<std::string> ops;
    sql::for_each_expr_deep(ast.query, [&](const Expr& e, Clause c) {
        if (c != Clause::Where && c != Clause::Having) return;
        if (e.kind == ExprKind::Binary && is_relational(e.name) && e.args.size() == 2) {
            bool flipped = is_constant(e.args[0]) && !is_constant(e.args[1]);
            ops.insert(flipped ? flip(e.name) : e.name);
        } else if (include_between && e.kind == ExprKind::Between && !e.negated) {
            ops.insert(">=");
            ops.insert("<=");
        }
    });
    return ops;
}

bool greater_family(const std::string& op) { return op == ">" || op == ">="; }

bool references_date_column(const Expr& e, const SchemaDescription* schema) {
    bool found = false;
    sql::walk_expr(e, [&](const Expr& x) {
        if (!found && x.kind == ExprKind::Column && is_date_like_column(x.name, schema)) found = true;
    });
    return found;
}

const Expr* top_level_limit(const Query& q) { return q.limit ? &*q.limit : nullptr; }

std::optional<long long> literal_limit(const Query& q) {
    const auto* limit = top_level_limit(q);
    if (!limit) return std::nullopt;
    return sql::integer_literal(*limit);
}

bool has_distinct(const SqlAst& ast) {
    bool found = any_query(ast, [](const Query& q) {
        return std::any_of(q.cores.begin(), q.cores.end(), [](const auto& core) { return core.distinct; });
    });
    return found || any_expr(ast, [](const Expr& e, Clause) { return e.kind == ExprKind::Function && e.distinct; });
}

bool has_group_by(const SqlAst& ast) {
    return any_query(ast, [](const Query& q) {
        return std::any_of(q.cores.begin(), q.cores.end(), [](const auto& core) { return !core.group_by.empty(); });
    });
}

bool is_hundred(const Expr& e) {
    if (e.kind == ExprKind::Cast && !e.args.empty()) return is_hundred(e.args[0]);
    if (e.kind != ExprKind::Literal) return false;
    if (e.literal_type != LiteralType::Integer && e.literal_type != LiteralType::Real) return false;
    try {
        return std::stod(e.name) == 100.0;
    } catch (...) {
        return false;
    }
}

bool has_percent_arithmetic(const SqlAst& ast) {
    return any_expr(ast, [](const Expr& e, Clause c) {
        if (c != Clause::Select || e.kind != ExprKind::Binary || e.args.size() != 2) return false;
        if (e.name == "/") return true;
        return e.name == "*" && (is_hundred(e.args[0]) || is_hundred(e.args[1]));
    });
}

bool has_rank_window(const SqlAst& ast) {
    return any_expr(ast, [](const Expr& e, Clause) {
        return is_function(e, {"RANK", "DENSE_RANK", "ROW_NUMBER"}) && e.over != nullptr;
    });
}

bool has_order_limit_one(const SqlAst& ast) {
    return any_query(ast, [](const Query& q) { return !q.order_by.empty() && literal_limit(q) == 1; });
}

bool temporal_satisfied(const SqlAst& ast, bool latest, const SchemaDescription* schema) {
    bool ordered = any_query(ast, [&](const Query& q) {
        return std::any_of(q.order_by.begin(), q.order_by.end(), [&](const sql::OrderTerm& t) {
            return t.descending == latest && references_date_column(t.expr, schema);
        });
    });
    if (ordered) return true;
    return any_expr(ast, [&](const Expr& e, Clause) {
        return is_function(e, {latest ? "MAX" : "MIN"}) && references_date_column(e, schema);
    });
}

bool literal_present(const SqlAst& ast, const std::string& literal) {
    if (literal.empty()) return false;
    for (const auto& tok : ast.tokens) {
        if (tok.type == TokenType::String || tok.type == TokenType::Number || tok.type == TokenType::QuotedIdentifier) {
            if (text::contains_word(tok.value, literal)) return true;
        }
    }
    std::string stripped;
    stripped.reserve(ast.raw_text.size());
    for (char ch : ast.raw_text) {
        if (ch != '\'' && ch != '"' && ch != '`') stripped += ch;
    }
    return text::contains_word(stripped, literal);
}

std::string quoted(const Constraint& c) {
    auto first = c.trigger.substr(0, c.trigger.find(Constraint::kTriggerSeparator));
    return "\"" + first + "\"";
}

Violation violation(const Constraint& c, std::string message) {
    return Violation{ViolationSource::constraint, c, std::move(message)};
}

std::optional<Violation> check_topk(const SqlAst& ast, const Constraint& c) {
    auto n = c.int_param().value_or(1);
    bool satisfied = any_query(ast, [&](const Query& q) { return !q.order_by.empty() && literal_limit(q) == n; });
    if (satisfied) return std::nullopt;

    std::string detail;
    bool saw_limit = false;
    bool saw_matching_unordered = false;
    std::optional<long long> other;
    sql::for_each_query(ast.query, [&](const Query& q) {
        if (!q.limit) return;
        saw_limit = true;
        auto v = literal_limit(q);
        if (v == n) saw_matching_unordered = true;
        else if (v && !other) other = v;
    });
    if (!saw_limit) detail = "SQL has no LIMIT clause";
    else if (saw_matching_unordered) detail = "SQL has LIMIT " + std::to_string(n) + " without ORDER BY";
    else if (other) detail = "SQL uses LIMIT " + std::to_string(*other);
    else detail = "SQL LIMIT is not the literal " + std::to_string(n);
    return violation(c, quoted(c) + " requires ORDER BY ... LIMIT " + std::to_string(n) + ", but " + detail);
}

std::optional<Violation> check_compare(const SqlAst& ast, const Constraint& c) {
    auto wanted = c.text_param().value_or(">");
    auto ops = comparison_directions(ast, true);
    bool want_greater = greater_family(wanted);
    bool ok = std::any_of(ops.begin(), ops.end(), [&](const std::string& op) { return greater_family(op) == want_greater; });
    if (ok) return std::nullopt;
    return violation(c, quoted(c) + " requires a " + wanted + " comparison in WHERE or HAVING, but none was found");
}

}  // namespace

bool is_date_like_column(std::string_view name, const SchemaDescription* schema) {
    auto n = text::lower(name);
    for (auto key : {"date", "time", "year", "day"}) {
        if (n.find(key) != std::string::npos) return true;
    }
    if (schema) {
        if (auto type = schema->column_type(name)) {
            auto t = text::upper(*type);
            if (t.find("DATE") != std::string::npos || t.find("TIME") != std::string::npos) return true;
        }
    }
    return false;
}

std::optional<Violation> check_constraint(const SqlAst& ast, const Constraint& c, const SchemaDescription* schema) {
    switch (c.kind) {
        case ConstraintKind::Distinct:
            if (has_distinct(ast) || has_group_by(ast)) return std::nullopt;
            return violation(c, "Question asks for unique values but SQL lacks DISTINCT or GROUP BY");
        case ConstraintKind::TopK:
            return check_topk(ast, c);
        case ConstraintKind::Ranking:
            if (has_rank_window(ast)) return std::nullopt;
            return violation(c, "Question asks for a ranking (" + quoted(c) +
                                    ") but SQL lacks a window function such as RANK() OVER (...)");
        case ConstraintKind::Count:
            if (any_expr(ast, [](const Expr& e, Clause) { return is_function(e, {"COUNT"}); })) return std::nullopt;
            return violation(c, "Question asks for a count (" + quoted(c) + ") but SQL lacks COUNT()");
        case ConstraintKind::Percent:
            if (has_percent_arithmetic(ast)) return std::nullopt;
            return violation(c, "Question asks for a percentage (" + quoted(c) +
                                    ") but SQL has no division or multiplication by 100 in SELECT");
        case ConstraintKind::Sum:
            if (any_expr(ast, [](const Expr& e, Clause) { return is_function(e, {"SUM", "TOTAL"}); }))
                return std::nullopt;
            return violation(c, "Question asks for a total (" + quoted(c) + ") but SQL lacks SUM()");
        case ConstraintKind::Average:
            if (any_expr(ast, [](const Expr& e, Clause) { return is_function(e, {"AVG"}); })) return std::nullopt;
            return violation(c, "Question asks for an average (" + quoted(c) + ") but SQL lacks AVG()");
        case ConstraintKind::Extreme:
            if (any_expr(ast, [](const Expr& e, Clause) { return is_function(e, {"MAX", "MIN"}); }) ||
                has_order_limit_one(ast))
                return std::nullopt;
            return violation(c, "Question asks for an extreme value (" + quoted(c) +
                                    ") but SQL lacks MAX()/MIN() or ORDER BY ... LIMIT 1");
        case ConstraintKind::Temporal: {
            bool latest = c.text_param().value_or("latest") != "earliest";
            if (temporal_satisfied(ast, latest, schema)) return std::nullopt;
            return violation(c, quoted(c) + " requires ORDER BY a date/time column " +
                                    (latest ? "DESC" : "ASC") + ", but none was found");
        }
        case ConstraintKind::Compare:
            return check_compare(ast, c);
        case ConstraintKind::LiteralPresence: {
            auto lit = c.text_param().value_or("");
            if (literal_present(ast, lit)) return std::nullopt;
            return violation(c, "\"" + lit + "\" must appear in SQL");
        }
    }
    return std::nullopt;
}

std::vector<Violation> check_all(const SqlAst& ast, const std::vector<Constraint>& constraints,
                                 const SchemaDescription* schema) {
    std::vector<const Constraint*> ordered;
    ordered.reserve(constraints.size());
    for (const auto& c : constraints) ordered.push_back(&c);
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const Constraint* a, const Constraint* b) { return a->kind < b->kind; });
    std::vector<Violation> out;
    for (const auto* c : ordered) {
        if (auto v = check_constraint(ast, *c, schema)) out.push_back(std::move(*v));
    }
    return out;
}

std::vector<Constraint> derive_constraints_from_sql(const SqlAst& gold) {
    std::vector<Constraint> out;
    auto add = [&](ConstraintKind kind, std::optional<ConstraintParam> param, std::string trigger) {
        Constraint c{kind, std::move(param), std::move(trigger)};
        auto it = std::find_if(out.begin(), out.end(), [&](const Constraint& x) { return same_requirement(x, c); });
        if (it == out.end()) out.push_back(std::move(c));
    };
    if (has_distinct(gold)) add(ConstraintKind::Distinct, std::nullopt, "DISTINCT");

    sql::for_each_query(gold.query, [&](const Query& q) {
        if (q.order_by.empty()) return;
        auto n = literal_limit(q);
        if (n && *n >= 1) {
            add(ConstraintKind::TopK, ConstraintParam{static_cast<std::int64_t>(*n)}, "LIMIT " + std::to_string(*n));
            if (*n == 1) {
                std::string dir = q.order_by.front().descending ? "max" : "min";
                add(ConstraintKind::Extreme, ConstraintParam{dir}, "ORDER BY ... LIMIT 1");
            }
        }
        for (const auto& term : q.order_by) {
            if (references_date_column(term.expr, nullptr)) {
                add(ConstraintKind::Temporal, ConstraintParam{std::string(term.descending ? "latest" : "earliest")},
                    term.descending ? "ORDER BY ... DESC" : "ORDER BY ... ASC");
            }
        }
    });

    sql::for_each_expr_deep(gold.query, [&](const Expr& e, Clause clause) {
        if (e.kind == ExprKind::Function) {
            if (e.name == "RANK" || e.name == "DENSE_RANK" || e.name == "ROW_NUMBER") {
                if (e.over) add(ConstraintKind::Ranking, std::nullopt, e.name + "() OVER");
            } else if (e.name == "COUNT") {
                add(ConstraintKind::Count, std::nullopt, "COUNT");
            } else if (e.name == "SUM" || e.name == "TOTAL") {
                add(ConstraintKind::Sum, std::nullopt, e.name);
            } else if (e.name == "AVG") {
                add(ConstraintKind::Average, std::nullopt, "AVG");
            } else if (e.name == "MAX" || e.name == "MIN") {
                add(ConstraintKind::Extreme, ConstraintParam{text::lower(e.name)}, e.name);
            }
        }
        if (clause == Clause::Select && e.kind == ExprKind::Binary && e.name == "/") {
            add(ConstraintKind::Percent, std::nullopt, "/");
        }
        bool predicate = clause == Clause::Where || clause == Clause::Having || clause == Clause::Join;
        if (predicate && e.kind == ExprKind::Literal &&
            (e.literal_type == LiteralType::String || e.literal_type == LiteralType::Integer ||
             e.literal_type == LiteralType::Real) &&
            !text::trim(e.name).empty()) {
            add(ConstraintKind::LiteralPresence, ConstraintParam{e.name}, e.name);
        }
    });

    for (const auto& op : comparison_directions(gold, false)) {
        add(ConstraintKind::Compare, ConstraintParam{op}, op);
    }

    std::stable_sort(out.begin(), out.end(), requirement_less);
    return out;
}

}  // namespace pvsql
