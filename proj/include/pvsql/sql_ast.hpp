#pragma once

// Tokens and syntax tree for the SQLite SELECT dialect used by BIRD and
// Spider queries. The tree keeps source offsets on every expression so that
// callers can splice the original text (e.g. to rewrite a LIMIT).

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pvsql::sql {

enum class TokenType {
    Word,              // bare identifier or keyword
    QuotedIdentifier,  // "x", `x`, [x]
    String,            // 'x'
    Number,
    Blob,              // x'ab'
    Parameter,         // ?, ?1, :name, @name, $name
    Operator,
    Punct,             // ( ) , ; .
    End,
};

struct Token {
    TokenType type = TokenType::End;
    std::string text;   // exact source text
    std::string value;  // unquoted content for strings/identifiers, else == text
    std::size_t offset = 0;

    bool is_word(std::string_view keyword) const;  // case-insensitive
    bool is_punct(char c) const { return type == TokenType::Punct && text.size() == 1 && text[0] == c; }
    bool is_op(std::string_view op) const { return type == TokenType::Operator && text == op; }
};

class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t position, const std::string& message);
    std::size_t position() const { return position_; }

private:
    std::size_t position_;
};

std::vector<Token> tokenize(std::string_view sql);

struct Query;
struct WindowSpec;

enum class ExprKind {
    Literal,
    Column,
    Star,       // * or t.*
    Function,
    Unary,      // -, +, ~, NOT, ISNULL, NOTNULL
    Binary,     // arithmetic, comparison, AND/OR, LIKE/GLOB/..., IS [NOT]
    Between,    // args: value, low, high
    In,         // args[0] IN (args[1..]) or IN subquery/table
    Exists,
    Subquery,
    Case,       // args: [base], when, then, when, then, ..., [else]
    Cast,
    Collate,
    List,       // (a, b, ...)
    Parameter,
};

enum class LiteralType { Integer, Real, String, Blob, Null, Boolean, CurrentTime };

struct Expr {
    ExprKind kind = ExprKind::Literal;
    // Function: uppercase name. Unary/Binary: uppercase operator ("AND", "<=",
    // "LIKE", "IS NOT", ...). Column: column name. Literal: unquoted value.
    // Cast: target type. Collate: collation name. In: table name for `IN t`.
    std::string name;
    std::string qualifier;  // Column / Star: table or alias
    LiteralType literal_type = LiteralType::Null;
    bool distinct = false;   // Function argument list had DISTINCT
    bool negated = false;    // NOT IN / NOT BETWEEN / NOT LIKE ...
    bool has_else = false;   // Case
    bool has_base = false;   // Case
    std::vector<Expr> args;
    std::shared_ptr<const Query> subquery;
    std::shared_ptr<const WindowSpec> over;
    std::optional<std::size_t> filter_index;  // Function FILTER (WHERE args[i])
    std::size_t begin = 0;
    std::size_t end = 0;
};

struct OrderTerm {
    Expr expr;
    bool descending = false;
    bool explicit_direction = false;
};

struct WindowSpec {
    std::string base_name;
    std::vector<Expr> partition_by;
    std::vector<OrderTerm> order_by;
};

struct ResultColumn {
    Expr expr;
    std::string alias;
};

struct TableRef {
    std::string name;  // table name (possibly schema-qualified); empty for subqueries
    std::string alias;
    std::shared_ptr<const Query> subquery;
    std::vector<Expr> function_args;  // table-valued function call
    std::string join_operator;        // "" for the first item, "," or "LEFT JOIN" ...
    std::optional<Expr> on;
    std::vector<std::string> using_columns;
};

struct SelectCore {
    bool distinct = false;
    std::vector<ResultColumn> columns;
    std::vector<TableRef> from;
    std::optional<Expr> where;
    std::vector<Expr> group_by;
    std::optional<Expr> having;
    std::vector<std::pair<std::string, WindowSpec>> windows;
    std::vector<std::vector<Expr>> values;  // VALUES rows; columns empty then
};

struct Cte {
    std::string name;
    std::vector<std::string> columns;
    std::shared_ptr<const Query> query;
};

struct Query {
    bool recursive = false;
    std::vector<Cte> ctes;
    std::vector<SelectCore> cores;
    std::vector<std::string> compound_operators;  // cores.size() - 1 entries
    std::vector<OrderTerm> order_by;
    std::optional<Expr> limit;   // row count
    std::optional<Expr> offset;
    std::size_t end = 0;         // source offset just past the query text
};

enum class StatementKind { Select, With };

struct SqlAst {
    StatementKind kind = StatementKind::Select;
    Query query;
    std::string raw_text;
    std::vector<Token> tokens;
};

// Parses one SELECT/WITH statement (an optional trailing ';' is allowed).
// Throws ParseError for malformed input, non-SELECT statements, or more than
// one statement.
SqlAst parse_sql(std::string_view sql);

enum class Clause { Select, From, Join, Where, GroupBy, Having, OrderBy, Limit, Window, Values, Cte };

// Calls `fn` for every query in the tree (the root first, then CTEs, FROM
// subqueries and expression subqueries, depth first).
void for_each_query(const Query& root, const std::function<void(const Query&)>& fn);

// Calls `fn` for every expression node owned by `query` itself, in every
// clause, without descending into nested queries.
void for_each_expr(const Query& query, const std::function<void(const Expr&, Clause)>& fn);

// Every expression node of every query in the tree.
void for_each_expr_deep(const Query& root, const std::function<void(const Expr&, Clause)>& fn);

// Visits `e` and all its sub-expressions (not nested queries).
void walk_expr(const Expr& e, const std::function<void(const Expr&)>& fn);

// Integer value of a literal expression such as `3` or `+3`.
std::optional<long long> integer_literal(const Expr& e);

}  // namespace pvsql::sql
