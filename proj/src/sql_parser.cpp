#include "pvsql/sql_ast.hpp"

#include "pvsql/text.hpp"

#include <algorithm>
#include <array>
#include <charconv>

namespace pvsql::sql {

namespace {

bool in_list(const Token& t, std::initializer_list<std::string_view> words) {
    if (t.type != TokenType::Word) return false;
    return std::any_of(words.begin(), words.end(), [&](std::string_view w) { return t.is_word(w); });
}

// Words that cannot start an expression unless followed by '(' or '.'.
bool reserved_in_expression(const Token& t) {
    return in_list(t, {"SELECT", "FROM",   "WHERE",  "GROUP",  "HAVING", "ORDER",   "LIMIT", "UNION",
                       "INTERSECT", "EXCEPT", "JOIN", "ON",   "USING",  "AS",      "AND",   "OR",
                       "IN",     "IS",     "LIKE",   "GLOB",   "REGEXP", "BETWEEN", "WHEN",  "THEN",
                       "ELSE",   "END",    "BY",     "ALL",    "DISTINCT", "WINDOW", "OFFSET", "ESCAPE",
                       "COLLATE", "INNER", "CROSS",  "NATURAL", "OUTER", "VALUES", "ASC",   "DESC"});
}

// Words that end a result column or table reference and so cannot be an
// implicit alias.
bool stops_alias(const Token& t) {
    return in_list(t, {"FROM",    "WHERE", "GROUP",   "HAVING", "ORDER", "LIMIT", "UNION",  "INTERSECT",
                       "EXCEPT",  "WINDOW", "ON",     "USING",  "JOIN",  "INNER", "LEFT",   "RIGHT",
                       "FULL",    "CROSS", "NATURAL", "OUTER",  "OFFSET", "AND",  "OR",     "AS",
                       "INDEXED", "NOT",   "ASC",     "DESC",   "NULLS", "THEN",  "WHEN",   "ELSE",
                       "END",     "COLLATE", "IN",    "IS",     "LIKE",  "GLOB",  "MATCH",  "REGEXP",
                       "BETWEEN", "ESCAPE", "FILTER", "OVER",   "VALUES", "SELECT", "RETURNING"});
}

class Parser {
public:
    Parser(std::string_view src, std::vector<Token> tokens) : src_(src), toks_(std::move(tokens)) {}

    SqlAst parse_statement() {
        SqlAst ast;
        if (peek().type == TokenType::End) throw ParseError(0, "empty statement");
        if (peek().is_word("WITH")) {
            ast.kind = StatementKind::With;
        } else if (peek().is_word("SELECT") || peek().is_word("VALUES")) {
            ast.kind = StatementKind::Select;
        } else {
            throw ParseError(peek().offset, "only SELECT/WITH statements are supported, found '" + peek().text + "'");
        }
        ast.query = parse_query();
        while (peek().is_punct(';')) advance();
        if (peek().type != TokenType::End) {
            throw ParseError(peek().offset, "expected a single SQL statement, found trailing '" + peek().text + "'");
        }
        ast.raw_text = text::trim(src_);
        ast.tokens = std::move(toks_);
        return ast;
    }

private:
    const Token& peek(std::size_t ahead = 0) const {
        auto i = std::min(pos_ + ahead, toks_.size() - 1);
        return toks_[i];
    }
    const Token& advance() {
        const Token& t = toks_[pos_];
        if (pos_ + 1 < toks_.size()) ++pos_;
        return t;
    }
    std::size_t prev_end() const {
        if (pos_ == 0) return 0;
        const auto& t = toks_[pos_ - 1];
        return t.offset + t.text.size();
    }
    bool accept_word(std::string_view w) {
        if (peek().is_word(w)) {
            advance();
            return true;
        }
        return false;
    }
    bool accept_punct(char c) {
        if (peek().is_punct(c)) {
            advance();
            return true;
        }
        return false;
    }
    void expect_word(std::string_view w) {
        if (!accept_word(w)) fail("expected " + std::string(w));
    }
    void expect_punct(char c) {
        if (!accept_punct(c)) fail(std::string("expected '") + c + "'");
    }
    [[noreturn]] void fail(const std::string& msg) const {
        const auto& t = peek();
        auto found = t.type == TokenType::End ? std::string("end of input") : "'" + t.text + "'";
        throw ParseError(t.offset, msg + ", found " + found);
    }

    bool starts_query() const {
        return peek().is_word("SELECT") || peek().is_word("WITH") || peek().is_word("VALUES");
    }

    std::string parse_name() {
        const auto& t = peek();
        if (t.type == TokenType::Word || t.type == TokenType::QuotedIdentifier || t.type == TokenType::String) {
            advance();
            return t.value;
        }
        fail("expected a name");
    }

    // ---- queries ----------------------------------------------------------

    Query parse_query() {
        Query q;
        if (accept_word("WITH")) {
            q.recursive = accept_word("RECURSIVE");
            do {
                Cte cte;
                cte.name = parse_name();
                if (accept_punct('(')) {
                    do cte.columns.push_back(parse_name());
                    while (accept_punct(','));
                    expect_punct(')');
                }
                expect_word("AS");
                if (accept_word("NOT")) expect_word("MATERIALIZED");
                else accept_word("MATERIALIZED");
                expect_punct('(');
                cte.query = std::make_shared<const Query>(parse_query());
                expect_punct(')');
                q.ctes.push_back(std::move(cte));
            } while (accept_punct(','));
        }
        q.cores.push_back(parse_core());
        while (true) {
            std::string op;
            if (accept_word("UNION")) {
                op = accept_word("ALL") ? "UNION ALL" : "UNION";
            } else if (accept_word("INTERSECT")) {
                op = "INTERSECT";
            } else if (accept_word("EXCEPT")) {
                op = "EXCEPT";
            } else {
                break;
            }
            q.compound_operators.push_back(op);
            q.cores.push_back(parse_core());
        }
        if (accept_word("ORDER")) {
            expect_word("BY");
            q.order_by = parse_order_terms();
        }
        if (accept_word("LIMIT")) {
            Expr first = parse_expr();
            if (accept_word("OFFSET")) {
                q.limit = std::move(first);
                q.offset = parse_expr();
            } else if (accept_punct(',')) {
                q.offset = std::move(first);
                q.limit = parse_expr();
            } else {
                q.limit = std::move(first);
            }
        }
        q.end = prev_end();
        return q;
    }

    SelectCore parse_core() {
        SelectCore core;
        if (accept_word("VALUES")) {
            do {
                expect_punct('(');
                std::vector<Expr> row;
                do row.push_back(parse_expr());
                while (accept_punct(','));
                expect_punct(')');
                core.values.push_back(std::move(row));
            } while (accept_punct(','));
            return core;
        }
        expect_word("SELECT");
        if (accept_word("DISTINCT")) core.distinct = true;
        else accept_word("ALL");

        do core.columns.push_back(parse_result_column());
        while (accept_punct(','));

        if (accept_word("FROM")) core.from = parse_from();
        if (accept_word("WHERE")) core.where = parse_expr();
        if (accept_word("GROUP")) {
            expect_word("BY");
            do core.group_by.push_back(parse_expr());
            while (accept_punct(','));
        }
        if (accept_word("HAVING")) core.having = parse_expr();
        if (accept_word("WINDOW")) {
            do {
                auto name = parse_name();
                expect_word("AS");
                expect_punct('(');
                core.windows.emplace_back(name, parse_window_body());
            } while (accept_punct(','));
        }
        return core;
    }

    ResultColumn parse_result_column() {
        ResultColumn col;
        auto start = peek().offset;
        if (peek().is_op("*")) {
            advance();
            col.expr.kind = ExprKind::Star;
            col.expr.begin = start;
            col.expr.end = prev_end();
            return col;
        }
        col.expr = parse_expr();
        col.alias = parse_alias();
        return col;
    }

    std::string parse_alias() {
        if (accept_word("AS")) return parse_name();
        const auto& t = peek();
        if ((t.type == TokenType::Word && !stops_alias(t)) || t.type == TokenType::QuotedIdentifier ||
            t.type == TokenType::String) {
            advance();
            return t.value;
        }
        return {};
    }

    std::vector<TableRef> parse_from() {
        std::vector<TableRef> refs;
        parse_table_or_join(refs, "");
        while (true) {
            std::string op;
            if (accept_punct(',')) {
                op = ",";
            } else {
                std::string prefix;
                if (accept_word("NATURAL")) prefix = "NATURAL ";
                if (accept_word("LEFT")) prefix += "LEFT ";
                else if (accept_word("RIGHT")) prefix += "RIGHT ";
                else if (accept_word("FULL")) prefix += "FULL ";
                else if (accept_word("INNER")) prefix += "INNER ";
                else if (accept_word("CROSS")) prefix += "CROSS ";
                if (accept_word("OUTER")) prefix += "OUTER ";
                if (!accept_word("JOIN")) {
                    if (!prefix.empty()) fail("expected JOIN");
                    break;
                }
                op = prefix + "JOIN";
            }
            parse_table_or_join(refs, op);
            auto& last = refs.back();
            if (accept_word("ON")) {
                last.on = parse_expr();
            } else if (accept_word("USING")) {
                expect_punct('(');
                do last.using_columns.push_back(parse_name());
                while (accept_punct(','));
                expect_punct(')');
            }
        }
        return refs;
    }

    void parse_table_or_join(std::vector<TableRef>& refs, std::string op) {
        if (peek().is_punct('(')) {
            advance();
            if (starts_query()) {
                TableRef ref;
                ref.join_operator = std::move(op);
                ref.subquery = std::make_shared<const Query>(parse_query());
                expect_punct(')');
                ref.alias = parse_alias();
                refs.push_back(std::move(ref));
                return;
            }
            // Parenthesised join list: flatten into the outer list.
            auto inner = parse_from();
            expect_punct(')');
            if (!inner.empty()) inner.front().join_operator = std::move(op);
            auto alias = parse_alias();
            if (!alias.empty() && inner.size() == 1) inner.front().alias = alias;
            for (auto& r : inner) refs.push_back(std::move(r));
            return;
        }
        TableRef ref;
        ref.join_operator = std::move(op);
        ref.name = parse_name();
        if (accept_punct('.')) ref.name += "." + parse_name();
        if (accept_punct('(')) {
            if (!peek().is_punct(')')) {
                do ref.function_args.push_back(parse_expr());
                while (accept_punct(','));
            }
            expect_punct(')');
        }
        ref.alias = parse_alias();
        if (accept_word("INDEXED")) {
            expect_word("BY");
            parse_name();
        } else if (peek().is_word("NOT") && peek(1).is_word("INDEXED")) {
            advance();
            advance();
        }
        refs.push_back(std::move(ref));
    }

    std::vector<OrderTerm> parse_order_terms() {
        std::vector<OrderTerm> terms;
        do {
            OrderTerm term;
            term.expr = parse_expr();
            if (accept_word("ASC")) {
                term.explicit_direction = true;
            } else if (accept_word("DESC")) {
                term.descending = true;
                term.explicit_direction = true;
            }
            if (accept_word("NULLS")) {
                if (!accept_word("FIRST")) expect_word("LAST");
            }
            terms.push_back(std::move(term));
        } while (accept_punct(','));
        return terms;
    }

    // Caller consumed the opening '('.
    WindowSpec parse_window_body() {
        WindowSpec spec;
        const auto& t = peek();
        if (t.type == TokenType::Word && !in_list(t, {"PARTITION", "ORDER", "RANGE", "ROWS", "GROUPS"})) {
            spec.base_name = parse_name();
        }
        if (accept_word("PARTITION")) {
            expect_word("BY");
            do spec.partition_by.push_back(parse_expr());
            while (accept_punct(','));
        }
        if (accept_word("ORDER")) {
            expect_word("BY");
            spec.order_by = parse_order_terms();
        }
        // Frame specification: skipped token-wise up to the closing paren.
        int depth = 0;
        while (!(depth == 0 && peek().is_punct(')'))) {
            if (peek().type == TokenType::End) fail("unterminated window specification");
            if (peek().is_punct('(')) ++depth;
            if (peek().is_punct(')')) --depth;
            advance();
        }
        expect_punct(')');
        return spec;
    }

    // ---- expressions ------------------------------------------------------

    Expr make_binary(std::string op, Expr lhs, Expr rhs) {
        Expr e;
        e.kind = ExprKind::Binary;
        e.name = std::move(op);
        e.begin = lhs.begin;
        e.end = rhs.end;
        e.args.push_back(std::move(lhs));
        e.args.push_back(std::move(rhs));
        return e;
    }

    Expr parse_expr() { return parse_or(); }

    Expr parse_or() {
        Expr lhs = parse_and();
        while (accept_word("OR")) lhs = make_binary("OR", std::move(lhs), parse_and());
        return lhs;
    }

    Expr parse_and() {
        Expr lhs = parse_not();
        while (accept_word("AND")) lhs = make_binary("AND", std::move(lhs), parse_not());
        return lhs;
    }

    Expr parse_not() {
        if (peek().is_word("NOT") && !peek(1).is_word("EXISTS")) {
            auto start = advance().offset;
            Expr operand = parse_not();
            Expr e;
            e.kind = ExprKind::Unary;
            e.name = "NOT";
            e.begin = start;
            e.end = operand.end;
            e.args.push_back(std::move(operand));
            return e;
        }
        return parse_equality();
    }

    Expr parse_equality() {
        Expr lhs = parse_relational();
        while (true) {
            const auto& t = peek();
            if (t.is_op("=") || t.is_op("==") || t.is_op("!=") || t.is_op("<>")) {
                auto op = advance().text;
                lhs = make_binary(op, std::move(lhs), parse_relational());
                continue;
            }
            if (t.is_word("IS")) {
                advance();
                std::string op = "IS";
                if (accept_word("NOT")) op = "IS NOT";
                if (accept_word("DISTINCT")) {
                    expect_word("FROM");
                    op = op == "IS" ? "IS DISTINCT FROM" : "IS NOT DISTINCT FROM";
                }
                lhs = make_binary(op, std::move(lhs), parse_relational());
                continue;
            }
            if (t.is_word("ISNULL") || t.is_word("NOTNULL")) {
                auto op = text::upper(advance().text);
                lhs = make_postfix(op, std::move(lhs));
                continue;
            }
            bool negated = false;
            std::size_t save = pos_;
            if (t.is_word("NOT")) {
                advance();
                negated = true;
                if (accept_word("NULL")) {
                    lhs = make_postfix("NOTNULL", std::move(lhs));
                    continue;
                }
            }
            const auto& k = peek();
            if (k.is_word("IN")) {
                advance();
                lhs = parse_in(std::move(lhs), negated);
                continue;
            }
            if (in_list(k, {"LIKE", "GLOB", "MATCH", "REGEXP"})) {
                auto op = text::upper(advance().text);
                Expr rhs = parse_relational();
                Expr e = make_binary(op, std::move(lhs), std::move(rhs));
                e.negated = negated;
                if (accept_word("ESCAPE")) {
                    Expr esc = parse_relational();
                    e.end = esc.end;
                    e.args.push_back(std::move(esc));
                }
                lhs = std::move(e);
                continue;
            }
            if (k.is_word("BETWEEN")) {
                advance();
                Expr low = parse_relational();
                expect_word("AND");
                Expr high = parse_relational();
                Expr e;
                e.kind = ExprKind::Between;
                e.negated = negated;
                e.begin = lhs.begin;
                e.end = high.end;
                e.args.push_back(std::move(lhs));
                e.args.push_back(std::move(low));
                e.args.push_back(std::move(high));
                lhs = std::move(e);
                continue;
            }
            pos_ = save;
            break;
        }
        return lhs;
    }

    Expr make_postfix(std::string op, Expr operand) {
        Expr e;
        e.kind = ExprKind::Unary;
        e.name = std::move(op);
        e.begin = operand.begin;
        e.end = prev_end();
        e.args.push_back(std::move(operand));
        return e;
    }

    Expr parse_in(Expr lhs, bool negated) {
        Expr e;
        e.kind = ExprKind::In;
        e.negated = negated;
        e.begin = lhs.begin;
        e.args.push_back(std::move(lhs));
        if (accept_punct('(')) {
            if (starts_query()) {
                e.subquery = std::make_shared<const Query>(parse_query());
            } else if (!peek().is_punct(')')) {
                do e.args.push_back(parse_expr());
                while (accept_punct(','));
            }
            expect_punct(')');
        } else {
            e.name = parse_name();
            if (accept_punct('.')) e.name += "." + parse_name();
        }
        e.end = prev_end();
        return e;
    }

    Expr parse_relational() {
        Expr lhs = parse_bitwise();
        while (peek().is_op("<") || peek().is_op("<=") || peek().is_op(">") || peek().is_op(">=")) {
            auto op = advance().text;
            lhs = make_binary(op, std::move(lhs), parse_bitwise());
        }
        return lhs;
    }

    Expr parse_bitwise() {
        Expr lhs = parse_additive();
        while (peek().is_op("&") || peek().is_op("|") || peek().is_op("<<") || peek().is_op(">>")) {
            auto op = advance().text;
            lhs = make_binary(op, std::move(lhs), parse_additive());
        }
        return lhs;
    }

    Expr parse_additive() {
        Expr lhs = parse_multiplicative();
        while (peek().is_op("+") || peek().is_op("-")) {
            auto op = advance().text;
            lhs = make_binary(op, std::move(lhs), parse_multiplicative());
        }
        return lhs;
    }

    Expr parse_multiplicative() {
        Expr lhs = parse_concat();
        while (peek().is_op("*") || peek().is_op("/") || peek().is_op("%")) {
            auto op = advance().text;
            lhs = make_binary(op, std::move(lhs), parse_concat());
        }
        return lhs;
    }

    Expr parse_concat() {
        Expr lhs = parse_unary();
        while (peek().is_op("||") || peek().is_op("->") || peek().is_op("->>")) {
            auto op = advance().text;
            lhs = make_binary(op, std::move(lhs), parse_unary());
        }
        return lhs;
    }

    Expr parse_unary() {
        if (peek().is_op("-") || peek().is_op("+") || peek().is_op("~")) {
            auto start = peek().offset;
            auto op = advance().text;
            Expr operand = parse_unary();
            Expr e;
            e.kind = ExprKind::Unary;
            e.name = op;
            e.begin = start;
            e.end = operand.end;
            e.args.push_back(std::move(operand));
            return e;
        }
        Expr e = parse_primary();
        while (accept_word("COLLATE")) {
            Expr c;
            c.kind = ExprKind::Collate;
            c.name = parse_name();
            c.begin = e.begin;
            c.end = prev_end();
            c.args.push_back(std::move(e));
            e = std::move(c);
        }
        return e;
    }

    Expr literal(LiteralType type, std::string value, std::size_t start) {
        Expr e;
        e.kind = ExprKind::Literal;
        e.literal_type = type;
        e.name = std::move(value);
        e.begin = start;
        e.end = prev_end();
        return e;
    }

    Expr parse_primary() {
        const Token& t = peek();
        auto start = t.offset;
        switch (t.type) {
            case TokenType::Number: {
                advance();
                bool real = t.text.find_first_of(".eE") != std::string::npos &&
                            !text::istarts_with(t.text, "0x");
                return literal(real ? LiteralType::Real : LiteralType::Integer, t.text, start);
            }
            case TokenType::String:
                advance();
                return literal(LiteralType::String, t.value, start);
            case TokenType::Blob:
                advance();
                return literal(LiteralType::Blob, t.value, start);
            case TokenType::Parameter: {
                advance();
                Expr e;
                e.kind = ExprKind::Parameter;
                e.name = t.text;
                e.begin = start;
                e.end = prev_end();
                return e;
            }
            case TokenType::QuotedIdentifier:
                return parse_identifier_expr();
            case TokenType::Punct:
                if (t.is_punct('(')) return parse_parenthesised();
                break;
            case TokenType::Word: {
                if (t.is_word("NULL")) {
                    advance();
                    return literal(LiteralType::Null, "NULL", start);
                }
                if (t.is_word("TRUE") || t.is_word("FALSE")) {
                    advance();
                    return literal(LiteralType::Boolean, text::upper(t.text), start);
                }
                if ((t.is_word("CURRENT_DATE") || t.is_word("CURRENT_TIME") || t.is_word("CURRENT_TIMESTAMP")) &&
                    !peek(1).is_punct('(')) {
                    advance();
                    return literal(LiteralType::CurrentTime, text::upper(t.text), start);
                }
                if (t.is_word("CASE")) return parse_case();
                if (t.is_word("CAST") && peek(1).is_punct('(')) return parse_cast();
                if (t.is_word("EXISTS") || (t.is_word("NOT") && peek(1).is_word("EXISTS"))) return parse_exists();
                if (t.is_word("RAISE") && peek(1).is_punct('(')) fail("RAISE is not allowed in a query");
                if (reserved_in_expression(t) && !peek(1).is_punct('(') && !peek(1).is_punct('.')) {
                    fail("expected an expression");
                }
                return parse_identifier_expr();
            }
            default:
                break;
        }
        fail("expected an expression");
    }

    Expr parse_parenthesised() {
        auto start = advance().offset;
        if (starts_query()) {
            Expr e;
            e.kind = ExprKind::Subquery;
            e.subquery = std::make_shared<const Query>(parse_query());
            expect_punct(')');
            e.begin = start;
            e.end = prev_end();
            return e;
        }
        Expr first = parse_expr();
        if (accept_punct(')')) {
            first.begin = start;
            first.end = prev_end();
            return first;
        }
        Expr list;
        list.kind = ExprKind::List;
        list.args.push_back(std::move(first));
        while (accept_punct(',')) list.args.push_back(parse_expr());
        expect_punct(')');
        list.begin = start;
        list.end = prev_end();
        return list;
    }

    Expr parse_case() {
        Expr e;
        e.kind = ExprKind::Case;
        e.begin = advance().offset;
        if (!peek().is_word("WHEN")) {
            e.has_base = true;
            e.args.push_back(parse_expr());
        }
        if (!peek().is_word("WHEN")) fail("expected WHEN");
        while (accept_word("WHEN")) {
            e.args.push_back(parse_expr());
            expect_word("THEN");
            e.args.push_back(parse_expr());
        }
        if (accept_word("ELSE")) {
            e.has_else = true;
            e.args.push_back(parse_expr());
        }
        expect_word("END");
        e.end = prev_end();
        return e;
    }

    Expr parse_cast() {
        Expr e;
        e.kind = ExprKind::Cast;
        e.begin = advance().offset;
        expect_punct('(');
        e.args.push_back(parse_expr());
        expect_word("AS");
        std::vector<std::string> words;
        while (peek().type == TokenType::Word || peek().type == TokenType::QuotedIdentifier) {
            words.push_back(advance().value);
        }
        if (words.empty()) fail("expected a type name");
        if (accept_punct('(')) {
            while (!peek().is_punct(')')) {
                if (peek().type == TokenType::End) fail("unterminated type name");
                advance();
            }
            expect_punct(')');
        }
        e.name = text::upper(text::join(words, " "));
        expect_punct(')');
        e.end = prev_end();
        return e;
    }

    Expr parse_exists() {
        auto start = peek().offset;
        bool negated = accept_word("NOT");
        expect_word("EXISTS");
        expect_punct('(');
        Expr e;
        e.kind = ExprKind::Exists;
        e.negated = negated;
        e.subquery = std::make_shared<const Query>(parse_query());
        expect_punct(')');
        e.begin = start;
        e.end = prev_end();
        return e;
    }

    Expr parse_identifier_expr() {
        const Token& first = advance();
        auto start = first.offset;
        if (first.type == TokenType::Word && peek().is_punct('(')) return parse_function(first, start);

        std::vector<std::string> parts{first.value};
        while (peek().is_punct('.')) {
            advance();
            if (peek().is_op("*")) {
                advance();
                Expr star;
                star.kind = ExprKind::Star;
                star.qualifier = text::join(parts, ".");
                star.begin = start;
                star.end = prev_end();
                return star;
            }
            parts.push_back(parse_name());
        }
        Expr e;
        e.kind = ExprKind::Column;
        e.name = parts.back();
        parts.pop_back();
        e.qualifier = text::join(parts, ".");
        e.begin = start;
        e.end = prev_end();
        return e;
    }

    Expr parse_function(const Token& name, std::size_t start) {
        Expr e;
        e.kind = ExprKind::Function;
        e.name = text::upper(name.text);
        expect_punct('(');
        if (peek().is_op("*")) {
            auto s = advance().offset;
            Expr star;
            star.kind = ExprKind::Star;
            star.begin = s;
            star.end = prev_end();
            e.args.push_back(std::move(star));
        } else if (!peek().is_punct(')')) {
            if (accept_word("DISTINCT")) e.distinct = true;
            else accept_word("ALL");
            do e.args.push_back(parse_expr());
            while (accept_punct(','));
            if (accept_word("ORDER")) {  // aggregate ORDER BY, e.g. group_concat(x ORDER BY y)
                expect_word("BY");
                for (auto& term : parse_order_terms()) e.args.push_back(std::move(term.expr));
            }
        }
        expect_punct(')');
        if (peek().is_word("FILTER") && peek(1).is_punct('(')) {
            advance();
            advance();
            expect_word("WHERE");
            e.filter_index = e.args.size();
            e.args.push_back(parse_expr());
            expect_punct(')');
        }
        if (accept_word("OVER")) {
            if (accept_punct('(')) {
                e.over = std::make_shared<const WindowSpec>(parse_window_body());
            } else {
                WindowSpec named;
                named.base_name = parse_name();
                e.over = std::make_shared<const WindowSpec>(std::move(named));
            }
        }
        e.begin = start;
        e.end = prev_end();
        return e;
    }

    std::string_view src_;
    std::vector<Token> toks_;
    std::size_t pos_ = 0;
};

void walk_expr_impl(const Expr& e, const std::function<void(const Expr&)>& fn) {
    fn(e);
    for (const auto& a : e.args) walk_expr_impl(a, fn);
    if (e.over) {
        for (const auto& p : e.over->partition_by) walk_expr_impl(p, fn);
        for (const auto& o : e.over->order_by) walk_expr_impl(o.expr, fn);
    }
}

}  // namespace

SqlAst parse_sql(std::string_view sql) {
    auto tokens = tokenize(sql);
    Parser parser(sql, std::move(tokens));
    return parser.parse_statement();
}

void walk_expr(const Expr& e, const std::function<void(const Expr&)>& fn) { walk_expr_impl(e, fn); }

void for_each_expr(const Query& query, const std::function<void(const Expr&, Clause)>& fn) {
    auto visit = [&](const Expr& e, Clause c) { walk_expr_impl(e, [&](const Expr& x) { fn(x, c); }); };
    for (const auto& core : query.cores) {
        for (const auto& col : core.columns) visit(col.expr, Clause::Select);
        for (const auto& ref : core.from) {
            for (const auto& a : ref.function_args) visit(a, Clause::From);
            if (ref.on) visit(*ref.on, Clause::Join);
        }
        if (core.where) visit(*core.where, Clause::Where);
        for (const auto& g : core.group_by) visit(g, Clause::GroupBy);
        if (core.having) visit(*core.having, Clause::Having);
        for (const auto& [name, spec] : core.windows) {
            for (const auto& p : spec.partition_by) visit(p, Clause::Window);
            for (const auto& o : spec.order_by) visit(o.expr, Clause::Window);
        }
        for (const auto& row : core.values) {
            for (const auto& v : row) visit(v, Clause::Values);
        }
    }
    for (const auto& term : query.order_by) visit(term.expr, Clause::OrderBy);
    if (query.limit) visit(*query.limit, Clause::Limit);
    if (query.offset) visit(*query.offset, Clause::Limit);
}

void for_each_query(const Query& root, const std::function<void(const Query&)>& fn) {
    fn(root);
    for (const auto& cte : root.ctes) for_each_query(*cte.query, fn);
    for (const auto& core : root.cores) {
        for (const auto& ref : core.from) {
            if (ref.subquery) for_each_query(*ref.subquery, fn);
        }
    }
    for_each_expr(root, [&](const Expr& e, Clause) {
        if (e.subquery) for_each_query(*e.subquery, fn);
    });
}

void for_each_expr_deep(const Query& root, const std::function<void(const Expr&, Clause)>& fn) {
    for_each_query(root, [&](const Query& q) { for_each_expr(q, fn); });
}

std::optional<long long> integer_literal(const Expr& e) {
    if (e.kind == ExprKind::Unary && e.name == "+" && e.args.size() == 1) return integer_literal(e.args[0]);
    if (e.kind != ExprKind::Literal || e.literal_type != LiteralType::Integer) return std::nullopt;
    long long v = 0;
    const auto& s = e.name;
    if (text::istarts_with(s, "0x")) {
        auto [p, ec] = std::from_chars(s.data() + 2, s.data() + s.size(), v, 16);
        if (ec != std::errc{}) return std::nullopt;
        return v;
    }
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) return std::nullopt;
    return v;
}

}  // namespace pvsql::sql
