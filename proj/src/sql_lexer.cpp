#include "pvsql/sql_ast.hpp"

#include "pvsql/text.hpp"

#include <cctype>

namespace pvsql::sql {

ParseError::ParseError(std::size_t position, const std::string& message)
    : std::runtime_error("parse error at offset " + std::to_string(position) + ": " + message),
      position_(position) {}

bool Token::is_word(std::string_view keyword) const {
    return type == TokenType::Word && text::iequals(text, keyword);
}

namespace {

bool is_ident_start(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || static_cast<unsigned char>(c) >= 0x80;
}

bool is_ident_char(char c) {
    return is_ident_start(c) || std::isdigit(static_cast<unsigned char>(c)) || c == '$';
}

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) {}

    std::vector<Token> run() {
        std::vector<Token> out;
        while (true) {
            skip_space_and_comments();
            if (pos_ >= src_.size()) break;
            out.push_back(next());
        }
        Token end;
        end.type = TokenType::End;
        end.offset = src_.size();
        out.push_back(end);
        return out;
    }

private:
    char peek(std::size_t ahead = 0) const {
        return pos_ + ahead < src_.size() ? src_[pos_ + ahead] : '\0';
    }

    void skip_space_and_comments() {
        while (pos_ < src_.size()) {
            char c = src_[pos_];
            if (std::isspace(static_cast<unsigned char>(c))) {
                ++pos_;
            } else if (c == '-' && peek(1) == '-') {
                while (pos_ < src_.size() && src_[pos_] != '\n') ++pos_;
            } else if (c == '/' && peek(1) == '*') {
                auto close = src_.find("*/", pos_ + 2);
                pos_ = close == std::string_view::npos ? src_.size() : close + 2;
            } else {
                break;
            }
        }
    }

    Token make(TokenType type, std::size_t start, std::string value) {
        Token t;
        t.type = type;
        t.offset = start;
        t.text = std::string(src_.substr(start, pos_ - start));
        t.value = std::move(value);
        return t;
    }

    // Reads a delimited run ending in `close`, where a doubled close char is
    // an escaped literal close char.
    std::string read_delimited(char close, std::size_t start) {
        std::string value;
        ++pos_;
        while (true) {
            if (pos_ >= src_.size()) throw ParseError(start, "unterminated quoted text");
            char c = src_[pos_++];
            if (c == close) {
                if (close != ']' && peek() == close) {
                    value += close;
                    ++pos_;
                    continue;
                }
                return value;
            }
            value += c;
        }
    }

    Token next() {
        std::size_t start = pos_;
        char c = src_[pos_];

        if ((c == 'x' || c == 'X') && peek(1) == '\'') {
            ++pos_;
            auto hex = read_delimited('\'', start);
            return make(TokenType::Blob, start, hex);
        }
        if (is_ident_start(c)) {
            while (pos_ < src_.size() && is_ident_char(src_[pos_])) ++pos_;
            return make(TokenType::Word, start, std::string(src_.substr(start, pos_ - start)));
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || (c == '.' && std::isdigit(static_cast<unsigned char>(peek(1))))) {
            return number(start);
        }
        switch (c) {
            case '\'': {
                auto v = read_delimited('\'', start);
                return make(TokenType::String, start, v);
            }
            case '"': {
                auto v = read_delimited('"', start);
                return make(TokenType::QuotedIdentifier, start, v);
            }
            case '`': {
                auto v = read_delimited('`', start);
                return make(TokenType::QuotedIdentifier, start, v);
            }
            case '[': {
                auto v = read_delimited(']', start);
                return make(TokenType::QuotedIdentifier, start, v);
            }
            case '?': {
                ++pos_;
                while (std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
                return make(TokenType::Parameter, start, std::string(src_.substr(start, pos_ - start)));
            }
            case ':':
            case '@':
            case '$':
                if (is_ident_start(peek(1))) {
                    ++pos_;
                    while (pos_ < src_.size() && is_ident_char(src_[pos_])) ++pos_;
                    return make(TokenType::Parameter, start, std::string(src_.substr(start, pos_ - start)));
                }
                break;
            case '(':
            case ')':
            case ',':
            case ';':
            case '.':
                ++pos_;
                return make(TokenType::Punct, start, std::string(1, c));
            default:
                break;
        }
        static constexpr std::string_view kOps[] = {"->>", "||", "->", "<<", ">>", "<=", ">=", "==", "!=",
                                                    "<>",  "<",  ">",  "=",  "+",  "-",  "*",  "/",  "%",
                                                    "&",   "|",  "~"};
        for (auto op : kOps) {
            if (src_.substr(pos_, op.size()) == op) {
                pos_ += op.size();
                return make(TokenType::Operator, start, std::string(op));
            }
        }
        throw ParseError(start, std::string("unexpected character '") + c + "'");
    }

    Token number(std::size_t start) {
        if (peek() == '0' && (peek(1) == 'x' || peek(1) == 'X')) {
            pos_ += 2;
            while (std::isxdigit(static_cast<unsigned char>(peek()))) ++pos_;
        } else {
            while (std::isdigit(static_cast<unsigned char>(peek())) || peek() == '_') ++pos_;
            if (peek() == '.') {
                ++pos_;
                while (std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
            }
            if ((peek() == 'e' || peek() == 'E') &&
                (std::isdigit(static_cast<unsigned char>(peek(1))) ||
                 ((peek(1) == '+' || peek(1) == '-') && std::isdigit(static_cast<unsigned char>(peek(2)))))) {
                pos_ += 2;
                while (std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
            }
        }
        if (is_ident_start(peek())) throw ParseError(start, "malformed number");
        return make(TokenType::Number, start, std::string(src_.substr(start, pos_ - start)));
    }

    std::string_view src_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<Token> tokenize(std::string_view sql) { return Lexer(sql).run(); }

}  // namespace pvsql::sql
