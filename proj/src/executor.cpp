#include "pvsql/executor.hpp"

#include "pvsql/sql_ast.hpp"
#include "pvsql/text.hpp"

#include <sqlite3.h>

#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>

namespace pvsql {

namespace {

using Clock = std::chrono::steady_clock;

struct Stmt {
    sqlite3_stmt* s = nullptr;
    ~Stmt() { sqlite3_finalize(s); }
};

struct Deadline {
    Clock::time_point end;
    bool fired = false;
};

int on_progress(void* arg) {
    auto* d = static_cast<Deadline*>(arg);
    if (Clock::now() >= d->end) {
        d->fired = true;
        return 1;
    }
    return 0;
}

// Skips whitespace and SQL comments.
std::size_t skip_trivia(std::string_view s, std::size_t pos) {
    while (pos < s.size()) {
        if (std::isspace(static_cast<unsigned char>(s[pos])) || s[pos] == ';') {
            ++pos;
        } else if (s.substr(pos, 2) == "--") {
            auto nl = s.find('\n', pos);
            pos = nl == std::string_view::npos ? s.size() : nl + 1;
        } else if (s.substr(pos, 2) == "/*") {
            auto close = s.find("*/", pos + 2);
            pos = close == std::string_view::npos ? s.size() : close + 2;
        } else {
            break;
        }
    }
    return pos;
}

std::string format_seconds(double t) {
    char buf[32];
    if (std::floor(t) == t) std::snprintf(buf, sizeof buf, "%.0f", t);
    else std::snprintf(buf, sizeof buf, "%g", t);
    return buf;
}

std::string to_hex(const void* data, int n) {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out;
    out.reserve(static_cast<std::size_t>(n) * 2);
    const auto* p = static_cast<const unsigned char*>(data);
    for (int i = 0; i < n; ++i) {
        out += kDigits[p[i] >> 4];
        out += kDigits[p[i] & 0xF];
    }
    return out;
}

Cell read_cell(sqlite3_stmt* s, int i) {
    switch (sqlite3_column_type(s, i)) {
        case SQLITE_INTEGER:
            return static_cast<std::int64_t>(sqlite3_column_int64(s, i));
        case SQLITE_FLOAT:
            return sqlite3_column_double(s, i);
        case SQLITE_TEXT:
            return std::string(reinterpret_cast<const char*>(sqlite3_column_text(s, i)),
                               static_cast<std::size_t>(sqlite3_column_bytes(s, i)));
        case SQLITE_BLOB:
            return BlobHex{to_hex(sqlite3_column_blob(s, i), sqlite3_column_bytes(s, i))};
        default:
            return std::monostate{};
    }
}

// Prepares exactly one statement. Returns the engine's message on failure.
std::optional<std::string> prepare_one(sqlite3* db, std::string_view sql, Stmt& out) {
    const char* tail = nullptr;
    int rc = sqlite3_prepare_v2(db, sql.data(), static_cast<int>(sql.size()), &out.s, &tail);
    if (rc != SQLITE_OK) return std::string(sqlite3_errmsg(db));
    if (!out.s) return std::string("empty statement");
    std::size_t consumed = static_cast<std::size_t>(tail - sql.data());
    if (skip_trivia(sql, consumed) < sql.size()) return std::string("only a single SQL statement is allowed");
    if (!sqlite3_stmt_readonly(out.s)) return std::string("only read-only statements are allowed");
    return std::nullopt;
}

std::string quote_ident(const std::string& name) { return "\"" + text::replace_all(name, "\"", "\"\"") + "\""; }

}  // namespace

DatabaseHandle::DatabaseHandle(std::string db_id, std::filesystem::path path, DbOptions options)
    : db_id_(std::move(db_id)), path_(std::move(path)), options_(options) {
    if (!(options_.timeout_seconds > 0)) throw std::invalid_argument("timeout_seconds must be positive");
    if (options_.probe_row_cap < 1) throw std::invalid_argument("probe_row_cap must be at least 1");
    std::error_code ec;
    if (!std::filesystem::is_regular_file(path_, ec))
        throw DbUnavailable("database file not found: " + path_.string());
    int rc = sqlite3_open_v2(path_.string().c_str(), &db_, SQLITE_OPEN_READONLY | SQLITE_OPEN_FULLMUTEX, nullptr);
    if (rc != SQLITE_OK) {
        std::string msg = db_ ? sqlite3_errmsg(db_) : "out of memory";
        sqlite3_close(db_);
        db_ = nullptr;
        throw DbUnavailable("cannot open " + path_.string() + ": " + msg);
    }
    char* err = nullptr;
    rc = sqlite3_exec(db_, "PRAGMA query_only = 1; SELECT count(*) FROM sqlite_master;", nullptr, nullptr, &err);
    if (rc != SQLITE_OK) {
        std::string msg = err ? err : "unknown error";
        sqlite3_free(err);
        sqlite3_close(db_);
        db_ = nullptr;
        throw DbUnavailable("unreadable database " + path_.string() + ": " + msg);
    }
}

DatabaseHandle::~DatabaseHandle() {
    if (db_) sqlite3_close(db_);
}

DatabaseHandle::DatabaseHandle(DatabaseHandle&& other) noexcept
    : db_id_(std::move(other.db_id_)),
      path_(std::move(other.path_)),
      options_(other.options_),
      db_(other.db_),
      executions_(other.executions_) {
    other.db_ = nullptr;
}

DatabaseHandle& DatabaseHandle::operator=(DatabaseHandle&& other) noexcept {
    if (this != &other) {
        if (db_) sqlite3_close(db_);
        db_id_ = std::move(other.db_id_);
        path_ = std::move(other.path_);
        options_ = other.options_;
        db_ = other.db_;
        executions_ = other.executions_;
        other.db_ = nullptr;
    }
    return *this;
}

std::filesystem::path database_path(const std::filesystem::path& db_root, const std::string& db_id) {
    return db_root / db_id / (db_id + ".sqlite");
}

DatabaseHandle open_database(const std::filesystem::path& db_root, const std::string& db_id, DbOptions options) {
    return DatabaseHandle(db_id, database_path(db_root, db_id), options);
}

SchemaDescription load_schema(const DatabaseHandle& db) {
    SchemaDescription schema;
    {
        Stmt st;
        const char* q =
            "SELECT name FROM sqlite_master WHERE type = 'table' AND name NOT LIKE 'sqlite_%' ORDER BY rowid";
        if (sqlite3_prepare_v2(db.raw(), q, -1, &st.s, nullptr) != SQLITE_OK)
            throw DbUnavailable(std::string("cannot read schema: ") + sqlite3_errmsg(db.raw()));
        while (sqlite3_step(st.s) == SQLITE_ROW) {
            TableInfo t;
            t.name = reinterpret_cast<const char*>(sqlite3_column_text(st.s, 0));
            schema.tables.push_back(std::move(t));
        }
    }
    for (auto& table : schema.tables) {
        Stmt st;
        auto q = "PRAGMA table_info(" + quote_ident(table.name) + ")";
        if (sqlite3_prepare_v2(db.raw(), q.c_str(), -1, &st.s, nullptr) != SQLITE_OK) continue;
        while (sqlite3_step(st.s) == SQLITE_ROW) {
            ColumnInfo c;
            c.name = reinterpret_cast<const char*>(sqlite3_column_text(st.s, 1));
            const auto* type = sqlite3_column_text(st.s, 2);
            c.declared_type = type ? reinterpret_cast<const char*>(type) : "";
            c.primary_key = sqlite3_column_int(st.s, 5) > 0;
            table.columns.push_back(std::move(c));
        }
    }
    for (const auto& table : schema.tables) {
        Stmt st;
        auto q = "PRAGMA foreign_key_list(" + quote_ident(table.name) + ")";
        if (sqlite3_prepare_v2(db.raw(), q.c_str(), -1, &st.s, nullptr) != SQLITE_OK) continue;
        while (sqlite3_step(st.s) == SQLITE_ROW) {
            ForeignKey fk;
            fk.from_table = table.name;
            fk.to_table = reinterpret_cast<const char*>(sqlite3_column_text(st.s, 2));
            fk.from_column = reinterpret_cast<const char*>(sqlite3_column_text(st.s, 3));
            const auto* to = sqlite3_column_text(st.s, 4);
            if (to) {
                fk.to_column = reinterpret_cast<const char*>(to);
            } else if (const auto* target = schema.find_table(fk.to_table)) {
                for (const auto& c : target->columns) {
                    if (c.primary_key) {
                        fk.to_column = c.name;
                        break;
                    }
                }
            }
            schema.foreign_keys.push_back(std::move(fk));
        }
    }
    return schema;
}

std::optional<Violation> syntax_check(const DatabaseHandle& db, std::string_view sql) {
    auto start = skip_trivia(sql, 0);
    if (start >= sql.size()) return Violation{ViolationSource::syntax, std::nullopt, "empty SQL statement"};
    {
        Stmt plain;
        if (auto err = prepare_one(db.raw(), sql, plain))
            return Violation{ViolationSource::syntax, std::nullopt, *err};
    }
    std::string explain = "EXPLAIN " + std::string(sql.substr(start));
    Stmt st;
    if (sqlite3_prepare_v2(db.raw(), explain.c_str(), -1, &st.s, nullptr) != SQLITE_OK)
        return Violation{ViolationSource::syntax, std::nullopt, sqlite3_errmsg(db.raw())};
    return std::nullopt;
}

std::variant<ExecResult, Violation> execute(DatabaseHandle& db, std::string_view sql,
                                            std::optional<std::size_t> row_cap) {
    auto t0 = Clock::now();
    Stmt st;
    if (auto err = prepare_one(db.raw(), sql, st)) return Violation{ViolationSource::execution, std::nullopt, *err};
    db.note_execution();

    Deadline deadline;
    deadline.end = t0 + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(db.timeout_seconds()));
    sqlite3_progress_handler(db.raw(), 1000, on_progress, &deadline);

    ExecResult res;
    int ncol = sqlite3_column_count(st.s);
    for (int i = 0; i < ncol; ++i) res.columns.emplace_back(sqlite3_column_name(st.s, i));

    int rc;
    while ((rc = sqlite3_step(st.s)) == SQLITE_ROW) {
        if (row_cap && res.rows.size() >= *row_cap) {
            res.truncated = true;
            continue;
        }
        Row row;
        row.reserve(static_cast<std::size_t>(ncol));
        for (int i = 0; i < ncol; ++i) row.push_back(read_cell(st.s, i));
        res.rows.push_back(std::move(row));
    }
    sqlite3_progress_handler(db.raw(), 0, nullptr, nullptr);

    if (rc != SQLITE_DONE) {
        if (deadline.fired)
            return Violation{ViolationSource::execution, std::nullopt,
                             "timeout after " + format_seconds(db.timeout_seconds()) + "s"};
        return Violation{ViolationSource::execution, std::nullopt, sqlite3_errmsg(db.raw())};
    }
    res.elapsed_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    return res;
}

bool looks_like_select(std::string_view sql) {
    auto pos = skip_trivia(sql, 0);
    auto rest = sql.substr(pos);
    for (std::string_view kw : {"select", "with"}) {
        if (text::istarts_with(rest, kw) && (rest.size() == kw.size() || !text::is_word_char(rest[kw.size()])))
            return true;
    }
    return false;
}

std::string cap_limit(std::string_view sql, std::size_t cap) {
    auto body = text::trim(sql);
    while (!body.empty() && body.back() == ';') body = text::trim(body.substr(0, body.size() - 1));
    auto wrap = [&] { return "SELECT * FROM (" + body + ") LIMIT " + std::to_string(cap); };
    try {
        auto ast = sql::parse_sql(body);
        const auto& q = ast.query;
        if (!q.limit) {
            return body.substr(0, q.end) + " LIMIT " + std::to_string(cap) + body.substr(q.end);
        }
        auto n = sql::integer_literal(*q.limit);
        if (!n) return wrap();
        if (*n >= 0 && static_cast<std::size_t>(*n) <= cap) return body;
        return body.substr(0, q.limit->begin) + std::to_string(cap) + body.substr(q.limit->end);
    } catch (const sql::ParseError&) {
        return wrap();
    }
}

ProbeRecord execute_probe(DatabaseHandle& db, std::string_view probe_sql) {
    if (!looks_like_select(probe_sql)) throw NotASelect("probe is not a SELECT statement");
    auto cap = db.probe_row_cap();
    ProbeRecord rec;
    rec.probe_sql = cap_limit(probe_sql, cap);
    auto run_sql = rec.probe_sql == text::trim(probe_sql) ? rec.probe_sql : cap_limit(probe_sql, cap + 1);
    auto out = execute(db, run_sql, cap);
    if (auto* v = std::get_if<Violation>(&out)) {
        rec.result = v->message;
    } else {
        auto& r = std::get<ExecResult>(out);
        rec.result = SampledRows{std::move(r.columns), std::move(r.rows), r.truncated};
    }
    return rec;
}

}  // namespace pvsql
