#pragma once

// Read-only SQLite access: compile-only syntax checks, timed execution with a
// statement timeout, and row-capped probe sampling.

#include "pvsql/core.hpp"

#include <cstddef>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>

struct sqlite3;

namespace pvsql {

class DbUnavailable : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NotASelect : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct DbOptions {
    double timeout_seconds = 30.0;
    std::size_t probe_row_cap = 10;
};

struct ExecResult {
    std::vector<std::string> columns;
    std::vector<Row> rows;
    bool truncated = false;
    double elapsed_seconds = 0.0;
};

// One read-only connection. Not thread-safe; confine to one worker.
class DatabaseHandle {
public:
    DatabaseHandle(std::string db_id, std::filesystem::path path, DbOptions options = {});
    ~DatabaseHandle();
    DatabaseHandle(DatabaseHandle&& other) noexcept;
    DatabaseHandle& operator=(DatabaseHandle&& other) noexcept;
    DatabaseHandle(const DatabaseHandle&) = delete;
    DatabaseHandle& operator=(const DatabaseHandle&) = delete;

    const std::string& db_id() const { return db_id_; }
    const std::filesystem::path& path() const { return path_; }
    bool read_only() const { return true; }
    double timeout_seconds() const { return options_.timeout_seconds; }
    std::size_t probe_row_cap() const { return options_.probe_row_cap; }

    // Statements run by execute() (and so by execute_probe) on this handle.
    std::size_t execution_count() const { return executions_; }

    sqlite3* raw() const { return db_; }
    void note_execution() { ++executions_; }

private:
    std::string db_id_;
    std::filesystem::path path_;
    DbOptions options_;
    sqlite3* db_ = nullptr;
    std::size_t executions_ = 0;
};

// `<db_root>/<db_id>/<db_id>.sqlite`
std::filesystem::path database_path(const std::filesystem::path& db_root, const std::string& db_id);

DatabaseHandle open_database(const std::filesystem::path& db_root, const std::string& db_id,
                             DbOptions options = {});

SchemaDescription load_schema(const DatabaseHandle& db);

// Compiles `EXPLAIN <sql>` without stepping it. Unknown tables and columns,
// write statements and multiple statements are all reported here.
std::optional<Violation> syntax_check(const DatabaseHandle& db, std::string_view sql);

// Runs a read-only statement to completion. At most `row_cap` rows are kept
// when given; `truncated` tells whether more were produced.
std::variant<ExecResult, Violation> execute(DatabaseHandle& db, std::string_view sql,
                                            std::optional<std::size_t> row_cap = std::nullopt);

// True when the text, after leading whitespace and comments, starts with
// SELECT or WITH.
bool looks_like_select(std::string_view sql);

// Rewrites the statement so it returns at most `cap` rows: an absent or larger
// literal LIMIT is replaced, anything unparseable is wrapped in a subquery.
std::string cap_limit(std::string_view sql, std::size_t cap);

// Throws NotASelect before touching the database. Execution errors become the
// record's result text.
ProbeRecord execute_probe(DatabaseHandle& db, std::string_view probe_sql);

}  // namespace pvsql
