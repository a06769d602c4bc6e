#pragma once

// Shared test fixtures: a small shop database on disk and scripted model
// transcripts.

#include "pvsql/core.hpp"
#include "pvsql/executor.hpp"
#include "pvsql/llm.hpp"

#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace pvsql::testing {

// Unique directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

// Writes <root>/<db_id>/<db_id>.sqlite from a SQL script.
std::filesystem::path write_db(const std::filesystem::path& root, const std::string& db_id, const std::string& sql);

// customers(id, name, state, signup_date), products(id, name, category, price),
// orders(id, customer_id, product_id, order_date, ship_date, required_date,
// amount, status). Dates are YYYY-MM-DD text.
inline constexpr const char* kShopDb = "shop";
std::filesystem::path write_shop_db(const std::filesystem::path& root);

// Shop database in its own temp dir.
struct ShopFixture {
    TempDir dir;
    std::filesystem::path root;
    ShopFixture();
    DatabaseHandle open(DbOptions options = {}) const;
};

std::filesystem::path data_dir();

ScriptStep step(PromptKind kind, std::string text, std::int64_t tokens_in = 0, std::int64_t tokens_out = 0);
std::string probe_json(const std::string& sql, const ValueMap& mappings = {}, const std::string& insight = {});
std::string done_json();
std::string script_to_json(const std::vector<ScriptStep>& steps);

// Late-shipment question over the shop database.
Task case_study_task();
inline constexpr const char* kCaseInitialSql =
    "SELECT p.category, CAST(SUM(CASE WHEN o.ship_date > o.required_date THEN 1 ELSE 0 END) AS REAL) * 100 / "
    "COUNT(*) FROM orders o JOIN customers c ON o.customer_id = c.id JOIN products p ON o.product_id = p.id "
    "WHERE c.state = 'CA' GROUP BY p.category";
inline constexpr const char* kCaseFinalSql =
    "SELECT p.category, CAST(SUM(CASE WHEN o.ship_date > o.required_date THEN 1 ELSE 0 END) AS REAL) * 100 / "
    "COUNT(*) AS late_pct FROM orders o JOIN customers c ON o.customer_id = c.id JOIN products p ON "
    "o.product_id = p.id WHERE c.state = 'CA' AND strftime('%Y', o.order_date) = '2023' GROUP BY p.category "
    "ORDER BY late_pct DESC LIMIT 3";
// probe, probe, done, generate, repair
std::vector<ScriptStep> case_study_script();


// A random read-only statement over the shop schema: joins, DISTINCT,
// aggregates, window functions, comparisons (literal on either side), BETWEEN,
// IN lists and subqueries, GROUP BY/HAVING, ORDER BY, LIMIT/OFFSET, CTEs and
// compound selects.
std::string random_select(std::mt19937& rng);

}  // namespace pvsql::testing
