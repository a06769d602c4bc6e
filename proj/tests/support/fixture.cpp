#include "fixture.hpp"

#include "pvsql/json_codec.hpp"

#include <sqlite3.h>

#include <atomic>
#include <chrono>
#include <stdexcept>

namespace pvsql::testing {

namespace {

constexpr const char* kShopSql = R"(
CREATE TABLE customers (
  id INTEGER PRIMARY KEY,
  name TEXT NOT NULL,
  state TEXT,
  signup_date DATE
);
CREATE TABLE products (
  id INTEGER PRIMARY KEY,
  name TEXT NOT NULL,
  category TEXT,
  price REAL
);
CREATE TABLE orders (
  id INTEGER PRIMARY KEY,
  customer_id INTEGER REFERENCES customers(id),
  product_id INTEGER REFERENCES products(id),
  order_date DATE,
  ship_date DATE,
  required_date DATE,
  amount REAL,
  status TEXT
);
INSERT INTO customers VALUES
  (1, 'Alice', 'CA', '2021-03-02'),
  (2, 'Bob', 'NY', '2021-05-11'),
  (3, 'Carol', 'TX', '2022-01-20'),
  (4, 'Dan', 'CA', '2022-07-04'),
  (5, 'Erin', 'NY', '2022-09-30'),
  (6, 'Frank', 'WA', '2023-02-14'),
  (7, 'Grace', 'CA', '2023-06-01');
INSERT INTO products VALUES
  (1, 'Laptop', 'Electronics', 1200.0),
  (2, 'Phone', 'Electronics', 800.0),
  (3, 'Desk', 'Furniture', 350.0),
  (4, 'Chair', 'Furniture', 120.0),
  (5, 'Novel', 'Books', 15.5),
  (6, 'Atlas', 'Books', 45.0),
  (7, 'Lamp', 'Home', 60.0),
  (8, 'Mug', 'Home', 9.99);
INSERT INTO orders VALUES
  (1, 1, 1, '2023-01-05', '2023-01-15', '2023-01-10', 1200.0, 'shipped'),
  (2, 2, 3, '2023-01-07', '2023-01-09', '2023-01-12', 350.0, 'shipped'),
  (3, 4, 5, '2023-02-11', '2023-02-20', '2023-02-15', 15.5, 'shipped'),
  (4, 1, 4, '2023-03-03', '2023-03-05', '2023-03-10', 120.0, 'shipped'),
  (5, 3, 2, '2023-03-15', '2023-03-25', '2023-03-20', 800.0, 'shipped'),
  (6, 7, 7, '2023-04-01', '2023-04-03', '2023-04-08', 60.0, 'shipped'),
  (7, 4, 6, '2023-05-09', '2023-05-19', '2023-05-14', 45.0, 'shipped'),
  (8, 5, 8, '2023-06-21', '2023-06-22', '2023-06-25', 9.99, 'shipped'),
  (9, 7, 2, '2023-07-02', '2023-07-12', '2023-07-06', 800.0, 'shipped'),
  (10, 1, 3, '2022-11-12', '2022-11-20', '2022-11-15', 350.0, 'shipped'),
  (11, 6, 1, '2022-12-01', '2022-12-03', '2022-12-05', 1200.0, 'returned'),
  (12, 2, 5, '2022-12-18', '2022-12-28', '2022-12-22', 15.5, 'shipped'),
  (13, 4, 7, '2023-08-14', '2023-08-16', '2023-08-20', 60.0, 'shipped'),
  (14, 7, 4, '2023-09-09', '2023-09-18', '2023-09-12', 120.0, 'shipped'),
  (15, 3, 8, '2023-10-30', '2023-11-02', '2023-11-05', 9.99, 'pending');
)";

}  // namespace

TempDir::TempDir() {
    static std::atomic<int> counter{0};
    auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = std::filesystem::temp_directory_path() /
            ("pvsql-test-" + std::to_string(stamp) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
}

std::filesystem::path write_db(const std::filesystem::path& root, const std::string& db_id, const std::string& sql) {
    auto dir = root / db_id;
    std::filesystem::create_directories(dir);
    auto file = dir / (db_id + ".sqlite");
    std::filesystem::remove(file);
    sqlite3* db = nullptr;
    if (sqlite3_open(file.c_str(), &db) != SQLITE_OK) throw std::runtime_error("cannot create " + file.string());
    char* msg = nullptr;
    int rc = sqlite3_exec(db, sql.c_str(), nullptr, nullptr, &msg);
    std::string err = msg ? msg : "";
    sqlite3_free(msg);
    sqlite3_close(db);
    if (rc != SQLITE_OK) throw std::runtime_error("fixture SQL failed: " + err);
    return file;
}

std::filesystem::path write_shop_db(const std::filesystem::path& root) { return write_db(root, kShopDb, kShopSql); }

ShopFixture::ShopFixture() : root(dir.path()) { write_shop_db(root); }

DatabaseHandle ShopFixture::open(DbOptions options) const { return open_database(root, kShopDb, options); }

std::filesystem::path data_dir() { return PVSQL_TEST_DATA_DIR; }

ScriptStep step(PromptKind kind, std::string text, std::int64_t tokens_in, std::int64_t tokens_out) {
    return ScriptStep{kind, std::move(text), tokens_in, tokens_out};
}

std::string probe_json(const std::string& sql, const ValueMap& mappings, const std::string& insight) {
    Json j{{"action", "probe"}, {"probe_sql", sql}, {"value_mappings", mappings}};
    if (!insight.empty()) j["insight"] = insight;
    return j.dump();
}

std::string done_json() { return Json{{"action", "done"}}.dump(); }

std::string script_to_json(const std::vector<ScriptStep>& steps) {
    Json arr = Json::array();
    for (const auto& s : steps) {
        arr.push_back({{"expect_kind", std::string(to_string(s.expect_kind))},
                       {"response_text", s.response_text},
                       {"tokens_in", s.tokens_in},
                       {"tokens_out", s.tokens_out}});
    }
    return arr.dump(1);
}

Task case_study_task() {
    Task t;
    t.task_id = "case";
    t.db_id = kShopDb;
    t.question =
        "List the top 3 unique product categories by percentage of orders from California customers that were "
        "shipped late in 2023.";
    t.gold_sql = kCaseFinalSql;
    t.difficulty = Difficulty::challenging;
    return t;
}

std::vector<ScriptStep> case_study_script() {
    return {
        step(PromptKind::probe, probe_json("SELECT DISTINCT state FROM customers LIMIT 5", {{"California", "CA"}},
                                           "State stored as 2-letter codes"),
             900, 60),
        step(PromptKind::probe,
             Json{{"action", "probe"},
                  {"probe_sql", "SELECT ship_date, required_date FROM orders LIMIT 3"},
                  {"relevant_columns", {{"orders", {"ship_date", "required_date", "order_date"}}}},
                  {"insights", {"Dates as YYYY-MM-DD", "Late means ship_date > required_date"}}}
                 .dump(),
             1000, 70),
        step(PromptKind::probe, done_json(), 1100, 10),
        step(PromptKind::generate, std::string("```sql\n") + kCaseInitialSql + "\n```", 1200, 80),
        step(PromptKind::repair, kCaseFinalSql, 1300, 90),
    };
}

namespace {

struct Col {
    const char* table;
    const char* alias;
    const char* name;
    enum Type { Int, Real, Text, Date } type;
};

const std::vector<Col> kCols = {
    {"customers", "c", "id", Col::Int},        {"customers", "c", "name", Col::Text},
    {"customers", "c", "state", Col::Text},    {"customers", "c", "signup_date", Col::Date},
    {"products", "p", "id", Col::Int},         {"products", "p", "name", Col::Text},
    {"products", "p", "category", Col::Text},  {"products", "p", "price", Col::Real},
    {"orders", "o", "id", Col::Int},           {"orders", "o", "customer_id", Col::Int},
    {"orders", "o", "product_id", Col::Int},   {"orders", "o", "order_date", Col::Date},
    {"orders", "o", "ship_date", Col::Date},   {"orders", "o", "required_date", Col::Date},
    {"orders", "o", "amount", Col::Real},      {"orders", "o", "status", Col::Text},
};

class Gen {
public:
    explicit Gen(std::mt19937& rng) : rng_(rng) {}

    std::string statement() {
        if (chance(0.15)) {
            auto inner = select(0);
            return "WITH t AS (" + inner + ") SELECT * FROM t" + (chance(0.5) ? " LIMIT " + num(1, 5) : "");
        }
        if (chance(0.1)) {
            auto tbl = pick_table();
            auto c = pick_col(tbl);
            std::string a = "SELECT " + ref(c) + " FROM " + from_of(tbl);
            std::string b = "SELECT " + ref(c) + " FROM " + from_of(tbl) + " WHERE " + predicate(tbl, 1);
            return a + (chance(0.5) ? " UNION " : " EXCEPT ") + b;
        }
        return select(0);
    }

private:
    std::mt19937& rng_;

    bool chance(double p) { return std::bernoulli_distribution(p)(rng_); }
    int range(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
    std::string num(int lo, int hi) { return std::to_string(range(lo, hi)); }
    template <typename T>
    const T& one_of(const std::vector<T>& v) {
        return v[static_cast<std::size_t>(range(0, static_cast<int>(v.size()) - 1))];
    }

    // Tables in scope: 0 customers, 1 products, 2 orders, 3 orders+customers, 4 orders+products
    int pick_table() { return range(0, 4); }

    std::string from_of(int t) {
        switch (t) {
            case 0: return "customers c";
            case 1: return "products p";
            case 2: return "orders o";
            case 3: return "orders o JOIN customers c ON o.customer_id = c.id";
            default: return "orders o JOIN products p ON o.product_id = p.id";
        }
    }

    std::vector<Col> cols_of(int t) {
        std::vector<Col> out;
        for (const auto& c : kCols) {
            std::string tb = c.table;
            bool in = (t == 0 && tb == "customers") || (t == 1 && tb == "products") || (t == 2 && tb == "orders") ||
                      (t == 3 && (tb == "orders" || tb == "customers")) ||
                      (t == 4 && (tb == "orders" || tb == "products"));
            if (in) out.push_back(c);
        }
        return out;
    }

    Col pick_col(int t) { return one_of(cols_of(t)); }

    Col pick_col(int t, Col::Type type) {
        std::vector<Col> v;
        for (const auto& c : cols_of(t))
            if (c.type == type || (type == Col::Real && c.type == Col::Int)) v.push_back(c);
        return v.empty() ? pick_col(t) : one_of(v);
    }

    std::string ref(const Col& c) { return std::string(c.alias) + "." + c.name; }

    std::string literal(const Col& c) {
        switch (c.type) {
            case Col::Int: return num(0, 20);
            case Col::Real: return chance(0.5) ? num(1, 900) : num(1, 900) + "." + num(0, 99);
            case Col::Date:
                return one_of(std::vector<std::string>{"'2023-01-05'", "'2022-12-01'", "'2023-06-30'", "'2021'"});
            case Col::Text:
            default:
                return one_of(std::vector<std::string>{"'CA'", "'NY'", "'Books'", "'O''Brien'", "'shipped'",
                                                       "'Home & Garden'", "'x'"});
        }
    }

    std::string predicate(int t, int depth) {
        auto c = pick_col(t);
        auto op = one_of(std::vector<std::string>{"=", "<>", "!=", ">", "<", ">=", "<="});
        switch (range(0, depth > 1 ? 6 : 9)) {
            case 0:
            case 1: return ref(c) + " " + op + " " + literal(c);
            case 2: return literal(c) + " " + op + " " + ref(c);
            case 3: return ref(c) + (chance(0.3) ? " NOT" : "") + " BETWEEN " + literal(c) + " AND " + literal(c);
            case 4: return ref(c) + " IN (" + literal(c) + ", " + literal(c) + ")";
            case 5: return ref(c) + (chance(0.5) ? " IS NULL" : " IS NOT NULL");
            case 6: return "strftime('%Y', " + ref(pick_col(t, Col::Date)) + ") = '" + num(2021, 2023) + "'";
            case 7: return "NOT (" + predicate(t, depth + 1) + ")";
            case 8:
                return "(" + predicate(t, depth + 1) + (chance(0.5) ? " AND " : " OR ") + predicate(t, depth + 1) +
                       ")";
            default:
                if (t >= 2) return "o.product_id IN (SELECT p2.id FROM products p2 WHERE p2.price > " + num(10, 500) + ")";
                return "EXISTS (SELECT 1 FROM orders o2 WHERE o2.amount >= " + num(10, 500) + ")";
        }
    }

    std::string item(int t, bool& aggregate) {
        auto c = pick_col(t);
        auto n = pick_col(t, Col::Real);
        switch (range(0, 12)) {
            case 0: aggregate = true; return "COUNT(*)";
            case 1: aggregate = true; return "COUNT(DISTINCT " + ref(c) + ")";
            case 2: aggregate = true; return "SUM(" + ref(n) + ")";
            case 3: aggregate = true; return "AVG(" + ref(n) + ")";
            case 4: aggregate = true; return (chance(0.5) ? "MAX(" : "MIN(") + ref(c) + ")";
            case 5: return ref(n) + " * 100 / " + num(1, 9);
            case 6:
                aggregate = true;
                return "CAST(SUM(CASE WHEN " + predicate(t, 2) + " THEN 1 ELSE 0 END) AS REAL) * 100 / COUNT(*)";
            case 7:
                return one_of(std::vector<std::string>{"ROW_NUMBER()", "RANK()", "DENSE_RANK()"}) + " OVER (" +
                       (chance(0.5) ? "PARTITION BY " + ref(pick_col(t)) + " " : "") + "ORDER BY " + ref(n) +
                       (chance(0.5) ? " DESC" : "") + ")";
            case 8: return "strftime('%Y', " + ref(pick_col(t, Col::Date)) + ")";
            case 9: return "UPPER(" + ref(c) + ") AS u" + num(0, 9);
            default: return ref(c);
        }
    }

    std::string select(int depth) {
        int t = pick_table();
        bool aggregate = false;
        std::vector<std::string> items;
        int n_items = range(1, 3);
        for (int i = 0; i < n_items; ++i) items.push_back(item(t, aggregate));
        std::string sql = std::string("SELECT ") + (chance(0.2) ? "DISTINCT " : "");
        for (std::size_t i = 0; i < items.size(); ++i) sql += (i ? ", " : "") + items[i];
        sql += " FROM " + from_of(t);
        if (chance(0.6)) sql += " WHERE " + predicate(t, depth);
        if (aggregate && chance(0.5)) {
            sql += " GROUP BY " + ref(pick_col(t));
            if (chance(0.4)) sql += " HAVING COUNT(*) " + one_of(std::vector<std::string>{">", ">=", "<"}) + " " + num(0, 3);
        }
        if (chance(0.5)) {
            int terms = range(1, 2);
            sql += " ORDER BY ";
            for (int i = 0; i < terms; ++i) {
                sql += (i ? ", " : "") + ref(chance(0.5) ? pick_col(t, Col::Date) : pick_col(t));
                sql += one_of(std::vector<std::string>{"", " ASC", " DESC"});
            }
        }
        if (chance(0.5)) {
            sql += " LIMIT " + num(1, 10);
            if (chance(0.2)) sql += " OFFSET " + num(0, 3);
        }
        return sql;
    }
};

}  // namespace

std::string random_select(std::mt19937& rng) { return Gen(rng).statement(); }

}  // namespace pvsql::testing
