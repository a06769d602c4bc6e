#include "pvsql/bench.hpp"

#include "fixture.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>

using namespace pvsql;
using testing::ShopFixture;
using testing::step;

namespace {

constexpr const char* kExDb = "ex";
constexpr const char* kExSql =
    "CREATE TABLE t (a INTEGER, b TEXT, r REAL);"
    "INSERT INTO t VALUES (1, 'x', 0.5), (2, 'y', 1.25), (3, 'x', 2.0);";

struct ExCase {
    const char* gold;
    const char* pred;
    bool correct;  // labelled by hand
};

// Five of ten match.
const ExCase kExCases[] = {
    {"SELECT a, b FROM t", "SELECT a, b FROM t", true},
    {"SELECT a FROM t", "SELECT a FROM t ORDER BY a DESC", true},
    {"SELECT a FROM t ORDER BY a", "SELECT a FROM t ORDER BY a DESC", false},
    {"SELECT a FROM t", "SELECT a, b FROM t", false},
    {"SELECT a, b FROM t", "SELECT b, a FROM t", false},
    {"SELECT 0.1 + 0.2", "SELECT 0.3", true},
    {"SELECT 2.0", "SELECT 2", true},
    {"SELECT b FROM t", "SELECT DISTINCT b FROM t", false},
    {"SELECT a FROM t", "SELEC a FROM t", false},
    {"SELECT a AS x FROM t WHERE r > 1", "SELECT a FROM t WHERE r >= 1.25", true},
};

Task shop_task(std::string id, std::string question, std::string gold,
               Difficulty d = Difficulty::simple) {
    Task t;
    t.task_id = std::move(id);
    t.db_id = testing::kShopDb;
    t.question = std::move(question);
    t.gold_sql = std::move(gold);
    t.difficulty = d;
    return t;
}

Violation cv(ConstraintKind k, std::optional<ConstraintParam> p = std::nullopt) {
    return Violation{ViolationSource::constraint, Constraint{k, p, ""}, "m"};
}

BenchOptions shop_options(const ShopFixture& shop) {
    BenchOptions o;
    o.db_root = shop.root;
    return o;
}

RunRecord failed_record(std::string id, std::string final_sql) {
    RunRecord r;
    r.task = shop_task(std::move(id), "How many customers are there?", "SELECT COUNT(*) FROM customers");
    r.final_sql = final_sql;
    r.drafts = {Draft{final_sql, {}}};
    r.ex_correct = false;
    return r;
}

}  // namespace

TEST_SUITE("bench") {

TEST_CASE("dataset formats") {
    auto bird = parse_tasks(R"([{"question_id": 7, "db_id": "shop", "question": "Q?", "evidence": "E",
        "SQL": "SELECT 1", "difficulty": "moderate"}, {"db_id": "shop", "question": "R?", "SQL": "SELECT 2"}])",
                            DatasetFormat::bird);
    REQUIRE(bird.size() == 2);
    CHECK(bird[0].task_id == "7");
    CHECK(bird[0].evidence == "E");
    CHECK(bird[0].gold_sql == "SELECT 1");
    CHECK(bird[0].difficulty == Difficulty::moderate);
    CHECK(bird[1].task_id == "1");
    CHECK(bird[1].difficulty == Difficulty::unknown);

    auto spider = parse_tasks(R"([{"db_id": "shop", "question": "Q?", "query": "SELECT 1", "evidence": "ignored"}])",
                              DatasetFormat::spider);
    REQUIRE(spider.size() == 1);
    CHECK(spider[0].gold_sql == "SELECT 1");
    CHECK(spider[0].evidence.empty());
    CHECK(spider[0].difficulty == Difficulty::unknown);

    auto mini = parse_tasks(R"({"data": [{"question_id": "m1", "db_id": "shop", "question": "Q?", "SQL": "SELECT 1",
        "difficulty": "challenging"}]})",
                            DatasetFormat::minidev);
    REQUIRE(mini.size() == 1);
    CHECK(mini[0].task_id == "m1");
    CHECK(mini[0].difficulty == Difficulty::challenging);

    CHECK(dataset_format_from_string("spider") == DatasetFormat::spider);
    CHECK_THROWS(dataset_format_from_string("wikisql"));
}

TEST_CASE("malformed records name their index") {
    try {
        parse_tasks(R"([{"db_id": "a", "question": "q", "SQL": "SELECT 1"}, {"db_id": "a", "SQL": "SELECT 1"}])",
                    DatasetFormat::bird);
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(e.index() == 1);
    }
    CHECK_THROWS_AS(parse_tasks("not json", DatasetFormat::bird), FormatError);
    CHECK_THROWS_AS(parse_tasks(R"({"rows": []})", DatasetFormat::bird), FormatError);
    CHECK_THROWS_AS(parse_tasks(R"([{"db_id": "a", "question": "q"}])", DatasetFormat::spider), FormatError);
}

TEST_CASE("execution accuracy on a hand-labelled fixture") {
    testing::TempDir dir;
    testing::write_db(dir.path(), kExDb, kExSql);
    auto db = open_database(dir.path(), kExDb);
    std::size_t hits = 0;
    for (const auto& c : kExCases) {
        bool got = execution_accuracy(c.pred, c.gold, db);
        CHECK_MESSAGE(got == c.correct, c.gold, " vs ", c.pred);
        hits += got;
    }
    CHECK(hits == 5);
    CHECK_THROWS_AS(execution_accuracy("SELECT 1", "SELECT nope FROM t", db), GoldExecutionError);
    CHECK_FALSE(execution_accuracy("", "SELECT 1", db));
}

TEST_CASE("top-level ORDER BY detection") {
    CHECK(has_top_level_order_by("SELECT a FROM t ORDER BY a"));
    CHECK_FALSE(has_top_level_order_by("SELECT a FROM (SELECT a FROM t ORDER BY a)"));
    CHECK_FALSE(has_top_level_order_by("SELECT a FROM t"));
    CHECK_FALSE(has_top_level_order_by("garbage"));
}

TEST_CASE("valid efficiency score") {
    CHECK(valid_efficiency_score({}) == 0.0);
    // with equal timings every correct sample contributes 1
    std::vector<VesSample> same = {{true, 0.3, 0.3}, {false, 0.1, 0.1}, {true, 2.0, 2.0}, {false, 1.0, 1.0}};
    CHECK(valid_efficiency_score(same) == doctest::Approx(50.0));
    CHECK(valid_efficiency_score({{true, 4.0, 1.0}, {false, 1.0, 1.0}}) == doctest::Approx(100.0));
    // 0.5 + 1 + 0 + 0 + 4 over five
    std::vector<VesSample> five = {
        {true, 1.0, 4.0}, {true, 1.0, 1.0}, {false, 1.0, 1.0}, {false, 3.0, 1.0}, {true, 16.0, 1.0}};
    CHECK(valid_efficiency_score(five) == doctest::Approx(110.0));
    CHECK_THROWS_AS(valid_efficiency_score({{true, 0.0, 1.0}}), std::invalid_argument);
    CHECK_NOTHROW(valid_efficiency_score({{false, 0.0, 0.0}}));
}

TEST_CASE("weighted token cost") {
    CHECK(weighted_token_cost(3805, 248) == 723.625);
    CHECK(weighted_token_cost(800, 100) == 200.0);
    CHECK(weighted_token_cost(0, 0) == 0.0);
}

TEST_CASE("query timing") {
    ShopFixture shop;
    auto db = shop.open();
    auto t = time_query(db, "SELECT COUNT(*) FROM orders", 3, 1);
    REQUIRE(t);
    CHECK(*t >= 0.0);
    CHECK(db.execution_count() == 4);
    CHECK_FALSE(time_query(db, "SELECT nope FROM orders"));
}

TEST_CASE("extraction pass rate on gold") {
    std::vector<Task> tasks = {
        shop_task("a", "How many customers are there?", "SELECT COUNT(*) FROM customers"),
        shop_task("b", "How many customers are there?", "SELECT name FROM customers"),
        shop_task("c", "List the customer names.", "not sql at all"),
        shop_task("d", "How many customers?", "not sql at all"),
    };
    tasks.push_back(tasks[0]);
    tasks.back().task_id = "e";
    tasks.back().gold_sql.reset();
    auto e = eval_extraction_on_gold(tasks);
    CHECK(e.n == 4);
    CHECK(e.passed == 2);
    CHECK(e.parse_failures == 2);
    CHECK(e.pass_rate == doctest::Approx(50.0));
    CHECK(e.failing_task_ids == std::vector<std::string>{"b", "d"});
    CHECK(eval_extraction_on_gold({}).pass_rate == 100.0);
}

TEST_CASE("repair rates over a three-round record") {
    RunRecord r;
    r.constraints = {{ConstraintKind::Distinct, std::nullopt, "unique"},
                     {ConstraintKind::TopK, std::int64_t{3}, "top 3"},
                     {ConstraintKind::Count, std::nullopt, "how many"},
                     {ConstraintKind::LiteralPresence, std::string("x"), "x"}};
    Violation syntax{ViolationSource::syntax, std::nullopt, "near x"};
    r.drafts = {
        Draft{"d0", {cv(ConstraintKind::Distinct), cv(ConstraintKind::TopK, std::int64_t{3})}},
        Draft{"d1", {cv(ConstraintKind::TopK, std::int64_t{3}), cv(ConstraintKind::Count)}},
        Draft{"d2", {syntax}},
        Draft{"d3", {}},
    };
    // d0->d1: Distinct fixed, TopK kept; Count broken out of {Count, Literal}.
    // d1->d2: nothing can be judged fixed behind a syntax error.
    // d2->d3: the syntax error is fixed; no constraint was checked before.
    auto rates = eval_repair_rates({r});
    CHECK(rates.pairs == 3);
    CHECK(rates.violations_before == 5);
    CHECK(rates.resolved == 2);
    CHECK(rates.satisfied_before == 2);
    CHECK(rates.broken == 1);
    REQUIRE(rates.success_rate);
    REQUIRE(rates.regression_rate);
    CHECK(*rates.success_rate == doctest::Approx(40.0));
    CHECK(*rates.regression_rate == doctest::Approx(50.0));
}

TEST_CASE("repair rates edge cases") {
    RunRecord clean;
    clean.constraints = {{ConstraintKind::Count, std::nullopt, "how many"}};
    clean.drafts = {Draft{"a", {cv(ConstraintKind::Count)}}, Draft{"b", {}}};
    auto rates = eval_repair_rates({clean});
    CHECK(rates.success_rate == 100.0);
    CHECK_FALSE(rates.regression_rate.has_value());

    RunRecord single;
    single.drafts = {Draft{"a", {}}};
    rates = eval_repair_rates({single});
    CHECK(rates.pairs == 0);
    CHECK_FALSE(rates.success_rate.has_value());
    CHECK_FALSE(rates.regression_rate.has_value());
}

TEST_CASE("scoring a record") {
    ShopFixture shop;
    auto db = shop.open();
    auto r = failed_record("a", "SELECT COUNT(id) FROM customers");
    score_record(r, db, true);
    CHECK(r.ex_correct == true);
    CHECK(r.gold_seconds.has_value());
    CHECK(r.pred_seconds.has_value());

    r.final_sql = "SELECT 1";
    score_record(r, db, true);
    CHECK(r.ex_correct == false);
    CHECK_FALSE(r.gold_seconds.has_value());

    r.task.gold_sql = "SELECT nope FROM customers";
    score_record(r, db, true);
    CHECK_FALSE(r.ex_correct.has_value());
}

TEST_CASE("headroom rerun with gold-derived constraints") {
    ShopFixture shop;
    auto wrong = failed_record("a", "SELECT name FROM customers");
    RunRecord correct = wrong;
    correct.ex_correct = true;
    RunRecord no_gold = wrong;
    no_gold.task.gold_sql.reset();

    ScriptedBackend backend({step(PromptKind::repair, "SELECT COUNT(*) FROM customers")});
    auto h = headroom_rerun({wrong, correct, no_gold}, backend, shop_options(shop));
    CHECK(h.n == 1);
    CHECK(h.corrected == 1);
    CHECK(h.skipped == 1);
    CHECK(h.rate == 100.0);
    REQUIRE(h.reruns.size() == 1);
    CHECK(h.reruns[0].constraints.at(0).kind == ConstraintKind::Count);

    ScriptedBackend idle({});
    auto none = headroom_rerun({correct}, idle, shop_options(shop));
    CHECK(none.n == 0);
    CHECK(none.rate == 0.0);
}

TEST_CASE("error judge distribution") {
    ShopFixture shop;
    auto verdict = [](const char* kind) {
        return step(PromptKind::error_judge, std::string(R"({"error_type": ")") + kind + R"(", "reasoning": "r"})");
    };
    ScriptedBackend backend({verdict("DATABASE_MISINTERPRETATION"), verdict("QUESTION_MISINTERPRETATION"),
                             verdict("DATABASE_MISINTERPRETATION"), verdict("SYNTHESIS_FAILURE"),
                             step(PromptKind::error_judge, "no idea")});
    std::vector<RunRecord> records;
    for (int i = 0; i < 5; ++i) records.push_back(failed_record(std::to_string(i), "SELECT name FROM customers"));
    records[2].final_sql = "SELECT nope FROM customers";
    auto d = judge_errors(records, backend, shop_options(shop));
    CHECK(d.n == 5);
    CHECK(d.classified == 4);
    CHECK(d.unclassified == 1);
    CHECK(d.percent.at(ErrorKind::DatabaseMisinterpretation) == doctest::Approx(50.0));
    CHECK(d.percent.at(ErrorKind::QuestionMisinterpretation) == doctest::Approx(25.0));
    CHECK(d.percent.at(ErrorKind::SynthesisFailure) == doctest::Approx(25.0));
    auto reqs = backend.requests();
    CHECK(reqs[0].text.find("Execution Error (if the predicted SQL failed to run): (none)") != std::string::npos);
    CHECK(reqs[2].text.find("no such column: nope") != std::string::npos);
}

TEST_CASE("probe quality judge") {
    ShopFixture shop;
    auto db = shop.open();
    RunRecord probed = failed_record("p", "SELECT 1");
    probed.grounding.add_probe(execute_probe(db, "SELECT DISTINCT state FROM customers"));
    probed.grounding.add_probe(execute_probe(db, "SELECT ship_date FROM orders"));
    RunRecord unprobed = failed_record("u", "SELECT 1");
    RunRecord garbled = probed;

    auto all_true = R"({"evaluations": [
        {"probe_index": 0, "relevant": true, "new_insight": true, "redundant": true},
        {"probe_index": 1, "relevant": true, "new_insight": true, "redundant": true},
        {"probe_index": 1, "relevant": false, "new_insight": false, "redundant": false},
        {"probe_index": 9, "relevant": false, "new_insight": false, "redundant": false}]})";
    ScriptedBackend backend({step(PromptKind::probe_judge, all_true), step(PromptKind::probe_judge, "unsure")});
    auto q = judge_probe_quality({probed, unprobed, garbled}, backend, shop_options(shop));
    CHECK(q.n == 2);
    CHECK(q.unparsed_records == 1);
    CHECK(q.relevant == 100.0);
    CHECK(q.new_insight == 100.0);
    CHECK(q.redundant == 100.0);
    CHECK(backend.requests()[0].text.find("Probe 2: SELECT ship_date FROM orders LIMIT 10") != std::string::npos);

    ScriptedBackend idle({});
    auto none = judge_probe_quality({unprobed}, idle, shop_options(shop));
    CHECK(none.n == 0);
    CHECK(none.relevant == 0.0);
}

TEST_CASE("metrics") {
    auto rec = [](Difficulty d, std::optional<bool> ok, int probes, std::int64_t in, std::int64_t out) {
        RunRecord r;
        r.task.difficulty = d;
        r.ex_correct = ok;
        r.probe_count = probes;
        r.tokens_in = in;
        r.tokens_out = out;
        return r;
    };
    std::vector<RunRecord> rs = {rec(Difficulty::simple, true, 1, 100, 10), rec(Difficulty::simple, false, 2, 200, 20),
                                 rec(Difficulty::moderate, true, 3, 300, 30),
                                 rec(Difficulty::challenging, std::nullopt, 2, 400, 40)};
    rs[0].gold_seconds = 4.0;
    rs[0].pred_seconds = 1.0;
    auto m = compute_metrics(rs);
    CHECK(m.n_tasks == 3);
    CHECK(m.gold_failures == 1);
    CHECK(m.ex == doctest::Approx(200.0 / 3.0));
    // (2 + 0 + 1) / 3
    CHECK(m.ves == doctest::Approx(100.0));
    std::size_t total = 0;
    for (const auto& [_, v] : m.per_difficulty) total += v.n;
    CHECK(total == m.n_tasks);
    CHECK(m.per_difficulty.at("simple").ex == doctest::Approx(50.0));
    CHECK(m.per_difficulty.at("moderate").ves == doctest::Approx(100.0));
    CHECK(m.mean_tokens_in == 250.0);
    CHECK(m.mean_tokens_out == 25.0);
    CHECK(m.weighted_token_cost == doctest::Approx(250.0 / 8 + 25.0));
    CHECK(m.mean_probes == 2.0);

    CHECK(report_to_json(m) == report_to_json(compute_metrics(rs)));
    auto j = report_to_json(m);
    CHECK(j["n_tasks"] == 3);
    CHECK(j["per_difficulty"]["moderate"]["n"] == 1);
    auto table = format_report(m, "X");
    CHECK(table.rfind("Method", 0) == 0);
    CHECK(table.find("\nX ") != std::string::npos);

    auto empty = compute_metrics({});
    CHECK(empty.n_tasks == 0);
    CHECK(empty.ex == 0.0);
}

TEST_CASE("benchmark runner keeps task order and round-trips traces") {
    ShopFixture shop;
    std::vector<Task> tasks = {
        shop_task("t1", "How many customers are there?", "SELECT COUNT(*) FROM customers"),
        shop_task("t2", "How many products are there?", "SELECT COUNT(*) FROM products", Difficulty::moderate),
        testing::case_study_task(),
    };
    auto steps = std::vector<ScriptStep>{
        step(PromptKind::probe, testing::done_json()), step(PromptKind::generate, "SELECT COUNT(*) FROM customers"),
        step(PromptKind::probe, testing::done_json()), step(PromptKind::generate, "SELECT COUNT(*) FROM customers"),
    };
    for (auto s : testing::case_study_script()) steps.push_back(s);
    ScriptedBackend backend(steps);
    auto opts = shop_options(shop);
    opts.workers = 4;
    std::vector<std::string> seen;
    auto records = run_benchmark(tasks, backend, opts, [&](const RunRecord& r) { seen.push_back(r.task.task_id); });
    REQUIRE(records.size() == 3);
    CHECK(seen == std::vector<std::string>{"t1", "t2", "case"});
    CHECK(records[0].ex_correct == true);
    CHECK(records[1].ex_correct == false);
    CHECK(records[2].ex_correct == true);
    CHECK(records[2].probe_count == 2);

    auto m = compute_metrics(records);
    CHECK(m.ex == doctest::Approx(200.0 / 3.0));

    auto path = shop.dir.path() / "trace.jsonl";
    write_trace(path, records);
    CHECK(read_trace(path) == records);

    std::ofstream(shop.dir.path() / "bad.jsonl") << "{\"task\": 1}\n";
    CHECK_THROWS(read_trace(shop.dir.path() / "bad.jsonl"));
}

TEST_CASE("runner records tasks whose database is missing") {
    ShopFixture shop;
    auto t = shop_task("x", "How many?", "SELECT 1");
    t.db_id = "nowhere";
    ScriptedBackend backend({});
    auto records = run_benchmark({t}, backend, shop_options(shop));
    REQUIRE(records.size() == 1);
    CHECK(records[0].failed);
    CHECK(records[0].task == t);
}

TEST_CASE("runner stops on script mismatch") {
    ShopFixture shop;
    ScriptedBackend backend({step(PromptKind::repair, "SELECT 1")});
    CHECK_THROWS_AS(run_benchmark({shop_task("x", "How many customers?", "SELECT 1")}, backend, shop_options(shop)),
                    ScriptMismatch);
}

}  // TEST_SUITE
