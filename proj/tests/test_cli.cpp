#include "cli.hpp"
#include "config.hpp"

#include "pvsql/bench.hpp"
#include "pvsql/json_codec.hpp"

#include "fixture.hpp"

#include <doctest.h>

#include <fstream>
#include <sstream>

using namespace pvsql;
using namespace pvsql::cli;
using testing::step;

namespace {

struct Result {
    int code = 0;
    std::string out;
    std::string err;
};

Result run(std::vector<std::string> args) {
    args.insert(args.begin(), {"pvsql", "--log-level", "off"});
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

void write(const std::filesystem::path& p, const std::string& text) { std::ofstream(p) << text; }

// A shop database plus files the subcommands read.
struct CliFixture {
    testing::ShopFixture shop;
    std::filesystem::path dir = shop.dir.path();
    std::string root = shop.root.string();

    std::string file(const std::string& name, const std::string& text) const {
        auto p = dir / name;
        write(p, text);
        return p.string();
    }
    std::string script(const std::string& name, const std::vector<ScriptStep>& steps) const {
        return file(name, testing::script_to_json(steps));
    }
};

const char* kThreeTasks = R"([
  {"question_id": 1, "db_id": "shop", "question": "How many customers are there?",
   "SQL": "SELECT COUNT(*) FROM customers", "difficulty": "simple"},
  {"question_id": 2, "db_id": "shop", "question": "How many products are there?",
   "SQL": "SELECT COUNT(*) FROM products", "difficulty": "moderate"},
  {"question_id": 3, "db_id": "shop", "question": "List the distinct product categories.",
   "SQL": "SELECT DISTINCT category FROM products", "difficulty": "simple"}
])";

std::vector<ScriptStep> three_task_script() {
    return {
        step(PromptKind::probe, testing::done_json(), 10, 1),
        step(PromptKind::generate, "SELECT COUNT(*) FROM customers", 20, 2),
        step(PromptKind::probe, testing::done_json(), 10, 1),
        step(PromptKind::generate, "SELECT COUNT(*) FROM customers", 20, 2),
        step(PromptKind::probe, testing::done_json(), 10, 1),
        step(PromptKind::generate, "SELECT category FROM products", 20, 2),
        step(PromptKind::repair, "SELECT DISTINCT category FROM products", 30, 3),
    };
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("config parsing") {
    auto c = parse_config(R"(
max_probes = 3
max_repairs = 2
mode = no_probe
timeout_seconds = 4.5
probe_row_cap = 7
db_root = "/data/dbs"
workers = 2

[backend]
kind = mock
script_path = s.json

[extra]
enable_thinking = false
)");
    CHECK(c.agent.max_probes == 3);
    CHECK(c.agent.max_repairs == 2);
    CHECK(c.agent.mode == Mode::no_probe);
    CHECK(c.db.timeout_seconds == 4.5);
    CHECK(c.db.probe_row_cap == 7);
    CHECK(c.db_root == "/data/dbs");
    CHECK(c.workers == 2);
    CHECK(c.backend.kind == "mock");
    CHECK(c.backend.script_path == "s.json");
    CHECK(c.backend.extra.at("enable_thinking") == "false");

    auto flat = parse_config("backend.kind = http\nendpoint = http://h/v1/chat/completions\nmodel = m\n");
    CHECK(flat.backend.kind == "http");
    CHECK(flat.backend.endpoint == "http://h/v1/chat/completions");
    CHECK(flat.backend.model == "m");

    CHECK_THROWS_AS(parse_config("colour = red\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("max_probes = many\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("mode = fastest\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("backend = carrier-pigeon\n"), ConfigError);
    CHECK_THROWS_AS(load_config("/nonexistent/pvsql.ini"), ConfigError);
}

TEST_CASE("backend construction") {
    BackendSpec mock;
    mock.kind = "mock";
    CHECK_THROWS_AS(make_backend(mock), ConfigError);
    CliFixture f;
    mock.script_path = f.script("s.json", {step(PromptKind::probe, "{}")});
    CHECK(make_backend(mock) != nullptr);
    BackendSpec http;
    CHECK_THROWS_AS(make_backend(http), ConfigError);
}

TEST_CASE("usage errors") {
    CHECK(run({}).code == kUsage);
    CHECK(run({"frobnicate"}).code == kUsage);
    CHECK(run({"extract"}).code == kUsage);
    CHECK(run({"--log-level", "loud", "extract", "--question", "q"}).code == kUsage);
    CHECK(run({"--help"}).code == kOk);
    CHECK(run({"eval-constraints", "--tasks", "/nonexistent.json"}).code == kUsage);
    CHECK(run({"--config", "/nonexistent.ini", "extract", "--question", "q"}).code == kUsage);
    CHECK(run({"judge", "--trace", "t.jsonl", "--what", "vibes"}).code == kUsage);
}

TEST_CASE("extract") {
    auto r = run({"extract", "--question", "How many students are enrolled?"});
    CHECK(r.code == kOk);
    CHECK(r.out.rfind("Count", 0) == 0);

    r = run({"--json", "extract", "--question", "List the top 5 schools."});
    REQUIRE(r.code == kOk);
    auto cs = decode<std::vector<Constraint>>(Json::parse(r.out));
    REQUIRE(cs.size() == 1);
    CHECK(cs[0].kind == ConstraintKind::TopK);
    CHECK(cs[0].int_param() == 5);

    r = run({"extract", "--question", "Name the school."});
    CHECK(r.out == "no constraints\n");
}

TEST_CASE("verify") {
    auto ok = run({"verify", "--question", "How many students?", "--sql", "SELECT COUNT(*) FROM s"});
    CHECK(ok.code == kOk);
    CHECK(ok.out == "no violations\n");
    auto bad = run({"--json", "verify", "--question", "How many students?", "--sql", "SELECT name FROM s"});
    CHECK(bad.code == kTaskFailure);
    auto j = Json::parse(bad.out);
    CHECK(j["violations"].size() == 1);
    auto broken = run({"verify", "--question", "q", "--sql", "SELECT FROM WHERE"});
    CHECK(broken.code == kTaskFailure);
    CHECK(broken.out.rfind("syntax: ", 0) == 0);
}

TEST_CASE("probe and run") {
    CliFixture f;
    auto task = Json(testing::case_study_task()).dump();
    auto probe_script = f.script("probe.json", {testing::case_study_script()[0], testing::case_study_script()[1],
                                                testing::case_study_script()[2]});
    auto r = run({"--db-root", f.root, "--backend", "mock", "--script", probe_script, "--json", "probe", "--task",
                  task});
    REQUIRE(r.code == kOk);
    auto g = decode<GroundingContext>(Json::parse(r.out));
    CHECK(g.probes.size() == 2);

    auto run_script = f.script("run.json", testing::case_study_script());
    r = run({"--db-root", f.root, "--backend", "mock", "--script", run_script, "--json", "run", "--task", task});
    REQUIRE(r.code == kOk);
    auto rec = decode<RunRecord>(Json::parse(r.out));
    CHECK(rec.final_sql == testing::kCaseFinalSql);
    CHECK(rec.ex_correct == true);

    // a BIRD-style record from a file
    auto bird = f.file("task.json", R"({"question_id": 9, "db_id": "shop", "question": "How many customers?",
        "SQL": "SELECT COUNT(*) FROM customers"})");
    auto short_script = f.script("short.json", {step(PromptKind::probe, testing::done_json()),
                                                step(PromptKind::generate, "SELECT COUNT(*) FROM customers")});
    r = run({"--db-root", f.root, "--backend", "mock", "--script", short_script, "run", "--task", bird});
    CHECK(r.code == kOk);
    CHECK(r.out.find("execution match: yes") != std::string::npos);

    // missing database or root: usage; backend exhausted: task failure
    auto elsewhere = R"({"task_id": "x", "db_id": "nowhere", "question": "q"})";
    CHECK(run({"--db-root", f.root, "--backend", "mock", "--script", short_script, "run", "--task", elsewhere}).code ==
          kUsage);
    CHECK(run({"--backend", "mock", "--script", short_script, "run", "--task", task}).code == kUsage);
    auto empty = f.script("empty.json", {});
    CHECK(run({"--db-root", f.root, "--backend", "mock", "--script", empty, "run", "--task", task}).code ==
          kTaskFailure);
    CHECK(run({"--db-root", f.root, "--backend", "mock", "--script", short_script, "run", "--task", "{oops"}).code ==
          kUsage);
}

TEST_CASE("flags override the config file") {
    CliFixture f;
    auto script = f.script("s.json", {step(PromptKind::generate, "SELECT COUNT(*) FROM customers")});
    auto cfg = f.file("c.ini", "mode = rule\nmax_probes = 5\ndb_root = /nonexistent\n[backend]\nkind = http\n");
    auto task = R"({"task_id": "x", "db_id": "shop", "question": "How many customers?"})";
    // with the config alone there is no usable backend or database
    CHECK(run({"--config", cfg, "run", "--task", task}).code == kUsage);
    auto r = run({"--config", cfg, "--db-root", f.root, "--backend", "mock", "--script", script, "--mode", "no_probe",
                  "--json", "run", "--task", task});
    REQUIRE(r.code == kOk);
    auto rec = decode<RunRecord>(Json::parse(r.out));
    CHECK(rec.mode == "no_probe");
    CHECK(rec.llm_calls == 1);
}

TEST_CASE("bench, repair rates and judges over a trace") {
    CliFixture f;
    auto tasks = f.file("tasks.json", kThreeTasks);
    auto script = f.script("bench.json", three_task_script());
    auto report = (f.dir / "report.json").string();
    auto trace = (f.dir / "trace.jsonl").string();
    auto r = run({"--db-root", f.root, "--backend", "mock", "--script", script, "bench", "--tasks", tasks, "--out",
                  report, "--trace", trace, "--label", "mock"});
    REQUIRE(r.code == kOk);
    CHECK(r.out.find("\nmock ") != std::string::npos);
    std::ifstream in(report);
    auto j = Json::parse(in);
    CHECK(j["n_tasks"] == 3);
    CHECK(j["ex"].get<double>() == doctest::Approx(200.0 / 3.0));
    CHECK(j["mode"] == "rule");
    CHECK(j["per_difficulty"]["simple"]["n"] == 2);
    auto records = read_trace(trace);
    REQUIRE(records.size() == 3);
    CHECK(records[2].repair_count == 1);

    r = run({"--json", "repair-rates", "--trace", trace});
    REQUIRE(r.code == kOk);
    auto rates = Json::parse(r.out);
    CHECK(rates["success_rate"] == 100.0);
    CHECK(rates["pairs"] == 1);

    auto judge_script = f.script("judge.json", {step(PromptKind::error_judge, R"({"error_type": "SYNTHESIS_FAILURE"})")});
    r = run({"--db-root", f.root, "--backend", "mock", "--script", judge_script, "--json", "judge", "--trace", trace});
    REQUIRE(r.code == kOk);
    auto d = Json::parse(r.out);
    CHECK(d["n"] == 1);
    CHECK(d["percent"]["SynthesisFailure"] == 100.0);

    auto idle = f.script("idle.json", {});
    r = run({"--db-root", f.root, "--backend", "mock", "--script", idle, "--json", "judge", "--trace", trace,
             "--what", "probes"});
    REQUIRE(r.code == kOk);
    CHECK(Json::parse(r.out)["n"] == 0);

    // the failed task was counting the wrong table: a COUNT oracle cannot fix that
    auto headroom_script = f.script("headroom.json", {});
    auto reruns = (f.dir / "reruns.jsonl").string();
    r = run({"--db-root", f.root, "--backend", "mock", "--script", headroom_script, "--json", "headroom", "--trace",
             trace, "--out", reruns});
    REQUIRE(r.code == kOk);
    auto h = Json::parse(r.out);
    CHECK(h["n"] == 1);
    CHECK(h["corrected"] == 0);
    CHECK(read_trace(reruns).size() == 1);
}

TEST_CASE("eval-constraints") {
    CliFixture f;
    auto tasks = f.file("tasks.json", kThreeTasks);
    auto r = run({"--json", "eval-constraints", "--tasks", tasks});
    REQUIRE(r.code == kOk);
    auto j = Json::parse(r.out);
    CHECK(j["n"] == 3);
    CHECK(j["pass_rate"] == 100.0);

    auto bad = f.file("bad.json", R"([{"db_id": "shop"}])");
    CHECK(run({"eval-constraints", "--tasks", bad}).code == kUsage);
}

}  // TEST_SUITE
