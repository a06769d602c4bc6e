#include "pvsql/bench.hpp"

#include "pvsql/extractor.hpp"
#include "pvsql/sqlcheck.hpp"
#include "pvsql/text.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace pvsql {

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string string_field(const Json& rec, std::initializer_list<const char*> keys) {
    for (const char* k : keys) {
        auto it = rec.find(k);
        if (it != rec.end() && it->is_string()) return it->get<std::string>();
    }
    return {};
}

// Canonical text of a cell for result comparison.
std::string cell_key(const Cell& c) {
    struct Visitor {
        std::string operator()(std::monostate) const { return "N"; }
        std::string operator()(std::int64_t v) const { return "I" + std::to_string(v); }
        std::string operator()(double v) const {
            if (std::isnan(v)) return "Rnan";
            double r = std::round(v * 1e6) / 1e6;
            if (std::floor(r) == r && std::fabs(r) < 9e15) return "I" + std::to_string(static_cast<std::int64_t>(r));
            return fmt::format("R{:.6f}", r);
        }
        std::string operator()(const std::string& s) const { return "T" + s; }
        std::string operator()(const BlobHex& b) const { return "B" + b.hex; }
    };
    return std::visit(Visitor{}, c);
}

std::vector<std::string> row_keys(const ExecResult& r) {
    std::vector<std::string> out;
    out.reserve(r.rows.size());
    for (const auto& row : r.rows) {
        std::string key;
        for (const auto& c : row) {
            key += cell_key(c);
            key += '\x1f';
        }
        out.push_back(std::move(key));
    }
    return out;
}

// Key used to match violations between consecutive drafts.
std::string violation_key(const Violation& v) {
    if (v.source == ViolationSource::constraint && v.constraint) {
        Json j = *v.constraint;
        return "constraint:" + j.at("kind").dump() + j.at("param").dump();
    }
    return std::string(to_string(v.source));
}

std::string constraint_key(const Constraint& c) {
    Json j = c;
    return "constraint:" + j.at("kind").dump() + j.at("param").dump();
}

bool has_syntax(const Draft& d) {
    return std::any_of(d.violations.begin(), d.violations.end(),
                       [](const Violation& v) { return v.source == ViolationSource::syntax; });
}

double pct(std::size_t num, std::size_t den) { return den ? 100.0 * static_cast<double>(num) / den : 0.0; }

std::string exec_error_of(DatabaseHandle& db, const std::string& sql) {
    if (sql.empty()) return "no SQL was produced";
    if (auto v = syntax_check(db, sql)) return v->message;
    auto out = execute(db, sql, 0);
    if (auto* v = std::get_if<Violation>(&out)) return v->message;
    return "(none)";
}

}  // namespace

DatasetFormat dataset_format_from_string(std::string_view s) {
    if (s == "bird") return DatasetFormat::bird;
    if (s == "spider") return DatasetFormat::spider;
    if (s == "minidev") return DatasetFormat::minidev;
    throw std::invalid_argument("unknown dataset format: " + std::string(s));
}

std::vector<Task> parse_tasks(std::string_view json_text, DatasetFormat format) {
    auto doc = Json::parse(json_text, nullptr, false);
    if (doc.is_discarded()) throw FormatError(0, "file is not valid JSON");
    if (doc.is_object()) {
        // Mini-Dev ships some variants as {"data": [...]}.
        auto it = doc.find("data");
        if (it == doc.end() || !it->is_array()) throw FormatError(0, "expected a JSON array of tasks");
        doc = *it;
    }
    if (!doc.is_array()) throw FormatError(0, "expected a JSON array of tasks");

    std::vector<Task> tasks;
    tasks.reserve(doc.size());
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const auto& rec = doc[i];
        if (!rec.is_object()) throw FormatError(i, "task is not a JSON object");
        Task t;
        t.db_id = string_field(rec, {"db_id"});
        t.question = string_field(rec, {"question"});
        if (t.db_id.empty()) throw FormatError(i, "missing db_id");
        if (text::trim(t.question).empty()) throw FormatError(i, "missing question");
        if (auto it = rec.find("question_id"); it != rec.end() && !it->is_null()) {
            t.task_id = it->is_string() ? it->get<std::string>() : it->dump();
        } else {
            t.task_id = std::to_string(i);
        }
        if (format == DatasetFormat::spider) {
            auto gold = string_field(rec, {"query", "SQL"});
            if (gold.empty()) throw FormatError(i, "missing query");
            t.gold_sql = gold;
            t.difficulty = Difficulty::unknown;
        } else {
            t.evidence = string_field(rec, {"evidence"});
            auto gold = string_field(rec, {"SQL", "sql", "query"});
            if (gold.empty()) throw FormatError(i, "missing SQL");
            t.gold_sql = gold;
            t.difficulty = difficulty_from_string(string_field(rec, {"difficulty"}));
        }
        tasks.push_back(std::move(t));
    }
    return tasks;
}

std::vector<Task> load_tasks(const std::filesystem::path& path, DatasetFormat format) {
    return parse_tasks(read_file(path), format);
}

bool results_match(const ExecResult& gold, const ExecResult& pred, bool ordered) {
    if (gold.rows.size() != pred.rows.size()) return false;
    auto g = row_keys(gold);
    auto p = row_keys(pred);
    if (!ordered) {
        std::sort(g.begin(), g.end());
        std::sort(p.begin(), p.end());
    }
    return g == p;
}

bool has_top_level_order_by(std::string_view sql) {
    try {
        return !parse_sql(sql).query.order_by.empty();
    } catch (const ParseError&) {
        return false;
    }
}

bool execution_accuracy(std::string_view pred_sql, std::string_view gold_sql, DatabaseHandle& db) {
    auto gold = execute(db, gold_sql);
    if (auto* v = std::get_if<Violation>(&gold)) throw GoldExecutionError("gold SQL failed: " + v->message);
    if (text::trim(pred_sql).empty()) return false;
    auto pred = execute(db, pred_sql);
    if (std::holds_alternative<Violation>(pred)) return false;
    return results_match(std::get<ExecResult>(gold), std::get<ExecResult>(pred), has_top_level_order_by(gold_sql));
}

std::optional<double> time_query(DatabaseHandle& db, std::string_view sql, int runs, int warmup) {
    for (int i = 0; i < warmup; ++i) {
        if (std::holds_alternative<Violation>(execute(db, sql, 0))) return std::nullopt;
    }
    std::vector<double> times;
    for (int i = 0; i < std::max(1, runs); ++i) {
        auto out = execute(db, sql, 0);
        if (std::holds_alternative<Violation>(out)) return std::nullopt;
        times.push_back(std::get<ExecResult>(out).elapsed_seconds);
    }
    std::sort(times.begin(), times.end());
    auto n = times.size();
    return n % 2 ? times[n / 2] : (times[n / 2 - 1] + times[n / 2]) / 2.0;
}

double valid_efficiency_score(const std::vector<VesSample>& samples) {
    if (samples.empty()) return 0.0;
    double total = 0.0;
    for (const auto& s : samples) {
        if (!s.correct) continue;
        if (!(s.t_gold > 0) || !(s.t_pred > 0))
            throw std::invalid_argument("VES needs positive timings for correct predictions");
        total += std::sqrt(s.t_gold / s.t_pred);
    }
    return 100.0 * total / static_cast<double>(samples.size());
}

double weighted_token_cost(double tokens_in, double tokens_out) { return tokens_in / 8.0 + tokens_out; }

ExtractionEval eval_extraction_on_gold(const std::vector<Task>& tasks) {
    ExtractionEval out;
    for (const auto& t : tasks) {
        if (!t.gold_sql) continue;
        ++out.n;
        auto constraints = extract_constraints(t.question, t.evidence);
        bool ok = false;
        try {
            auto ast = parse_sql(*t.gold_sql);
            ok = check_all(ast, constraints).empty();
        } catch (const ParseError&) {
            ++out.parse_failures;
            ok = constraints.empty();
        }
        if (ok) ++out.passed;
        else out.failing_task_ids.push_back(t.task_id);
    }
    out.pass_rate = out.n ? pct(out.passed, out.n) : 100.0;
    return out;
}

RepairRates eval_repair_rates(const std::vector<RunRecord>& records) {
    RepairRates r;
    for (const auto& rec : records) {
        for (std::size_t i = 0; i + 1 < rec.drafts.size(); ++i) {
            const auto& before = rec.drafts[i];
            const auto& after = rec.drafts[i + 1];
            ++r.pairs;
            std::set<std::string> after_keys;
            for (const auto& v : after.violations) after_keys.insert(violation_key(v));
            bool after_syntax = has_syntax(after);

            std::set<std::string> before_keys;
            for (const auto& v : before.violations) before_keys.insert(violation_key(v));
            for (const auto& k : before_keys) {
                ++r.violations_before;
                bool checked = !after_syntax || k == "syntax";
                if (checked && !after_keys.count(k)) ++r.resolved;
            }

            if (has_syntax(before) || after_syntax) continue;
            std::set<std::string> seen;
            for (const auto& c : rec.constraints) {
                auto k = constraint_key(c);
                if (!seen.insert(k).second || before_keys.count(k)) continue;
                ++r.satisfied_before;
                if (after_keys.count(k)) ++r.broken;
            }
        }
    }
    if (r.violations_before) r.success_rate = pct(r.resolved, r.violations_before);
    if (r.satisfied_before) r.regression_rate = pct(r.broken, r.satisfied_before);
    return r;
}

void score_record(RunRecord& record, DatabaseHandle& db, bool time_queries) {
    record.ex_correct.reset();
    record.gold_seconds.reset();
    record.pred_seconds.reset();
    if (!record.task.gold_sql) return;
    try {
        record.ex_correct = execution_accuracy(record.final_sql, *record.task.gold_sql, db);
    } catch (const GoldExecutionError& e) {
        spdlog::warn("[{}] excluded: {}", record.task.task_id, e.what());
        return;
    }
    if (time_queries && *record.ex_correct) {
        record.gold_seconds = time_query(db, *record.task.gold_sql);
        record.pred_seconds = time_query(db, record.final_sql);
    }
}

HeadroomResult headroom_rerun(const std::vector<RunRecord>& records, LlmBackend& backend,
                              const BenchOptions& options) {
    HeadroomResult out;
    for (const auto& rec : records) {
        if (rec.ex_correct != false) continue;
        if (!rec.task.gold_sql || rec.drafts.empty()) {
            ++out.skipped;
            continue;
        }
        std::vector<Constraint> oracle;
        try {
            oracle = derive_constraints_from_sql(parse_sql(*rec.task.gold_sql));
        } catch (const ParseError&) {
            ++out.skipped;
            continue;
        }
        auto db = open_database(options.db_root, rec.task.db_id, options.db);
        auto rerun = rerun_repair(rec, oracle, db, backend, options.agent);
        score_record(rerun, db, false);
        ++out.n;
        if (rerun.ex_correct == true) ++out.corrected;
        out.reruns.push_back(std::move(rerun));
    }
    out.rate = pct(out.corrected, out.n);
    return out;
}

ErrorDistribution judge_errors(const std::vector<RunRecord>& records, LlmBackend& backend,
                               const BenchOptions& options) {
    ErrorDistribution out;
    LlmSession llm(backend, options.agent.temperature, options.agent.max_output_tokens);
    for (const auto& rec : records) {
        if (rec.ex_correct != false) continue;
        ++out.n;
        auto db = open_database(options.db_root, rec.task.db_id, options.db);
        PromptContext ctx{{"question", rec.task.question},
                          {"evidence", or_none(rec.task.evidence)},
                          {"schema", render_schema(load_schema(db))},
                          {"gold_sql", rec.task.gold_sql.value_or("")},
                          {"predicted_sql", or_none(rec.final_sql)},
                          {"exec_error", exec_error_of(db, rec.final_sql)}};
        auto resp = llm.call(PromptKind::error_judge, render_prompt(PromptKind::error_judge, ctx));
        try {
            auto verdict = parse_error_verdict(resp.text);
            ++out.classified;
            ++out.counts[verdict.kind];
            out.verdicts.emplace_back(rec.task.task_id, verdict);
        } catch (const Unparseable&) {
            ++out.unclassified;
        }
    }
    for (auto kind : {ErrorKind::DatabaseMisinterpretation, ErrorKind::QuestionMisinterpretation,
                      ErrorKind::SynthesisFailure}) {
        out.percent[kind] = pct(out.counts[kind], out.classified);
    }
    return out;
}

ProbeQuality judge_probe_quality(const std::vector<RunRecord>& records, LlmBackend& backend,
                                 const BenchOptions& options) {
    ProbeQuality out;
    std::size_t relevant = 0, insight = 0, redundant = 0;
    LlmSession llm(backend, options.agent.temperature, options.agent.max_output_tokens);
    for (const auto& rec : records) {
        const auto& probes = rec.grounding.probes;
        if (probes.empty()) continue;
        auto db = open_database(options.db_root, rec.task.db_id, options.db);
        PromptContext ctx{{"question", rec.task.question},
                          {"evidence", or_none(rec.task.evidence)},
                          {"schema", render_schema(load_schema(db))},
                          {"probes", render_probe_history(probes)}};
        auto resp = llm.call(PromptKind::probe_judge, render_prompt(PromptKind::probe_judge, ctx));
        std::vector<ProbeVerdict> verdicts;
        try {
            verdicts = parse_probe_verdicts(resp.text);
        } catch (const Unparseable&) {
            ++out.unparsed_records;
            continue;
        }
        std::set<int> seen;
        for (const auto& v : verdicts) {
            if (v.probe_index < 0 || v.probe_index >= static_cast<int>(probes.size())) continue;
            if (!seen.insert(v.probe_index).second) continue;
            ++out.n;
            relevant += v.relevant;
            insight += v.new_insight;
            redundant += v.redundant;
        }
    }
    out.relevant = pct(relevant, out.n);
    out.new_insight = pct(insight, out.n);
    out.redundant = pct(redundant, out.n);
    return out;
}

MetricReport compute_metrics(const std::vector<RunRecord>& records) {
    MetricReport m;
    std::vector<VesSample> all;
    std::map<std::string, std::vector<VesSample>> by_diff;
    double tin = 0, tout = 0, wall = 0, probes = 0, repairs = 0;
    for (const auto& r : records) {
        tin += static_cast<double>(r.tokens_in);
        tout += static_cast<double>(r.tokens_out);
        wall += r.wall_seconds;
        probes += r.probe_count;
        repairs += r.repair_count;
        if (r.failed) ++m.failed_runs;
        if (!r.ex_correct) {
            ++m.gold_failures;
            continue;
        }
        VesSample s{*r.ex_correct, 1.0, 1.0};
        if (s.correct && r.gold_seconds && r.pred_seconds && *r.gold_seconds > 0 && *r.pred_seconds > 0) {
            s.t_gold = *r.gold_seconds;
            s.t_pred = *r.pred_seconds;
        }
        all.push_back(s);
        by_diff[std::string(to_string(r.task.difficulty))].push_back(s);
    }
    auto ex_of = [](const std::vector<VesSample>& v) {
        auto correct = static_cast<std::size_t>(std::count_if(v.begin(), v.end(), [](const VesSample& s) { return s.correct; }));
        return pct(correct, v.size());
    };
    m.n_tasks = all.size();
    m.ex = ex_of(all);
    m.ves = valid_efficiency_score(all);
    for (const auto& [d, v] : by_diff) m.per_difficulty[d] = DifficultyMetrics{ex_of(v), valid_efficiency_score(v), v.size()};
    if (!records.empty()) {
        auto n = static_cast<double>(records.size());
        m.mean_tokens_in = tin / n;
        m.mean_tokens_out = tout / n;
        m.mean_wall_seconds = wall / n;
        m.mean_probes = probes / n;
        m.mean_repairs = repairs / n;
    }
    m.weighted_token_cost = weighted_token_cost(m.mean_tokens_in, m.mean_tokens_out);
    return m;
}

Json report_to_json(const MetricReport& m) {
    Json per = Json::object();
    for (const auto& [d, v] : m.per_difficulty) per[d] = {{"ex", v.ex}, {"ves", v.ves}, {"n", v.n}};
    return Json{{"n_tasks", m.n_tasks},
                {"gold_failures", m.gold_failures},
                {"failed_runs", m.failed_runs},
                {"ex", m.ex},
                {"ves", m.ves},
                {"ves_definition", "VES (sqrt time-ratio)"},
                {"per_difficulty", per},
                {"mean_tokens_in", m.mean_tokens_in},
                {"mean_tokens_out", m.mean_tokens_out},
                {"mean_wall_seconds", m.mean_wall_seconds},
                {"weighted_token_cost", m.weighted_token_cost},
                {"mean_probes", m.mean_probes},
                {"mean_repairs", m.mean_repairs}};
}

std::string format_report(const MetricReport& m, const std::string& label) {
    auto cell = [&](const std::string& d) {
        auto it = m.per_difficulty.find(d);
        return it == m.per_difficulty.end() ? std::string("-") : fmt::format("{:.2f}", it->second.ex);
    };
    std::string out;
    out += fmt::format("{:<12} {:>7} {:>7} {:>8} {:>9} {:>12} {:>8} {:>7} {:>7}\n", "Method", "EX", "VES", "simple",
                       "moderate", "challenging", "In", "Out", "Time");
    out += fmt::format("{:<12} {:>7.2f} {:>7.2f} {:>8} {:>9} {:>12} {:>8.0f} {:>7.0f} {:>7.2f}\n", label, m.ex, m.ves,
                       cell("simple"), cell("moderate"), cell("challenging"), m.mean_tokens_in, m.mean_tokens_out,
                       m.mean_wall_seconds);
    out += fmt::format("tasks scored: {}  gold failures: {}  pipeline errors: {}  mean probes: {:.2f}  "
                       "weighted tokens: {:.3f}  VES (sqrt time-ratio)\n",
                       m.n_tasks, m.gold_failures, m.failed_runs, m.mean_probes, m.weighted_token_cost);
    return out;
}

std::vector<RunRecord> run_benchmark(const std::vector<Task>& tasks, LlmBackend& backend,
                                     const BenchOptions& options,
                                     const std::function<void(const RunRecord&)>& on_done) {
    std::vector<RunRecord> results(tasks.size());
    int workers = backend.supports_concurrency() ? std::max(1, options.workers) : 1;
    workers = std::min<int>(workers, std::max<std::size_t>(1, tasks.size()));

    std::mutex registry_mu;
    std::map<std::string, std::unique_ptr<std::mutex>> timing_locks;
    auto timing_lock = [&](const std::string& db_id) -> std::mutex& {
        std::lock_guard<std::mutex> lock(registry_mu);
        auto& slot = timing_locks[db_id];
        if (!slot) slot = std::make_unique<std::mutex>();
        return *slot;
    };
    std::mutex done_mu;
    std::atomic<std::size_t> next{0};
    std::exception_ptr fatal;
    std::mutex fatal_mu;

    auto worker = [&] {
        while (true) {
            auto i = next.fetch_add(1);
            if (i >= tasks.size()) return;
            const auto& task = tasks[i];
            RunRecord rec;
            try {
                auto db = open_database(options.db_root, task.db_id, options.db);
                rec = run_task(task, db, backend, options.agent);
                {
                    std::lock_guard<std::mutex> lock(timing_lock(task.db_id));
                    score_record(rec, db, options.time_queries);
                }
            } catch (const ScriptMismatch&) {
                std::lock_guard<std::mutex> lock(fatal_mu);
                if (!fatal) fatal = std::current_exception();
                next = tasks.size();
                return;
            } catch (const std::exception& e) {
                rec.task = task;
                rec.mode = std::string(to_string(options.agent.mode));
                rec.failed = true;
                rec.error = e.what();
                spdlog::error("[{}] {}", task.task_id, e.what());
            }
            if (on_done) {
                std::lock_guard<std::mutex> lock(done_mu);
                on_done(rec);
            }
            results[i] = std::move(rec);
        }
    };

    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (fatal) std::rethrow_exception(fatal);
    return results;
}

std::vector<RunRecord> read_trace(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read trace " + path.string());
    std::vector<RunRecord> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::trim(line).empty()) continue;
        auto j = Json::parse(line, nullptr, false);
        if (j.is_discarded()) throw DecodeError("trace line " + std::to_string(lineno) + " is not JSON");
        out.push_back(decode<RunRecord>(j));
    }
    return out;
}

void write_trace(const std::filesystem::path& path, const std::vector<RunRecord>& records) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write trace " + path.string());
    for (const auto& r : records) out << Json(r).dump() << "\n";
}

}  // namespace pvsql
