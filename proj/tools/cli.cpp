#include "cli.hpp"

#include "config.hpp"

#include "pvsql/agent.hpp"
#include "pvsql/bench.hpp"
#include "pvsql/extractor.hpp"
#include "pvsql/json_codec.hpp"
#include "pvsql/sqlcheck.hpp"
#include "pvsql/text.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <fstream>
#include <optional>
#include <sstream>
#include <thread>

namespace pvsql::cli {

namespace {

// Thrown for anything that should exit with the usage code.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Flags {
    bool json = false;
    std::string config_path;
    std::string log_level = "info";
    // flag name -> config key, filled only for flags given on the command line
    std::vector<std::pair<std::string, std::string>> overrides;
};

struct Override {
    const char* flag;
    const char* key;
    const char* help;
};

constexpr Override kOverrides[] = {
    {"--db-root", "db_root", "Directory holding <db_id>/<db_id>.sqlite"},
    {"--mode", "mode", "rule | llm_verify | no_probe | no_repair"},
    {"--max-probes", "max_probes", "Probe budget K"},
    {"--max-repairs", "max_repairs", "Repair budget M"},
    {"--timeout", "timeout_seconds", "Statement timeout in seconds"},
    {"--probe-row-cap", "probe_row_cap", "Rows kept per probe"},
    {"--workers", "workers", "Concurrent tasks (0: one per CPU)"},
    {"--backend", "backend.kind", "http | mock"},
    {"--endpoint", "backend.endpoint", "Chat completions URL"},
    {"--model", "backend.model", "Model name sent to the endpoint"},
    {"--script", "backend.script_path", "Scripted mock transcript (JSON)"},
    {"--temperature", "temperature", "Sampling temperature"},
    {"--max-output-tokens", "max_output_tokens", "Output token limit per call"},
};

Config resolve_config(const Flags& flags) {
    Config c = flags.config_path.empty() ? Config{} : load_config(flags.config_path);
    for (const auto& [key, value] : flags.overrides) set_config_value(c, key, value);
    return c;
}

void setup_logging(const std::string& level) {
    auto logger = spdlog::get("pvsql");
    if (!logger) {
        logger = spdlog::stderr_color_mt("pvsql");
        logger->set_pattern("%Y-%m-%dT%H:%M:%S.%e %l %v");
    }
    spdlog::set_default_logger(logger);
    auto lvl = spdlog::level::from_str(level);
    if (lvl == spdlog::level::off && level != "off") throw UsageError("unknown log level '" + level + "'");
    spdlog::set_level(lvl);
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot read " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// --task takes inline JSON or a file path. Canonical Task JSON and
// BIRD/Spider-style records are both accepted.
Task load_task(const std::string& arg, const std::string& format) {
    auto body = text::trim(arg);
    auto raw = !body.empty() && body.front() == '{' ? body : read_text(arg);
    auto j = Json::parse(raw, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw UsageError("--task: expected a JSON object");
    if (j.contains("task_id")) {
        try {
            return decode<Task>(j);
        } catch (const DecodeError& e) {
            throw UsageError(std::string("--task: ") + e.what());
        }
    }
    try {
        return parse_tasks("[" + raw + "]", dataset_format_from_string(format)).front();
    } catch (const std::exception& e) {
        throw UsageError(std::string("--task: ") + e.what());
    }
}

const std::string& require_file(const std::string& path) {
    if (!std::filesystem::is_regular_file(path)) throw UsageError("no such file: " + path);
    return path;
}

std::filesystem::path require_db_root(const Config& c) {
    if (c.db_root.empty()) throw UsageError("no database root: pass --db-root or set db_root in the config");
    return c.db_root;
}

BenchOptions bench_options(const Config& c) {
    BenchOptions o;
    o.db_root = c.db_root;
    o.agent = c.agent;
    o.db = c.db;
    o.workers = c.workers > 0 ? c.workers : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    return o;
}

std::string constraint_line(const Constraint& c) {
    std::string param;
    if (auto n = c.int_param()) param = std::to_string(*n);
    else if (auto s = c.text_param()) param = *s;
    return fmt::format("{:<16} {:<10} {}", to_string(c.kind), param.empty() ? "-" : param, describe(c));
}

void print_violations(std::ostream& out, const std::vector<Violation>& vs) {
    if (vs.empty()) out << "no violations\n";
    for (const auto& v : vs) out << to_string(v.source) << ": " << v.message << "\n";
}

Json optional_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Probe-and-verify text-to-SQL agent", "pvsql"};
    app.require_subcommand(1);
    app.fallthrough();
    Flags flags;
    std::map<std::string, std::string> override_values;
    std::vector<std::pair<const Override*, CLI::Option*>> override_opts;

    app.add_flag("--json", flags.json, "Machine-readable JSON output");
    app.add_option("--config", flags.config_path, "Flat INI-style config file");
    app.add_option("--log-level", flags.log_level, "trace | debug | info | warn | error | off");
    for (const auto& o : kOverrides) override_opts.emplace_back(&o, app.add_option(o.flag, override_values[o.key], o.help));

    std::string question, evidence, sql, task_arg, tasks_path, format = "bird", out_path, trace_path, label = "PV-SQL";
    std::string judge_what = "errors";

    auto* extract = app.add_subcommand("extract", "Rule-based constraints of a question");
    extract->add_option("--question", question, "Question text")->required();
    extract->add_option("--evidence", evidence, "Evidence text");

    auto* verify = app.add_subcommand("verify", "Constraint checks of a query against a question");
    verify->add_option("--sql", sql, "SQL text")->required();
    verify->add_option("--question", question, "Question text")->required();
    verify->add_option("--evidence", evidence, "Evidence text");

    auto* probe = app.add_subcommand("probe", "Run the probe loop for one task");
    probe->add_option("--task", task_arg, "Task JSON or path to it")->required();
    probe->add_option("--format", format, "Record style of --task when it has no task_id");

    auto* run = app.add_subcommand("run", "Run the full pipeline for one task");
    run->add_option("--task", task_arg, "Task JSON or path to it")->required();
    run->add_option("--format", format, "Record style of --task when it has no task_id");

    auto* bench = app.add_subcommand("bench", "Run and score a dataset");
    bench->add_option("--tasks", tasks_path, "Dataset JSON")->required();
    bench->add_option("--format", format, "bird | spider | minidev");
    bench->add_option("--out", out_path, "Write the JSON report here");
    bench->add_option("--trace", trace_path, "Write one RunRecord per line here");
    bench->add_option("--label", label, "Method name in the text report");

    auto* eval = app.add_subcommand("eval-constraints", "Gold SQL pass rate of the rule extractor");
    eval->add_option("--tasks", tasks_path, "Dataset JSON")->required();
    eval->add_option("--format", format, "bird | spider | minidev");

    auto* headroom = app.add_subcommand("headroom", "Rerun failed tasks with constraints read from gold SQL");
    headroom->add_option("--trace", trace_path, "RunRecord JSONL from bench")->required();
    headroom->add_option("--out", out_path, "Write the rerun records here (JSONL)");

    auto* rates = app.add_subcommand("repair-rates", "Repair success and regression rates of a trace");
    rates->add_option("--trace", trace_path, "RunRecord JSONL from bench")->required();

    auto* judge = app.add_subcommand("judge", "Model-judged error classes or probe quality of a trace");
    judge->add_option("--trace", trace_path, "RunRecord JSONL from bench")->required();
    judge->add_option("--what", judge_what, "errors | probes")->check(CLI::IsMember({"errors", "probes"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "pvsql: " << e.what() << "\n\n" << app.help();
        return kUsage;
    }
    for (const auto& [o, opt] : override_opts) {
        if (opt->count() > 0) flags.overrides.emplace_back(o->key, override_values[o->key]);
    }

    try {
        setup_logging(flags.log_level);
        Config cfg = resolve_config(flags);

        if (extract->parsed()) {
            auto cs = extract_constraints(question, evidence);
            if (flags.json) out << Json(cs).dump(2) << "\n";
            else if (cs.empty()) out << "no constraints\n";
            else for (const auto& c : cs) out << constraint_line(c) << "\n";
            return kOk;
        }

        if (verify->parsed()) {
            auto cs = extract_constraints(question, evidence);
            std::vector<Violation> vs;
            try {
                vs = check_all(parse_sql(sql), cs);
            } catch (const ParseError& e) {
                vs.push_back(Violation{ViolationSource::syntax, std::nullopt, e.what()});
            }
            if (flags.json) out << Json{{"constraints", cs}, {"violations", vs}}.dump(2) << "\n";
            else print_violations(out, vs);
            return vs.empty() ? kOk : kTaskFailure;
        }

        if (eval->parsed()) {
            auto tasks = load_tasks(require_file(tasks_path), dataset_format_from_string(format));
            auto r = eval_extraction_on_gold(tasks);
            if (flags.json) {
                out << Json{{"n", r.n},
                            {"passed", r.passed},
                            {"parse_failures", r.parse_failures},
                            {"pass_rate", r.pass_rate},
                            {"failing_task_ids", r.failing_task_ids}}
                           .dump(2)
                    << "\n";
            } else {
                out << fmt::format("gold SQL pass rate: {:.2f}% ({}/{}, {} unparseable)\n", r.pass_rate, r.passed,
                                   r.n, r.parse_failures);
                for (const auto& id : r.failing_task_ids) out << "  failing: " << id << "\n";
            }
            return kOk;
        }

        if (rates->parsed()) {
            auto r = eval_repair_rates(read_trace(require_file(trace_path)));
            Json j{{"success_rate", optional_json(r.success_rate)},
                   {"regression_rate", optional_json(r.regression_rate)},
                   {"pairs", r.pairs},
                   {"violations_before", r.violations_before},
                   {"resolved", r.resolved},
                   {"satisfied_before", r.satisfied_before},
                   {"broken", r.broken}};
            if (flags.json) out << j.dump(2) << "\n";
            else {
                auto show = [](const std::optional<double>& v) { return v ? fmt::format("{:.2f}%", *v) : "n/a"; };
                out << fmt::format("repair success: {} ({}/{})  regression: {} ({}/{})  draft pairs: {}\n",
                                   show(r.success_rate), r.resolved, r.violations_before, show(r.regression_rate),
                                   r.broken, r.satisfied_before, r.pairs);
            }
            return kOk;
        }

        // Everything below talks to a database and a model.
        auto db_root = require_db_root(cfg);
        auto backend = make_backend(cfg.backend);

        if (probe->parsed() || run->parsed()) {
            auto task = load_task(task_arg, format);
            DatabaseHandle db = [&] {
                try {
                    return open_database(db_root, task.db_id, cfg.db);
                } catch (const DbUnavailable& e) {
                    throw UsageError(e.what());
                }
            }();
            if (probe->parsed()) {
                LlmSession llm(*backend, cfg.agent.temperature, cfg.agent.max_output_tokens);
                auto g = run_probe_loop(task, load_schema(db), db, llm, cfg.agent.max_probes);
                if (flags.json) out << Json(g).dump(2) << "\n";
                else out << render_probe_observations(g) << "\n";
                return kOk;
            }
            auto rec = run_task(task, db, *backend, cfg.agent);
            if (!rec.failed) score_record(rec, db, false);
            if (flags.json) {
                out << Json(rec).dump(2) << "\n";
            } else {
                out << "final SQL: " << or_none(rec.final_sql) << "\n";
                out << fmt::format("probes: {}  repairs: {}  calls: {}  tokens: {} in / {} out\n", rec.probe_count,
                                   rec.repair_count, rec.llm_calls, rec.tokens_in, rec.tokens_out);
                if (!rec.drafts.empty()) print_violations(out, rec.drafts.back().violations);
                if (rec.ex_correct) out << "execution match: " << (*rec.ex_correct ? "yes" : "no") << "\n";
                if (rec.failed) out << "error: " << rec.error << "\n";
            }
            return rec.failed ? kTaskFailure : kOk;
        }

        auto options = bench_options(cfg);

        if (bench->parsed()) {
            auto tasks = load_tasks(require_file(tasks_path), dataset_format_from_string(format));
            std::size_t done = 0;
            auto records = run_benchmark(tasks, *backend, options, [&](const RunRecord& r) {
                spdlog::info("[{}] finished {}/{} ex={}", r.task.task_id, ++done, tasks.size(),
                             r.ex_correct ? (*r.ex_correct ? "1" : "0") : "-");
            });
            auto report = compute_metrics(records);
            auto j = report_to_json(report);
            j["mode"] = std::string(to_string(cfg.agent.mode));
            j["max_probes"] = cfg.agent.max_probes;
            j["max_repairs"] = cfg.agent.max_repairs;
            j["timeout_seconds"] = cfg.db.timeout_seconds;
            if (!trace_path.empty()) write_trace(trace_path, records);
            if (!out_path.empty()) {
                std::ofstream f(out_path);
                if (!f) throw UsageError("cannot write " + out_path);
                f << j.dump(2) << "\n";
            }
            if (flags.json) out << j.dump(2) << "\n";
            else out << format_report(report, label);
            return kOk;
        }

        if (headroom->parsed()) {
            auto r = headroom_rerun(read_trace(require_file(trace_path)), *backend, options);
            if (!out_path.empty()) write_trace(out_path, r.reruns);
            if (flags.json) {
                out << Json{{"n", r.n}, {"corrected", r.corrected}, {"skipped", r.skipped}, {"rate", r.rate}}.dump(2)
                    << "\n";
            } else {
                out << fmt::format("headroom: {:.2f}% of failed tasks corrected ({}/{}, {} skipped)\n", r.rate,
                                   r.corrected, r.n, r.skipped);
            }
            return kOk;
        }

        if (judge->parsed()) {
            auto records = read_trace(require_file(trace_path));
            if (judge_what == "errors") {
                auto d = judge_errors(records, *backend, options);
                Json counts = Json::object(), percent = Json::object(), verdicts = Json::array();
                for (const auto& [k, n] : d.counts) counts[std::string(to_string(k))] = n;
                for (const auto& [k, p] : d.percent) percent[std::string(to_string(k))] = p;
                for (const auto& [id, v] : d.verdicts) verdicts.push_back({{"task_id", id}, {"verdict", v}});
                if (flags.json) {
                    out << Json{{"n", d.n}, {"classified", d.classified}, {"unclassified", d.unclassified},
                                {"counts", counts}, {"percent", percent}, {"verdicts", verdicts}}
                               .dump(2)
                        << "\n";
                } else {
                    out << fmt::format("failed tasks: {}  classified: {}\n", d.n, d.classified);
                    for (const auto& [k, p] : d.percent) out << fmt::format("  {:<28} {:6.2f}%\n", to_string(k), p);
                }
            } else {
                auto q = judge_probe_quality(records, *backend, options);
                if (flags.json) {
                    out << Json{{"n", q.n}, {"unparsed_records", q.unparsed_records}, {"relevant", q.relevant},
                                {"new_insight", q.new_insight}, {"redundant", q.redundant}}
                               .dump(2)
                        << "\n";
                } else {
                    out << fmt::format("probes judged: {}  relevant: {:.2f}%  new insight: {:.2f}%  redundant: {:.2f}%\n",
                                       q.n, q.relevant, q.new_insight, q.redundant);
                }
            }
            return kOk;
        }
    } catch (const UsageError& e) {
        err << "pvsql: " << e.what() << "\n";
        return kUsage;
    } catch (const ConfigError& e) {
        err << "pvsql: config: " << e.what() << "\n";
        return kUsage;
    } catch (const FormatError& e) {
        err << "pvsql: dataset: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        err << "pvsql: " << e.what() << "\n";
        return kTaskFailure;
    }
    err << app.help();
    return kUsage;
}

}  // namespace pvsql::cli
