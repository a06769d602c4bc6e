#include "pvsql/agent.hpp"

#include "pvsql/extractor.hpp"
#include "pvsql/sqlcheck.hpp"
#include "pvsql/text.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>

namespace pvsql {

namespace {

PromptContext base_context(const Task& task, const SchemaDescription& schema) {
    return {{"question", task.question}, {"evidence", or_none(task.evidence)}, {"schema", render_schema(schema)}};
}

std::string ask_for_sql(LlmSession& llm, PromptKind kind, const std::string& prompt) {
    for (int attempt = 0;; ++attempt) {
        auto resp = llm.call(kind, prompt);
        try {
            return parse_sql_answer(resp.text);
        } catch (const EmptyAnswer&) {
            if (attempt >= 1) throw;
            spdlog::warn("{}: answer held no SQL, retrying once", to_string(kind));
        }
    }
}

std::string generate_with(const Task& task, const SchemaDescription& schema, const GroundingContext& grounding,
                          const std::string& constraints_text, LlmSession& llm) {
    auto ctx = base_context(task, schema);
    ctx["probe_results"] = render_probe_observations(grounding);
    ctx["constraints"] = constraints_text;
    auto sql = ask_for_sql(llm, PromptKind::generate, render_prompt(PromptKind::generate, ctx));
    spdlog::info("[{}] generate: {}", task.task_id, sql);
    return sql;
}

std::string render_llm_constraints(const LlmExtraction& ex) {
    if (ex.constraints.empty()) return "(none)";
    std::vector<std::string> lines;
    for (const auto& c : ex.constraints) {
        std::string line = "- ";
        if (!c.type.empty()) line += "[" + c.type + "] ";
        line += c.description;
        if (!c.sql_hint.empty()) line += " (" + c.sql_hint + ")";
        lines.push_back(line);
    }
    return text::join(lines, "\n");
}

// Stages 1 and 2. Returns the syntax violation alone, or the execution
// violation (if any) with parsing left to the caller.
std::optional<Violation> syntax_stage(const DatabaseHandle& db, std::string_view sql, std::optional<SqlAst>& ast) {
    if (auto v = syntax_check(db, sql)) return v;
    try {
        ast = parse_sql(sql);
    } catch (const ParseError& e) {
        return Violation{ViolationSource::syntax, std::nullopt, std::string("SQL could not be parsed: ") + e.what()};
    }
    return std::nullopt;
}

std::optional<Violation> execution_stage(DatabaseHandle& db, std::string_view sql) {
    auto out = execute(db, sql, 0);
    if (auto* v = std::get_if<Violation>(&out)) return *v;
    return std::nullopt;
}

std::vector<Violation> llm_verify_sql(const Task& task, const SchemaDescription& schema,
                                      const std::string& constraints_text, const std::string& sql,
                                      DatabaseHandle& db, LlmSession& llm) {
    std::optional<SqlAst> ast;
    if (auto v = syntax_stage(db, sql, ast)) return {*v};
    std::vector<Violation> out;
    if (auto v = execution_stage(db, sql)) out.push_back(*v);
    auto ctx = base_context(task, schema);
    ctx["constraints"] = constraints_text;
    ctx["sql"] = sql;
    auto resp = llm.call(PromptKind::llm_verify, render_prompt(PromptKind::llm_verify, ctx));
    try {
        auto verdict = parse_llm_verification(resp.text);
        bool any_error = false;
        for (const auto& issue : verdict.issues) {
            if (text::lower(issue.severity) != "error") continue;
            any_error = true;
            std::string msg = issue.description.empty() ? "verifier flagged an issue" : issue.description;
            if (!issue.suggestion.empty()) msg += " (suggestion: " + issue.suggestion + ")";
            out.push_back(Violation{ViolationSource::llm, std::nullopt, msg});
        }
        if (!verdict.is_valid && !any_error)
            out.push_back(Violation{ViolationSource::llm, std::nullopt, "verifier judged the SQL invalid"});
    } catch (const Unparseable& e) {
        spdlog::warn("[{}] llm_verify: unparseable verdict ignored ({})", task.task_id, e.what());
    }
    return out;
}

std::size_t best_draft(const std::vector<Draft>& drafts) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < drafts.size(); ++i) {
        if (drafts[i].violations.size() < drafts[best].violations.size()) best = i;
    }
    return best;
}

}  // namespace

std::string_view to_string(Mode m) {
    switch (m) {
        case Mode::rule: return "rule";
        case Mode::llm_verify: return "llm_verify";
        case Mode::no_probe: return "no_probe";
        case Mode::no_repair: return "no_repair";
    }
    return "rule";
}

Mode mode_from_string(std::string_view s) {
    for (auto m : {Mode::rule, Mode::llm_verify, Mode::no_probe, Mode::no_repair}) {
        if (to_string(m) == s) return m;
    }
    throw std::invalid_argument("unknown mode: " + std::string(s));
}

GroundingContext run_probe_loop(const Task& task, const SchemaDescription& schema, DatabaseHandle& db,
                                LlmSession& llm, int max_probes) {
    GroundingContext g;
    auto ctx = base_context(task, schema);
    for (int round = 0; round < max_probes; ++round) {
        ctx["prior_probe_results"] = render_probe_history(g.probes);
        auto resp = llm.call(PromptKind::probe, render_prompt(PromptKind::probe, ctx));
        ProbeDecision decision;
        try {
            decision = parse_probe_decision(resp.text);
        } catch (const Unparseable& e) {
            spdlog::info("[{}] probe: unparseable decision, proceeding ({})", task.task_id, e.what());
            break;
        }
        if (!decision.insight.empty()) g.add_insight(decision.insight);
        if (decision.action == ProbeAction::done) {
            spdlog::info("[{}] probe: done after {} probes", task.task_id, g.probes.size());
            break;
        }
        const auto& sql = *decision.probe_sql;
        if (!looks_like_select(sql)) {
            spdlog::info("[{}] probe: rejected non-SELECT probe", task.task_id);
            g.add_insight("Rejected probe (only SELECT statements may be run): " + sql);
            continue;
        }
        ProbeRecord rec;
        try {
            rec = execute_probe(db, sql);
        } catch (const NotASelect&) {
            g.add_insight("Rejected probe (only SELECT statements may be run): " + sql);
            continue;
        }
        rec.relevant_columns = decision.relevant_columns;
        rec.value_mappings = decision.value_mappings;
        if (rec.failed()) {
            spdlog::info("[{}] probe {}: {} -> error: {}", task.task_id, g.probes.size() + 1, rec.probe_sql,
                         std::get<std::string>(rec.result));
        } else {
            spdlog::info("[{}] probe {}: {} -> {} rows", task.task_id, g.probes.size() + 1, rec.probe_sql,
                         std::get<SampledRows>(rec.result).rows.size());
        }
        g.add_probe(std::move(rec));
    }
    return g;
}

std::string generate_sql(const Task& task, const SchemaDescription& schema, const GroundingContext& grounding,
                         const std::vector<Constraint>& constraints, LlmSession& llm) {
    return generate_with(task, schema, grounding, render_constraints(constraints), llm);
}

std::vector<Violation> verify_sql(std::string_view sql, const std::vector<Constraint>& constraints,
                                  DatabaseHandle& db, const SchemaDescription* schema) {
    std::optional<SqlAst> ast;
    if (auto v = syntax_stage(db, sql, ast)) return {*v};
    std::vector<Violation> out;
    if (auto v = execution_stage(db, sql)) out.push_back(*v);
    auto found = check_all(*ast, constraints, schema);
    out.insert(out.end(), found.begin(), found.end());
    return out;
}

RepairOutcome repair_loop_with(const Task& task, const SchemaDescription& schema,
                               const GroundingContext& grounding, const std::string& constraints_text,
                               const std::string& initial_sql, LlmSession& llm, int max_repairs,
                               const Verifier& verify) {
    RepairOutcome out;
    out.drafts.push_back(Draft{initial_sql, verify(initial_sql)});
    spdlog::info("[{}] verify: {} violations", task.task_id, out.drafts.back().violations.size());

    auto ctx = base_context(task, schema);
    ctx["probe_results"] = render_probe_observations(grounding);
    ctx["constraints"] = constraints_text;

    while (!out.drafts.back().violations.empty() && out.repair_count < max_repairs) {
        ctx["original_sql"] = out.drafts.back().sql;
        ctx["violation_messages"] = render_violations(out.drafts.back().violations);
        std::string sql;
        try {
            sql = ask_for_sql(llm, PromptKind::repair, render_prompt(PromptKind::repair, ctx));
        } catch (const BackendError& e) {
            out.error = e.what();
        } catch (const EmptyAnswer& e) {
            out.error = e.what();
        }
        if (!out.error.empty()) {
            auto best = best_draft(out.drafts);
            spdlog::warn("[{}] repair stopped ({}); keeping draft {}", task.task_id, out.error, best);
            out.final_sql = out.drafts[best].sql;
            return out;
        }
        ++out.repair_count;
        out.drafts.push_back(Draft{sql, verify(sql)});
        spdlog::info("[{}] repair {}: {} violations", task.task_id, out.repair_count,
                     out.drafts.back().violations.size());
    }
    out.final_sql = out.drafts.back().sql;
    return out;
}

RepairOutcome repair_loop(const Task& task, const SchemaDescription& schema, const GroundingContext& grounding,
                          const std::vector<Constraint>& constraints, const std::string& initial_sql,
                          DatabaseHandle& db, LlmSession& llm, int max_repairs) {
    Verifier verify = [&](const std::string& sql) { return verify_sql(sql, constraints, db, &schema); };
    return repair_loop_with(task, schema, grounding, render_constraints(constraints), initial_sql, llm, max_repairs,
                            verify);
}

RunRecord run_task(const Task& task, DatabaseHandle& db, LlmBackend& backend, const AgentConfig& config) {
    auto t0 = std::chrono::steady_clock::now();
    RunRecord r;
    r.task = task;
    r.mode = std::string(to_string(config.mode));
    int k = config.mode == Mode::no_probe ? 0 : std::max(0, config.max_probes);
    int m = config.mode == Mode::no_repair ? 0 : std::max(0, config.max_repairs);
    LlmSession llm(backend, config.temperature, config.max_output_tokens);

    try {
        auto schema = load_schema(db);
        r.grounding = run_probe_loop(task, schema, db, llm, k);
        r.probe_count = static_cast<int>(r.grounding.probes.size());

        RepairOutcome outcome;
        if (config.mode == Mode::llm_verify) {
            LlmExtraction extraction;
            auto ctx = PromptContext{{"question", task.question}, {"evidence", or_none(task.evidence)}};
            auto resp = llm.call(PromptKind::llm_extract, render_prompt(PromptKind::llm_extract, ctx));
            try {
                extraction = parse_llm_extraction(resp.text);
            } catch (const Unparseable& e) {
                spdlog::warn("[{}] llm_extract: unparseable answer ignored ({})", task.task_id, e.what());
            }
            auto constraints_text = render_llm_constraints(extraction);
            auto sql = generate_with(task, schema, r.grounding, constraints_text, llm);
            Verifier verify = [&](const std::string& s) {
                return llm_verify_sql(task, schema, constraints_text, s, db, llm);
            };
            outcome = repair_loop_with(task, schema, r.grounding, constraints_text, sql, llm, m, verify);
        } else {
            auto constraints = extract_constraints(task.question, task.evidence);
            auto grounded = grounding_literals(r.grounding, task.question, task.evidence);
            constraints.insert(constraints.end(), grounded.begin(), grounded.end());
            r.constraints = merge_constraints(std::move(constraints));
            std::vector<std::string> names;
            for (const auto& c : r.constraints) names.push_back(describe(c));
            spdlog::info("[{}] constraints: {}", task.task_id, names.empty() ? "(none)" : text::join(names, " | "));
            auto sql = generate_sql(task, schema, r.grounding, r.constraints, llm);
            outcome = repair_loop(task, schema, r.grounding, r.constraints, sql, db, llm, m);
        }
        r.drafts = std::move(outcome.drafts);
        r.final_sql = std::move(outcome.final_sql);
        r.repair_count = outcome.repair_count;
        r.error = std::move(outcome.error);
    } catch (const ScriptMismatch&) {
        throw;
    } catch (const std::exception& e) {
        r.failed = true;
        r.error = e.what();
        spdlog::error("[{}] task failed: {}", task.task_id, e.what());
    }

    r.tokens_in = llm.tokens_in();
    r.tokens_out = llm.tokens_out();
    r.llm_calls = llm.calls();
    r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

RunRecord rerun_repair(const RunRecord& base, const std::vector<Constraint>& constraints, DatabaseHandle& db,
                       LlmBackend& backend, const AgentConfig& config) {
    auto t0 = std::chrono::steady_clock::now();
    RunRecord r;
    r.task = base.task;
    r.mode = base.mode;
    r.grounding = base.grounding;
    r.probe_count = base.probe_count;
    r.constraints = constraints;
    LlmSession llm(backend, config.temperature, config.max_output_tokens);
    try {
        if (base.drafts.empty()) throw std::runtime_error("base record has no generated SQL");
        auto schema = load_schema(db);
        auto outcome = repair_loop(base.task, schema, base.grounding, constraints, base.drafts.front().sql, db, llm,
                                   std::max(0, config.max_repairs));
        r.drafts = std::move(outcome.drafts);
        r.final_sql = std::move(outcome.final_sql);
        r.repair_count = outcome.repair_count;
        r.error = std::move(outcome.error);
    } catch (const ScriptMismatch&) {
        throw;
    } catch (const std::exception& e) {
        r.failed = true;
        r.error = e.what();
    }
    r.tokens_in = llm.tokens_in();
    r.tokens_out = llm.tokens_out();
    r.llm_calls = llm.calls();
    r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

}  // namespace pvsql
