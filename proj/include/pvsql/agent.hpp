#pragma once

// The probe -> extract -> generate -> verify/repair pipeline for one task.

#include "pvsql/core.hpp"
#include "pvsql/executor.hpp"
#include "pvsql/llm.hpp"

#include <functional>
#include <string>
#include <vector>

namespace pvsql {

enum class Mode { rule, llm_verify, no_probe, no_repair };

std::string_view to_string(Mode m);
Mode mode_from_string(std::string_view s);

struct AgentConfig {
    int max_probes = 5;   // K
    int max_repairs = 5;  // M
    Mode mode = Mode::rule;
    double temperature = 0.0;
    int max_output_tokens = 1024;
};

// Probe prompts until the model says done, its answer cannot be parsed, or K
// rounds have been used. Rejected (non-SELECT) probes use up a round.
GroundingContext run_probe_loop(const Task& task, const SchemaDescription& schema, DatabaseHandle& db,
                                LlmSession& llm, int max_probes);

// One generation call, retried once when the answer holds no SQL. Throws
// EmptyAnswer after the retry.
std::string generate_sql(const Task& task, const SchemaDescription& schema, const GroundingContext& grounding,
                         const std::vector<Constraint>& constraints, LlmSession& llm);

// Syntax (compile and parse), then execution, then constraint checks. A
// syntax failure is returned alone and nothing is executed.
std::vector<Violation> verify_sql(std::string_view sql, const std::vector<Constraint>& constraints,
                                  DatabaseHandle& db, const SchemaDescription* schema = nullptr);

using Verifier = std::function<std::vector<Violation>(const std::string& sql)>;

struct RepairOutcome {
    std::vector<Draft> drafts;
    std::string final_sql;
    int repair_count = 0;
    std::string error;  // backend failure that ended the loop early
};

// Verifies `initial_sql` and repairs while violations remain and fewer than
// M rounds have run. On a backend failure the draft with the fewest
// violations (earliest on ties) becomes final.
RepairOutcome repair_loop(const Task& task, const SchemaDescription& schema, const GroundingContext& grounding,
                          const std::vector<Constraint>& constraints, const std::string& initial_sql,
                          DatabaseHandle& db, LlmSession& llm, int max_repairs);

// Same loop with a caller-supplied verifier and constraint text.
RepairOutcome repair_loop_with(const Task& task, const SchemaDescription& schema,
                               const GroundingContext& grounding, const std::string& constraints_text,
                               const std::string& initial_sql, LlmSession& llm, int max_repairs,
                               const Verifier& verify);

// Full pipeline. Task-level errors are captured in the record (failed=true);
// ScriptMismatch from a scripted backend propagates.
RunRecord run_task(const Task& task, DatabaseHandle& db, LlmBackend& backend, const AgentConfig& config);

// Repair loop rerun with a fixed constraint list and the record's own probe
// context and first draft.
RunRecord rerun_repair(const RunRecord& base, const std::vector<Constraint>& constraints, DatabaseHandle& db,
                       LlmBackend& backend, const AgentConfig& config);

}  // namespace pvsql
