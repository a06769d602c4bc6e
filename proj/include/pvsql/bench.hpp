#pragma once

// Dataset loading, EX/VES scoring, component evaluations and the parallel
// benchmark runner.

#include "pvsql/agent.hpp"
#include "pvsql/core.hpp"
#include "pvsql/executor.hpp"
#include "pvsql/json_codec.hpp"
#include "pvsql/llm.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pvsql {

class FormatError : public std::runtime_error {
public:
    FormatError(std::size_t index, const std::string& message)
        : std::runtime_error("record " + std::to_string(index) + ": " + message), index_(index) {}
    std::size_t index() const { return index_; }

private:
    std::size_t index_;
};

class GoldExecutionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class DatasetFormat { bird, spider, minidev };

DatasetFormat dataset_format_from_string(std::string_view s);

std::vector<Task> parse_tasks(std::string_view json_text, DatasetFormat format);
std::vector<Task> load_tasks(const std::filesystem::path& path, DatasetFormat format);

// ---- execution accuracy ----------------------------------------------------

// Row multisets compared with column order significant, reals rounded to
// 1e-6 and integral reals equal to integers; `ordered` compares sequences.
bool results_match(const ExecResult& gold, const ExecResult& pred, bool ordered);

// True when the statement's outermost query has an ORDER BY.
bool has_top_level_order_by(std::string_view sql);

// Throws GoldExecutionError when the gold query itself fails.
bool execution_accuracy(std::string_view pred_sql, std::string_view gold_sql, DatabaseHandle& db);

// Median of `runs` timed executions after `warmup` untimed ones; nullopt when
// the query fails.
std::optional<double> time_query(DatabaseHandle& db, std::string_view sql, int runs = 3, int warmup = 1);

struct VesSample {
    bool correct = false;
    double t_gold = 0.0;
    double t_pred = 0.0;
};

// 100 * mean([correct] * sqrt(t_gold / t_pred)).
double valid_efficiency_score(const std::vector<VesSample>& samples);

// tokens_in / 8 + tokens_out
double weighted_token_cost(double tokens_in, double tokens_out);

// ---- component evaluations -------------------------------------------------

struct ExtractionEval {
    std::size_t n = 0;
    std::size_t passed = 0;
    std::size_t parse_failures = 0;  // gold SQL that could not be parsed
    double pass_rate = 0.0;          // percent; 100 when n == 0
    std::vector<std::string> failing_task_ids;
};

// Gold SQL pass rate of the rule extractor. Uses no database and no model.
ExtractionEval eval_extraction_on_gold(const std::vector<Task>& tasks);

struct RepairRates {
    std::optional<double> success_rate;     // percent, nullopt with no violations to fix
    std::optional<double> regression_rate;  // percent, nullopt with no satisfied constraints
    std::size_t pairs = 0;
    std::size_t violations_before = 0;
    std::size_t resolved = 0;
    std::size_t satisfied_before = 0;
    std::size_t broken = 0;
};

RepairRates eval_repair_rates(const std::vector<RunRecord>& records);

struct HeadroomResult {
    std::size_t n = 0;  // failed tasks rerun
    std::size_t corrected = 0;
    std::size_t skipped = 0;  // no gold SQL, unparseable gold, or no first draft
    double rate = 0.0;        // percent; 0 when n == 0
    std::vector<RunRecord> reruns;
};

struct BenchOptions {
    std::filesystem::path db_root;
    AgentConfig agent;
    DbOptions db;
    int workers = 1;
    bool time_queries = true;
};

HeadroomResult headroom_rerun(const std::vector<RunRecord>& records, LlmBackend& backend,
                              const BenchOptions& options);

struct ErrorDistribution {
    std::size_t n = 0;
    std::size_t classified = 0;
    std::size_t unclassified = 0;
    std::map<ErrorKind, std::size_t> counts;
    std::map<ErrorKind, double> percent;  // over classified cases
    std::vector<std::pair<std::string, ErrorClass>> verdicts;
};

ErrorDistribution judge_errors(const std::vector<RunRecord>& records, LlmBackend& backend,
                               const BenchOptions& options);

struct ProbeQuality {
    std::size_t n = 0;  // probe verdicts counted
    std::size_t unparsed_records = 0;
    double relevant = 0.0;
    double new_insight = 0.0;
    double redundant = 0.0;
};

ProbeQuality judge_probe_quality(const std::vector<RunRecord>& records, LlmBackend& backend,
                                 const BenchOptions& options);

// ---- metrics ---------------------------------------------------------------

struct DifficultyMetrics {
    double ex = 0.0;
    double ves = 0.0;
    std::size_t n = 0;
};

struct MetricReport {
    std::size_t n_tasks = 0;       // scored tasks
    std::size_t gold_failures = 0; // excluded from EX/VES
    std::size_t failed_runs = 0;   // pipeline errors (still scored)
    double ex = 0.0;
    double ves = 0.0;
    std::map<std::string, DifficultyMetrics> per_difficulty;
    double mean_tokens_in = 0.0;
    double mean_tokens_out = 0.0;
    double mean_wall_seconds = 0.0;
    double weighted_token_cost = 0.0;
    double mean_probes = 0.0;
    double mean_repairs = 0.0;
};

// Records without ex_correct count as gold failures. A correct record lacking
// timings contributes a time ratio of 1.
MetricReport compute_metrics(const std::vector<RunRecord>& records);

Json report_to_json(const MetricReport& report);
// Aligned table: Method | EX | VES | simple | moderate | challenging | In | Out | Time
std::string format_report(const MetricReport& report, const std::string& label = "PV-SQL");

// Fills ex_correct (nullopt on gold failure) and, when asked, timings.
void score_record(RunRecord& record, DatabaseHandle& db, bool time_queries);

// Runs and scores every task; results keep task order. A backend that cannot
// serve concurrent tasks forces one worker.
std::vector<RunRecord> run_benchmark(const std::vector<Task>& tasks, LlmBackend& backend,
                                     const BenchOptions& options,
                                     const std::function<void(const RunRecord&)>& on_done = {});

std::vector<RunRecord> read_trace(const std::filesystem::path& path);
void write_trace(const std::filesystem::path& path, const std::vector<RunRecord>& records);

}  // namespace pvsql
