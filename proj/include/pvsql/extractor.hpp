#pragma once

// Rule-based extraction of verifiable constraints from a question and its
// evidence text.

#include "pvsql/core.hpp"

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pvsql {

enum class ParamCapture {
    None,
    TopKNumber,         // integer following the keyword
    CompareDirection,   // fixed operator per phrase
    ExtremeDirection,   // "max" or "min" per phrase
    TemporalDirection,  // "latest" or "earliest" per phrase
};

struct Pattern {
    std::string phrase;  // lowercase
    std::string param;   // fixed parameter for direction captures, else empty
};

struct Rule {
    ConstraintKind kind{};
    std::vector<Pattern> patterns;
    ParamCapture capture = ParamCapture::None;
};

struct RuleTable {
    std::vector<Rule> rules;

    const Rule& rule(ConstraintKind kind) const;

    // The ten pattern rules. LiteralPresence has no phrase rule; it is
    // produced from years and from grounding value mappings.
    static const RuleTable& standard();
};

struct Span {
    std::size_t begin = 0;
    std::size_t end = 0;
};

class NoNumber : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Deduplicated by (kind, param), sorted by kind then param.
std::vector<Constraint> extract_constraints(std::string_view question, std::string_view evidence = {});

// N for a Top-K keyword at `trigger_span` of `text`: digits or one..ten after
// the keyword (or inside the span), or 1 for "first" before a singular noun.
std::int64_t extract_topk_n(std::string_view text, Span trigger_span);

// LiteralPresence constraints for probe value mappings whose question term
// occurs in the question or evidence.
std::vector<Constraint> grounding_literals(const GroundingContext& grounding, std::string_view question,
                                           std::string_view evidence = {});

// Union with (kind, param) deduplication; triggers of merged entries are
// joined with Constraint::kTriggerSeparator. Output is sorted.
std::vector<Constraint> merge_constraints(std::vector<Constraint> constraints);

}  // namespace pvsql
