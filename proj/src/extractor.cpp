#include "pvsql/extractor.hpp"

#include "pvsql/text.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <optional>
#include <set>

namespace pvsql {

namespace {

using text::is_word_char;

RuleTable build_standard() {
    RuleTable t;
    t.rules = {
        {ConstraintKind::Distinct,
         {{"unique", ""}, {"distinct", ""}, {"different", ""}, {"no duplicate", ""}, {"deduplicate", ""}},
         ParamCapture::None},
        {ConstraintKind::TopK,
         {{"top", "max"},
          {"first", ""},
          {"bottom", "min"},
          {"highest", "max"},
          {"lowest", "min"},
          {"best", "max"},
          {"worst", "min"}},
         ParamCapture::TopKNumber},
        {ConstraintKind::Ranking,
         {{"rank", ""}, {"ranking", ""}, {"position", ""}, {"placed", ""}, {"standing", ""}},
         ParamCapture::None},
        {ConstraintKind::Count,
         {{"how many", ""}, {"count", ""}, {"number of", ""}, {"total number", ""}, {"quantity of", ""}},
         ParamCapture::None},
        {ConstraintKind::Percent,
         {{"percentage", ""},
          {"percent", ""},
          {"%", ""},
          {"ratio", ""},
          {"rate", ""},
          {"proportion", ""},
          {"fraction of", ""}},
         ParamCapture::None},
        {ConstraintKind::Sum,
         {{"total", ""}, {"sum", ""}, {"overall", ""}, {"combined", ""}, {"aggregate", ""}},
         ParamCapture::None},
        {ConstraintKind::Average,
         {{"average", ""}, {"mean", ""}, {"avg", ""}, {"on average", ""}, {"typical", ""}},
         ParamCapture::None},
        {ConstraintKind::Extreme,
         {{"maximum", "max"},
          {"minimum", "min"},
          {"max", "max"},
          {"min", "min"},
          {"largest", "max"},
          {"smallest", "min"},
          {"most", "max"},
          {"least", "min"},
          {"highest", "max"},
          {"lowest", "min"}},
         ParamCapture::ExtremeDirection},
        {ConstraintKind::Temporal,
         {{"latest", "latest"},
          {"earliest", "earliest"},
          {"most recent", "latest"},
          {"newest", "latest"},
          {"oldest", "earliest"},
          {"last", "latest"},
          {"first", "earliest"}},
         ParamCapture::TemporalDirection},
        {ConstraintKind::Compare,
         {{"more than", ">"},
          {"less than", "<"},
          {"greater than", ">"},
          {"fewer than", "<"},
          {"at least", ">="},
          {"at most", "<="},
          {"no more than", "<="},
          {"exceeds", ">"},
          {"no less than", ">="}},
         ParamCapture::CompareDirection},
    };
    return t;
}

struct Match {
    ConstraintKind kind{};
    std::optional<ConstraintParam> param;
    std::size_t begin = 0;
    std::size_t end = 0;
};

// Offsets of `needle` in `hay` (both lowercase) that sit on word boundaries.
std::vector<std::size_t> find_words(const std::string& hay, const std::string& needle) {
    std::vector<std::size_t> out;
    bool need_left = is_word_char(needle.front());
    bool need_right = is_word_char(needle.back());
    for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) {
        auto end = pos + needle.size();
        bool left_ok = !need_left || pos == 0 || !is_word_char(hay[pos - 1]);
        bool right_ok = !need_right || end == hay.size() || !is_word_char(hay[end]);
        if (left_ok && right_ok) out.push_back(pos);
    }
    return out;
}

// The word starting at or after `pos` (skipping spaces): [begin, end).
std::optional<Span> next_word(std::string_view s, std::size_t pos) {
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    if (pos >= s.size() || !is_word_char(s[pos])) return std::nullopt;
    auto end = pos;
    while (end < s.size() && is_word_char(s[end])) ++end;
    return Span{pos, end};
}

std::optional<std::int64_t> number_value(std::string_view word) {
    static constexpr std::array<std::string_view, 10> kSpelled = {"one", "two",   "three", "four", "five",
                                                                  "six", "seven", "eight", "nine", "ten"};
    if (!word.empty() && word.size() <= 9 &&
        std::all_of(word.begin(), word.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
        return std::stoll(std::string(word));
    }
    auto low = text::lower(word);
    for (std::size_t i = 0; i < kSpelled.size(); ++i) {
        if (low == kSpelled[i]) return static_cast<std::int64_t>(i + 1);
    }
    return std::nullopt;
}

bool is_year(std::string_view word) {
    if (word.size() != 4 ||
        !std::all_of(word.begin(), word.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }))
        return false;
    int y = std::stoi(std::string(word));
    return y >= 1900 && y <= 2099;
}

Span sentence_of(const std::string& s, std::size_t pos) {
    auto is_stop = [&](std::size_t i) {
        return (s[i] == '.' || s[i] == '?' || s[i] == '!') &&
               (i + 1 == s.size() || std::isspace(static_cast<unsigned char>(s[i + 1])));
    };
    std::size_t b = pos;
    while (b > 0 && !is_stop(b - 1)) --b;
    std::size_t e = pos;
    while (e < s.size() && !is_stop(e)) ++e;
    return {b, e};
}

bool has_time_context(const std::string& low, Span sentence) {
    static const std::set<std::string, std::less<>> kWords = {
        "year",    "years",    "date",    "dates",    "time",      "times",   "day",      "days",
        "month",   "months",   "january", "february", "march",     "april",   "may",      "june",
        "july",    "august",   "september", "october", "november", "december"};
    std::size_t i = sentence.begin;
    while (i < sentence.end) {
        if (!is_word_char(low[i])) {
            ++i;
            continue;
        }
        auto j = i;
        while (j < sentence.end && is_word_char(low[j])) ++j;
        std::string_view w(low.data() + i, j - i);
        if (kWords.count(w) || is_year(w) || (w.size() > 4 && w.substr(w.size() - 4) == "date")) return true;
        i = j;
    }
    return false;
}

bool inside(const Match& inner, const Match& outer) {
    return outer.begin <= inner.begin && inner.end <= outer.end &&
           (outer.end - outer.begin) > (inner.end - inner.begin);
}

std::vector<Match> match_text(const std::string& original, bool include_years) {
    const auto& table = RuleTable::standard();
    auto low = text::lower(original);
    std::vector<Match> raw;
    std::vector<Match> topk;

    for (const auto& rule : table.rules) {
        for (const auto& pat : rule.patterns) {
            for (auto pos : find_words(low, pat.phrase)) {
                auto end = pos + pat.phrase.size();
                if (rule.capture == ParamCapture::TopKNumber) {
                    auto w = next_word(low, end);
                    std::optional<std::int64_t> n;
                    if (w && w->begin > end) n = number_value(std::string_view(low).substr(w->begin, w->end - w->begin));
                    if (n) {
                        if (*n >= 1) topk.push_back({ConstraintKind::TopK, ConstraintParam{*n}, pos, w->end});
                    } else if (pat.phrase == "top" || pat.phrase == "bottom" || pat.phrase == "best" ||
                               pat.phrase == "worst") {
                        raw.push_back({ConstraintKind::Extreme, ConstraintParam{pat.param}, pos, end});
                    }
                    continue;
                }
                std::optional<ConstraintParam> param;
                if (!pat.param.empty()) param = pat.param;
                raw.push_back({rule.kind, param, pos, end});
            }
        }
    }

    std::vector<Match> all = topk;
    all.insert(all.end(), raw.begin(), raw.end());

    std::vector<Match> kept = topk;
    for (const auto& m : raw) {
        bool covered = std::any_of(all.begin(), all.end(), [&](const Match& o) { return inside(m, o); });
        if (covered) continue;
        if (m.kind == ConstraintKind::Extreme &&
            std::any_of(topk.begin(), topk.end(), [&](const Match& t) { return m.begin < t.end && t.begin < m.end; }))
            continue;
        if (m.kind == ConstraintKind::Temporal) {
            auto after = next_word(low, m.end);
            auto phrase = std::string_view(low).substr(m.begin, m.end - m.begin);
            if ((phrase == "first" || phrase == "last") && after) {
                auto w = std::string_view(low).substr(after->begin, after->end - after->begin);
                if (w == "name" || w == "names" || number_value(w)) continue;
            }
            if (!has_time_context(low, sentence_of(low, m.begin))) continue;
        }
        kept.push_back(m);
    }

    if (include_years) {
        std::size_t i = 0;
        while (i < low.size()) {
            if (!is_word_char(low[i])) {
                ++i;
                continue;
            }
            auto j = i;
            while (j < low.size() && is_word_char(low[j])) ++j;
            std::string_view w(low.data() + i, j - i);
            if (is_year(w)) kept.push_back({ConstraintKind::LiteralPresence, ConstraintParam{std::string(w)}, i, j});
            i = j;
        }
    }
    // merged triggers read in text order
    std::stable_sort(kept.begin(), kept.end(), [](const Match& a, const Match& b) { return a.begin < b.begin; });
    return kept;
}

void append_matches(std::vector<Constraint>& out, const std::string& original, bool include_years) {
    for (const auto& m : match_text(original, include_years)) {
        out.push_back(Constraint{m.kind, m.param, original.substr(m.begin, m.end - m.begin)});
    }
}

}  // namespace

const Rule& RuleTable::rule(ConstraintKind kind) const {
    for (const auto& r : rules) {
        if (r.kind == kind) return r;
    }
    throw std::out_of_range("no rule for constraint kind " + std::string(to_string(kind)));
}

const RuleTable& RuleTable::standard() {
    static const RuleTable table = build_standard();
    return table;
}

std::vector<Constraint> merge_constraints(std::vector<Constraint> constraints) {
    std::vector<Constraint> out;
    for (auto& c : constraints) {
        auto it = std::find_if(out.begin(), out.end(), [&](const Constraint& o) { return same_requirement(o, c); });
        if (it == out.end()) {
            out.push_back(std::move(c));
            continue;
        }
        auto parts = text::split(it->trigger, ';');
        bool seen = std::any_of(parts.begin(), parts.end(),
                                [&](const std::string& p) { return text::trim(p) == c.trigger; });
        if (!seen) it->trigger += std::string(Constraint::kTriggerSeparator) + c.trigger;
    }
    std::stable_sort(out.begin(), out.end(), requirement_less);
    return out;
}

std::vector<Constraint> extract_constraints(std::string_view question, std::string_view evidence) {
    std::vector<Constraint> found;
    append_matches(found, std::string(question), true);
    if (!evidence.empty()) append_matches(found, std::string(evidence), false);
    return merge_constraints(std::move(found));
}

std::int64_t extract_topk_n(std::string_view text, Span trigger_span) {
    if (trigger_span.begin >= text.size() || trigger_span.end > text.size() || trigger_span.end < trigger_span.begin)
        throw NoNumber("trigger span outside the text");
    auto keyword = next_word(text, trigger_span.begin);
    if (!keyword) throw NoNumber("no Top-K keyword at the trigger span");
    auto after = next_word(text, keyword->end);
    if (after && after->begin > keyword->end) {
        auto w = text.substr(after->begin, after->end - after->begin);
        if (auto n = number_value(w)) {
            if (*n < 1) throw NoNumber("Top-K count must be at least 1");
            return *n;
        }
        auto kw = text::lower(text.substr(keyword->begin, keyword->end - keyword->begin));
        auto lw = text::lower(w);
        bool plural = lw.size() > 1 && lw.back() == 's' && lw[lw.size() - 2] != 's';
        if (kw == "first" && !plural && std::isalpha(static_cast<unsigned char>(lw.front()))) return 1;
    }
    throw NoNumber("no number next to \"" + std::string(text.substr(trigger_span.begin, trigger_span.end - trigger_span.begin)) +
                   "\"");
}

std::vector<Constraint> grounding_literals(const GroundingContext& grounding, std::string_view question,
                                           std::string_view evidence) {
    std::vector<Constraint> out;
    for (const auto& [term, value] : grounding.merged_value_mappings) {
        auto needle = text::lower(text::trim(term));
        if (needle.empty() || text::trim(value).empty()) continue;
        for (auto src : {question, evidence}) {
            std::string original(src);
            auto hits = find_words(text::lower(original), needle);
            if (hits.empty()) continue;
            out.push_back(Constraint{ConstraintKind::LiteralPresence, ConstraintParam{value},
                                     original.substr(hits.front(), needle.size())});
            break;
        }
    }
    return merge_constraints(std::move(out));
}

}  // namespace pvsql
