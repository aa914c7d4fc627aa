#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "symboost/dataset.hpp"
#include "symboost/expr.hpp"
#include "symboost/regions.hpp"
#include "symboost/tpe.hpp"

namespace symboost {

// error tags attached to few-shot sample rows
inline constexpr const char* kTagFalseNeg = "FALSE_NEG";
inline constexpr const char* kTagFalsePos = "FALSE_POS";
inline constexpr const char* kTagHighUncertainty = "HIGH_UNCERTAINTY";
inline constexpr const char* kTagConfidentOk = "CONFIDENT_OK";

// HIGH_UNCERTAINTY wins inside the |p - 0.5| <= 0.1 band; outside it,
// misclassifications at the 0.5 cut become FALSE_NEG / FALSE_POS.
const char* error_tag(int y, double base_proba);

struct SampleRow {
    std::string row_id;
    std::vector<double> values;
    int y = 0;
    double base_proba = 0.5;
    std::string tag;
};

struct PromptBundle {
    int iteration = 1;
    std::string task_header;
    std::string region_rule;
    std::string seed_function;   // DSL text of f_{t-1}
    double seed_metric = 0.0;    // A_{t-1}
    std::string stats_block;
    std::string samples_block;
    std::string constraints_block;

    // structured context for deterministic providers and validation
    std::vector<std::string> schema;
    std::vector<std::string> descriptions;
    std::vector<SampleRow> samples;
    std::vector<FeatureStat> stats;      // aligned with schema
    std::vector<int> region_features;    // feature ids constrained by the region
    std::vector<std::string> positive_constraints;
    std::vector<std::string> negative_constraints;

    std::string render() const;  // full prompt text
};

struct PromptConfig {
    std::size_t n_samples = 20;   // N
    std::size_t top_features = 8; // m_top
};

struct PromptInputs {
    const Region* region = nullptr;
    std::string seed_dsl;
    double seed_metric = 0.0;
    int iteration = 1;
    std::uint64_t sample_seed = 0;
    const std::vector<double>* base_probas = nullptr;  // aligned with data rows
    std::vector<std::string> positive_constraints;
    std::vector<std::string> negative_constraints;
};

// Deterministic few-shot selection: rows drawn only from the region,
// stratified across error tags, exactly min(N, region size) of them.
PromptBundle build_prompt(const PromptInputs& in, const Dataset& data,
                          const FeatureStats& stats, const PromptConfig& cfg);

struct CandidateExpert {
    std::string dsl_text;
    std::string intent;                  // one-line modification summary
    std::vector<SearchDim> search_space; // boxes for newly added slots
};

struct CandidateValidation {
    bool ok = false;
    std::string error_kind;     // syntax | unknown-feature | unknown-function |
                                // duplicate-parameter | search-space | guard
    std::string error_message;
    ExpertExpr expr;            // populated when ok
};

// Parses and checks a candidate: schema-valid DSL, search space naming only
// free slots with sane boxes, guard contained in the allowed box.
CandidateValidation validate_candidate(const CandidateExpert& cand,
                                       const std::vector<std::string>& schema,
                                       const std::vector<IntervalClause>& allowed_box);

struct ProviderEvent {
    std::string kind;  // "prompt" | "response"
    std::string payload;
};

class Provider {
public:
    virtual ~Provider() = default;
    virtual CandidateExpert propose(const PromptBundle& prompt, std::uint64_t seed) = 0;
    // re-prompt with the verbatim error report; attempt starts at 1
    virtual CandidateExpert repair(const PromptBundle& prompt,
                                   const CandidateExpert& failed,
                                   const std::string& error_report, int attempt,
                                   std::uint64_t seed) = 0;
    virtual std::string name() const = 0;

    // raw exchanges since the last drain, for the chain transcript
    std::vector<ProviderEvent> drain_events() {
        std::vector<ProviderEvent> out;
        out.swap(events_);
        return out;
    }

protected:
    void log_event(std::string kind, std::string payload) {
        events_.push_back({std::move(kind), std::move(payload)});
    }

private:
    std::vector<ProviderEvent> events_;
};

// Seeded structural mutations of the seed function; a pure function of
// (prompt bundle, seed), so full pipeline runs are bit-reproducible.
class MockProvider : public Provider {
public:
    CandidateExpert propose(const PromptBundle& prompt, std::uint64_t seed) override;
    CandidateExpert repair(const PromptBundle& prompt, const CandidateExpert& failed,
                           const std::string& error_report, int attempt,
                           std::uint64_t seed) override;
    std::string name() const override { return "mock"; }
};

// Never yields a parseable candidate; exercises the all-rejected path.
class FailingProvider : public Provider {
public:
    CandidateExpert propose(const PromptBundle& prompt, std::uint64_t seed) override;
    CandidateExpert repair(const PromptBundle& prompt, const CandidateExpert& failed,
                           const std::string& error_report, int attempt,
                           std::uint64_t seed) override;
    std::string name() const override { return "failing"; }
};

struct LlmConfig {
    std::string base_url;  // e.g. http://localhost:8000/v1
    std::string model;
    double temperature = 0.1;
    std::string api_key_env = "SYMBOOST_API_KEY";
    int timeout_seconds = 60;
    int max_retries = 3;
};

// OpenAI-compatible chat-completions client. Expects the reply to carry the
// DSL in the first fenced code block and a SEARCH_SPACE: JSON array.
class LlmProvider : public Provider {
public:
    explicit LlmProvider(LlmConfig cfg) : cfg_(std::move(cfg)) {}
    CandidateExpert propose(const PromptBundle& prompt, std::uint64_t seed) override;
    CandidateExpert repair(const PromptBundle& prompt, const CandidateExpert& failed,
                           const std::string& error_report, int attempt,
                           std::uint64_t seed) override;
    std::string name() const override { return "llm"; }

    // exposed for tests
    static CandidateExpert parse_completion(const std::string& content);

private:
    std::string complete(const std::string& system_text, const std::string& user_text);
    LlmConfig cfg_;
};

struct ProviderConfig {
    std::string kind = "mock";  // mock | llm | failing
    LlmConfig llm;
};

std::unique_ptr<Provider> make_provider(const ProviderConfig& cfg);

}  // namespace symboost
