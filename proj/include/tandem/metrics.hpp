#pragma once

// Evaluation measures: answer accuracy, notational jargon rate, and a
// shingle-averaged dialect distribution over generated text.
//
// Dialect identification mirrors the usual language-id recipe: strip digits
// and operator symbols, split the remainder into overlapping eight-word
// shingles, classify each shingle with a smoothed word-frequency model under
// a uniform prior, and average the per-shingle posteriors.

#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tandem/model.hpp"
#include "tandem/tasks.hpp"
#include "tandem/text.hpp"

namespace tandem {

inline constexpr int kShingleWindow = 8;

// Removes digits and the symbols # = + - * < > x(multiply) /(divide) $ as
// well as the calculator brackets, then collapses whitespace. Words made
// entirely of stripped characters disappear. Idempotent.
std::string clean_for_langid(std::string_view text);

// Fraction of answers containing either calculator bracket.
double notational_jargon_rate(const std::vector<std::string>& answers);

class DialectClassifier {
public:
    const std::vector<std::string>& dialect_names() const { return names_; }

    // Posterior over dialects for one window of cleaned words. Words absent
    // from every dialect table carry no evidence and are skipped, so a window
    // of only unknown words returns the uniform prior exactly.
    std::map<std::string, double> classify_window(const std::vector<std::string>& words) const;

private:
    friend DialectClassifier train_dialect_classifier(
        const std::map<std::string, std::vector<std::string>>& corpora);

    std::vector<std::string> names_;
    // word -> per-dialect add-one-smoothed log-likelihood, indexed like names_
    std::unordered_map<std::string, std::vector<double>> word_loglik_;
};

// Builds per-dialect word tables from cleaned training text. Requires at
// least two dialects and at least 100 cleaned words per dialect.
DialectClassifier train_dialect_classifier(
    const std::map<std::string, std::vector<std::string>>& corpora);

// Overlapping stride-1 windows over a word sequence: n-window+1 shingles for
// n >= window, one whole-sequence shingle for 0 < n < window, none for n = 0.
std::vector<std::vector<std::string>> shingles(const std::vector<std::string>& words,
                                               int window = kShingleWindow);

// clean -> shingle (stride 1, window `window`) -> classify -> average.
// Fewer than `window` words form a single whole-text shingle; zero words
// yield the uniform distribution.
std::map<std::string, double> language_distribution(std::string_view text,
                                                    const DialectClassifier& clf,
                                                    int window = kShingleWindow);

struct MetricRecord {
    int update = 0;
    double accuracy = 0.0;
    double notational_jargon = 0.0;
    std::map<std::string, double> language_distribution;
};

struct EvalConfig {
    double temperature = 0.0;
    int max_output_tokens = 256;
    uint64_t seed = 0;  // consumed only when temperature > 0
};

struct EvalResult {
    MetricRecord record;                // update index left 0 for the caller
    std::vector<std::string> answers;   // detokenized solo outputs, problem order
};

// Solo-decodes the model on every problem (prompting with `prompt_dialect`
// questions through `renderer`), scores answers, and aggregates the three
// metrics; the language distribution is the mean over per-answer
// distributions.
EvalResult evaluate_model(const PolicyModel& model, const std::vector<Problem>& problems,
                          const PromptRenderer& renderer, const std::string& prompt_dialect,
                          const Vocabulary& vocab, const EvalConfig& cfg,
                          const DialectClassifier& clf);

// CSV with header "update,accuracy,notational_jargon,<dialect columns>".
std::string metrics_csv(const std::vector<MetricRecord>& records,
                        const std::vector<std::string>& dialect_names);

}  // namespace tandem
