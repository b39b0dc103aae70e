#include "tandem/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <set>

#include "tandem/tandem.hpp"

namespace tandem {

namespace {

// Multi-byte sequences stripped by the cleaner (UTF-8).
const std::string_view kStrippedSequences[] = {"⟪", "⟫", "×", "÷"};

bool is_stripped_char(char c) {
    if (c >= '0' && c <= '9') return true;
    switch (c) {
        case '#':
        case '=':
        case '+':
        case '-':
        case '*':
        case '<':
        case '>':
        case '/':
        case '$':
            return true;
        default:
            return false;
    }
}

}  // namespace

std::string clean_for_langid(std::string_view text) {
    std::string kept;
    kept.reserve(text.size());
    size_t i = 0;
    while (i < text.size()) {
        bool matched_seq = false;
        for (std::string_view seq : kStrippedSequences) {
            if (text.substr(i, seq.size()) == seq) {
                i += seq.size();
                matched_seq = true;
                break;
            }
        }
        if (matched_seq) continue;
        if (!is_stripped_char(text[i])) kept.push_back(text[i]);
        ++i;
    }
    return canonical_whitespace(kept);
}

double notational_jargon_rate(const std::vector<std::string>& answers) {
    if (answers.empty()) return 0.0;
    size_t with = 0;
    for (const std::string& a : answers) {
        if (a.find(kCalcOpen) != std::string::npos || a.find(kCalcClose) != std::string::npos)
            ++with;
    }
    return static_cast<double>(with) / static_cast<double>(answers.size());
}

DialectClassifier train_dialect_classifier(
    const std::map<std::string, std::vector<std::string>>& corpora) {
    if (corpora.size() < 2)
        throw InsufficientCorpusError("need at least two dialect corpora, got " +
                                      std::to_string(corpora.size()));

    std::map<std::string, std::map<std::string, int64_t>> counts;
    std::map<std::string, int64_t> totals;
    std::set<std::string> union_words;
    for (const auto& [dialect, texts] : corpora) {
        auto& table = counts[dialect];
        int64_t& total = totals[dialect];
        for (const std::string& text : texts) {
            for (const std::string& w : split_whitespace(clean_for_langid(text))) {
                ++table[w];
                ++total;
                union_words.insert(w);
            }
        }
        if (total < 100)
            throw InsufficientCorpusError("dialect '" + dialect + "' has only " +
                                          std::to_string(total) +
                                          " cleaned words; need at least 100");
    }

    DialectClassifier clf;
    for (const auto& [dialect, _] : corpora) clf.names_.push_back(dialect);
    const double u = static_cast<double>(union_words.size());
    for (const std::string& w : union_words) {
        std::vector<double> loglik;
        loglik.reserve(clf.names_.size());
        for (const std::string& dialect : clf.names_) {
            auto it = counts[dialect].find(w);
            double c = it == counts[dialect].end() ? 0.0 : static_cast<double>(it->second);
            loglik.push_back(std::log(c + 1.0) -
                             std::log(static_cast<double>(totals[dialect]) + u));
        }
        clf.word_loglik_.emplace(w, std::move(loglik));
    }
    return clf;
}

std::map<std::string, double> DialectClassifier::classify_window(
    const std::vector<std::string>& words) const {
    std::vector<double> logpost(names_.size(), 0.0);  // uniform prior cancels
    for (const std::string& w : words) {
        auto it = word_loglik_.find(w);
        if (it == word_loglik_.end()) continue;  // unknown everywhere: no evidence
        for (size_t d = 0; d < names_.size(); ++d) logpost[d] += it->second[d];
    }
    double m = logpost[0];
    for (double v : logpost) m = std::max(m, v);
    double sum = 0.0;
    for (double v : logpost) sum += std::exp(v - m);
    std::map<std::string, double> out;
    for (size_t d = 0; d < names_.size(); ++d)
        out[names_[d]] = std::exp(logpost[d] - m) / sum;
    return out;
}

std::vector<std::vector<std::string>> shingles(const std::vector<std::string>& words,
                                               int window) {
    if (window < 1) throw ConfigError("shingle window must be >= 1");
    std::vector<std::vector<std::string>> out;
    if (words.empty()) return out;
    const size_t w = static_cast<size_t>(window);
    const size_t n = words.size() >= w ? words.size() - w + 1 : 1;
    out.reserve(n);
    for (size_t s = 0; s < n; ++s) {
        size_t len = std::min(w, words.size() - s);
        out.emplace_back(words.begin() + static_cast<ptrdiff_t>(s),
                         words.begin() + static_cast<ptrdiff_t>(s + len));
    }
    return out;
}

std::map<std::string, double> language_distribution(std::string_view text,
                                                    const DialectClassifier& clf, int window) {
    std::vector<std::vector<std::string>> windows =
        shingles(split_whitespace(clean_for_langid(text)), window);
    std::map<std::string, double> mean;
    if (windows.empty()) {
        double p = 1.0 / static_cast<double>(clf.dialect_names().size());
        for (const std::string& d : clf.dialect_names()) mean[d] = p;
        return mean;
    }
    for (const std::string& d : clf.dialect_names()) mean[d] = 0.0;
    for (const auto& shingle : windows)
        for (const auto& [d, p] : clf.classify_window(shingle)) mean[d] += p;
    for (auto& [d, p] : mean) p /= static_cast<double>(windows.size());
    return mean;
}

EvalResult evaluate_model(const PolicyModel& model, const std::vector<Problem>& problems,
                          const PromptRenderer& renderer, const std::string& prompt_dialect,
                          const Vocabulary& vocab, const EvalConfig& cfg,
                          const DialectClassifier& clf) {
    EvalResult result;
    Rng rng(splitmix64(cfg.seed));
    std::map<std::string, double> lang_sum;
    for (const std::string& d : clf.dialect_names()) lang_sum[d] = 0.0;
    size_t correct = 0;
    for (const Problem& p : problems) {
        std::vector<TokenId> prompt = renderer.render(vocab, p.question(prompt_dialect));
        std::vector<TokenId> out =
            solo_decode(model, prompt, cfg.temperature, cfg.max_output_tokens, rng);
        std::string answer = detokenize(out, vocab);
        correct += static_cast<size_t>(verify(answer, p));
        for (const auto& [d, prob] : language_distribution(answer, clf)) lang_sum[d] += prob;
        result.answers.push_back(std::move(answer));
    }
    if (problems.empty()) {
        result.record.language_distribution = language_distribution("", clf);
        return result;
    }
    const double n = static_cast<double>(problems.size());
    result.record.accuracy = static_cast<double>(correct) / n;
    result.record.notational_jargon = notational_jargon_rate(result.answers);
    for (auto& [d, s] : lang_sum) result.record.language_distribution[d] = s / n;
    return result;
}

std::string metrics_csv(const std::vector<MetricRecord>& records,
                        const std::vector<std::string>& dialect_names) {
    std::string out = "update,accuracy,notational_jargon";
    for (const std::string& d : dialect_names) out += "," + d;
    out += "\n";
    char buf[64];
    for (const MetricRecord& r : records) {
        out += std::to_string(r.update);
        auto append = [&](double v) {
            std::snprintf(buf, sizeof buf, ",%.6f", v);
            out += buf;
        };
        append(r.accuracy);
        append(r.notational_jargon);
        for (const std::string& d : dialect_names) {
            auto it = r.language_distribution.find(d);
            append(it == r.language_distribution.end() ? 0.0 : it->second);
        }
        out += "\n";
    }
    return out;
}

}  // namespace tandem
