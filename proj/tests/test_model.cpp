#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <map>
#include <vector>

#include "tandem/model.hpp"
#include "tandem/text.hpp"

using namespace tandem;

namespace {

// Small vocabulary (well under 50 tokens) so finite differences over every
// parameter stay cheap.
Vocabulary tiny_vocab() {
    std::vector<TokenInfo> tokens;
    for (const char* w : {"a", "b", "c", "d", "e", "f", "g", "h"})
        tokens.push_back({w, false, false});
    tokens.push_back({".", true, true});
    tokens.push_back({"s", true, false});
    return Vocabulary::build(tokens);
}

// serialize() layout: magic u64, version u32, vocab hash u64, four i32 dims,
// one frozen byte, then the parameter tensors as raw doubles, then a trailing
// u64 checksum. The tests below read and patch the double region directly.
constexpr size_t kHeaderBytes = 8 + 4 + 8 + 4 * 4 + 1;

std::vector<double> params_of(const PolicyModel& m) {
    std::string blob = m.serialize();
    REQUIRE(blob.size() == kHeaderBytes + m.param_count() * 8 + 8);
    std::vector<double> out(m.param_count());
    std::memcpy(out.data(), blob.data() + kHeaderBytes, out.size() * 8);
    return out;
}

PolicyModel with_param(const PolicyModel& m, const Vocabulary& vocab, size_t index,
                       double value) {
    std::string blob = m.serialize();
    std::memcpy(blob.data() + kHeaderBytes + index * 8, &value, 8);
    uint64_t sum = fnv1a64(std::string_view(blob).substr(0, blob.size() - 8));
    std::memcpy(blob.data() + blob.size() - 8, &sum, 8);
    return PolicyModel::deserialize(blob, vocab);
}

PolicyModel clone(const PolicyModel& m, const Vocabulary& vocab) {
    return PolicyModel::deserialize(m.serialize(), vocab);
}

// A few ascent steps on arbitrary targets so the output layer leaves its
// all-zero initialization before gradient checks.
void warm_up(PolicyModel& m, uint64_t seed) {
    Rng rng(splitmix64(seed));
    std::vector<TokenId> history;
    for (int step = 0; step < 12; ++step) {
        TokenId target = static_cast<TokenId>(uniform_int(rng, 0, m.vocab_size() - 1));
        m.accumulate_log_prob_grad(history, target, step % 3 == 0 ? -0.5 : 1.0);
        m.apply_sgd(0.3);
        history.push_back(target);
        if (history.size() > 6) history.erase(history.begin());
    }
}

struct GradCase {
    std::vector<TokenId> prompt;
    std::vector<TokenId> completion;
    std::vector<double> weights;  // one per completion position
};

double weighted_ll(const PolicyModel& m, const GradCase& c) {
    std::vector<TokenId> history = c.prompt;
    double total = 0.0;
    for (size_t k = 0; k < c.completion.size(); ++k) {
        total += c.weights[k] * m.token_log_prob(history, c.completion[k]);
        history.push_back(c.completion[k]);
    }
    return total;
}

std::vector<double> analytic_grad(const PolicyModel& m, const Vocabulary& vocab,
                                  const GradCase& c) {
    PolicyModel work = clone(m, vocab);
    std::vector<double> before = params_of(work);
    std::vector<TokenId> history = c.prompt;
    for (size_t k = 0; k < c.completion.size(); ++k) {
        if (c.weights[k] != 0.0)
            work.accumulate_log_prob_grad(history, c.completion[k], c.weights[k]);
        history.push_back(c.completion[k]);
    }
    work.apply_sgd(1.0);  // theta' = theta + grad, so the difference is the gradient
    std::vector<double> after = params_of(work);
    std::vector<double> g(before.size());
    for (size_t i = 0; i < g.size(); ++i) g[i] = after[i] - before[i];
    return g;
}

}  // namespace

TEST_CASE("a fresh model predicts the uniform distribution") {
    Vocabulary vocab = tiny_vocab();
    PolicyModel m(vocab, ModelConfig{4, 5, 7}, 42);
    auto lp = m.log_softmax(std::vector<TokenId>{3, 4});
    REQUIRE(static_cast<int>(lp.size()) == vocab.size());
    const double expected = -std::log(static_cast<double>(vocab.size()));
    for (double v : lp) CHECK(v == doctest::Approx(expected).epsilon(1e-12));

    // all logits tie, so the zero-temperature argmax resolves to the lowest id
    Rng rng(1);
    CHECK(m.sample_next(std::vector<TokenId>{3, 4}, 0.0, rng) == 0);
}

TEST_CASE("only the trailing context window affects the prediction") {
    Vocabulary vocab = tiny_vocab();
    PolicyModel m(vocab, ModelConfig{4, 5, 7}, 7);
    warm_up(m, 99);
    std::vector<TokenId> long_history = {3, 4, 5, 6, 7, 8, 9, 3, 4, 5};
    std::vector<TokenId> suffix(long_history.end() - 4, long_history.end());
    auto a = m.logits(long_history);
    auto b = m.logits(suffix);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("log probabilities are consistent across the query surfaces") {
    Vocabulary vocab = tiny_vocab();
    PolicyModel m(vocab, ModelConfig{4, 5, 7}, 7);
    warm_up(m, 5);
    std::vector<TokenId> prompt = {3, 4, 5};
    std::vector<TokenId> completion = {6, 7, 1};

    auto lp = m.log_softmax(prompt);
    CHECK(m.token_log_prob(prompt, 6) == doctest::Approx(lp[6]).epsilon(1e-15));

    double manual = 0.0;
    std::vector<TokenId> history = prompt;
    for (TokenId t : completion) {
        manual += m.token_log_prob(history, t);
        history.push_back(t);
    }
    CHECK(m.sequence_log_likelihood(prompt, completion) ==
          doctest::Approx(manual).epsilon(1e-12));

    // probabilities normalise
    double sum = 0.0;
    for (double v : lp) sum += std::exp(v);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("zero temperature is deterministic and consumes no randomness") {
    Vocabulary vocab = tiny_vocab();
    PolicyModel m(vocab, ModelConfig{4, 5, 7}, 11);
    warm_up(m, 3);
    std::vector<TokenId> history = {5, 6};
    Rng rng(1234), untouched(1234);
    TokenId first = m.sample_next(history, 0.0, rng);
    CHECK(rng == untouched);
    CHECK(m.sample_next(history, 0.0, rng) == first);

    auto l = m.logits(history);
    TokenId best = 0;
    for (size_t i = 1; i < l.size(); ++i)
        if (l[i] > l[static_cast<size_t>(best)]) best = static_cast<TokenId>(i);
    CHECK(first == best);
}

TEST_CASE("sampling frequencies track the softmax distribution") {
    Vocabulary vocab = tiny_vocab();
    PolicyModel m(vocab, ModelConfig{4, 5, 7}, 13);
    warm_up(m, 17);
    std::vector<TokenId> history = {3, 4};
    auto lp = m.log_softmax(history);

    const int n = 20000;
    std::vector<int> counts(lp.size(), 0);
    Rng rng(777);
    for (int i = 0; i < n; ++i) ++counts[static_cast<size_t>(m.sample_next(history, 1.0, rng))];

    // every token's empirical frequency within 3 sigma of its probability
    for (size_t t = 0; t < lp.size(); ++t) {
        double p = std::exp(lp[t]);
        double freq = static_cast<double>(counts[t]) / n;
        double sigma = std::sqrt(p * (1.0 - p) / n);
        CAPTURE(t);
        CAPTURE(p);
        CAPTURE(freq);
        CHECK(std::abs(freq - p) <= 3.0 * sigma + 1e-9);
    }
}

TEST_CASE("low temperature sharpens towards the argmax") {
    Vocabulary vocab = tiny_vocab();
    PolicyModel m(vocab, ModelConfig{4, 5, 7}, 29);
    warm_up(m, 31);
    std::vector<TokenId> history = {7, 8};
    Rng rng(5);
    TokenId best = m.sample_next(history, 0.0, rng);
    for (int i = 0; i < 100; ++i) CHECK(m.sample_next(history, 0.01, rng) == best);
}

TEST_CASE("analytic gradients match central finite differences") {
    Vocabulary vocab = tiny_vocab();
    REQUIRE(vocab.size() <= 50);
    PolicyModel m(vocab, ModelConfig{4, 5, 7}, 101);
    warm_up(m, 55);

    // (sequence, weight-mask) cases; zero weights mimic masking out the
    // other author's positions
    std::vector<GradCase> cases = {
        {{3, 4, 5}, {6}, {1.0}},
        {{3, 4, 5, 6}, {7, 8, 9, 1}, {1.0, 1.0, 1.0, 1.0}},
        {{3}, {4, 5, 6, 7}, {1.0, 0.0, 1.0, 0.0}},   // alternating mask
        {{}, {5, 6, 7}, {0.0, 0.0, 0.5}},            // short history hits padding
        {{8, 9, 3, 4, 5, 6}, {7, 8}, {0.25, 2.0}},   // window overflow + scaling
        {{4, 4, 4}, {4, 4, 1}, {1.0, 1.0, 1.0}},     // repeated token
    };
    REQUIRE(cases.size() >= 5);

    const double h = 1e-4;
    for (size_t ci = 0; ci < cases.size(); ++ci) {
        const GradCase& c = cases[ci];
        std::vector<double> g = analytic_grad(m, vocab, c);
        std::vector<double> theta = params_of(m);
        double worst = 0.0;
        for (size_t i = 0; i < theta.size(); ++i) {
            double up = weighted_ll(with_param(m, vocab, i, theta[i] + h), c);
            double down = weighted_ll(with_param(m, vocab, i, theta[i] - h), c);
            double fd = (up - down) / (2.0 * h);
            double rel = std::abs(g[i] - fd) / std::max(std::abs(g[i]) + std::abs(fd), 1e-3);
            worst = std::max(worst, rel);
        }
        CAPTURE(ci);
        CAPTURE(worst);
        CHECK(worst < 1e-4);
    }
}

TEST_CASE("gradient accumulation is linear in the weight and resettable") {
    Vocabulary vocab = tiny_vocab();
    PolicyModel m(vocab, ModelConfig{4, 5, 7}, 19);
    warm_up(m, 23);
    GradCase c{{3, 4}, {5, 6}, {1.0, 1.0}};
    GradCase doubled{{3, 4}, {5, 6}, {2.0, 2.0}};
    auto g1 = analytic_grad(m, vocab, c);
    auto g2 = analytic_grad(m, vocab, doubled);
    for (size_t i = 0; i < g1.size(); ++i)
        CHECK(g2[i] == doctest::Approx(2.0 * g1[i]).epsilon(1e-9));

    PolicyModel work = clone(m, vocab);
    CHECK(work.grad_norm() == 0.0);
    work.accumulate_log_prob_grad(c.prompt, 5, 1.0);
    CHECK(work.grad_norm() > 0.0);
    work.zero_grad();
    CHECK(work.grad_norm() == 0.0);
}

TEST_CASE("one ascent step raises the reinforced token's probability") {
    Vocabulary vocab = tiny_vocab();
    PolicyModel m(vocab, ModelConfig{4, 5, 7}, 37);
    warm_up(m, 41);
    std::vector<TokenId> history = {3, 4, 5};
    double before = m.token_log_prob(history, 8);
    m.accumulate_log_prob_grad(history, 8, 1.0);
    m.apply_sgd(1e-3);
    CHECK(m.token_log_prob(history, 8) > before);
}

TEST_CASE("applying a step with an empty accumulator changes nothing") {
    Vocabulary vocab = tiny_vocab();
    PolicyModel m(vocab, ModelConfig{4, 5, 7}, 43);
    warm_up(m, 47);
    uint64_t before = m.params_hash();
    m.apply_sgd(0.5);
    CHECK(m.params_hash() == before);
}

TEST_CASE("frozen models refuse gradient operations but still predict") {
    Vocabulary vocab = tiny_vocab();
    PolicyModel m(vocab, ModelConfig{4, 5, 7}, 53);
    m.set_frozen(true);
    CHECK_THROWS_AS(m.accumulate_log_prob_grad(std::vector<TokenId>{3}, 4, 1.0),
                    FrozenModelError);
    CHECK_THROWS_AS(m.apply_sgd(0.1), FrozenModelError);
    CHECK_NOTHROW(m.log_softmax(std::vector<TokenId>{3}));
}

TEST_CASE("serialization round trips bit-exactly") {
    Vocabulary vocab = tiny_vocab();
    PolicyModel m(vocab, ModelConfig{4, 5, 7}, 59);
    warm_up(m, 61);
    m.set_frozen(true);

    PolicyModel copy = PolicyModel::deserialize(m.serialize(), vocab);
    CHECK(copy.params_hash() == m.params_hash());
    CHECK(copy.frozen());
    std::vector<TokenId> history = {5, 6, 7};
    auto a = m.logits(history);
    auto b = copy.logits(history);
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);

    SUBCASE("file round trip") {
        auto path = std::filesystem::temp_directory_path() / "tandem_model_roundtrip.bin";
        m.save(path);
        PolicyModel loaded = PolicyModel::load(path, vocab);
        CHECK(loaded.params_hash() == m.params_hash());
        std::filesystem::remove(path);
    }

    SUBCASE("corruption is detected") {
        std::string blob = m.serialize();
        blob[kHeaderBytes + 3] ^= 0x40;
        CHECK_THROWS_AS(PolicyModel::deserialize(blob, vocab), IoError);
    }

    SUBCASE("a different vocabulary is rejected") {
        std::vector<TokenInfo> other_tokens = {{"x", false, false}, {"y", false, false}};
        Vocabulary other = Vocabulary::build(other_tokens);
        CHECK_THROWS_AS(PolicyModel::deserialize(m.serialize(), other), ConfigError);
    }
}

TEST_CASE("parameter count matches the architecture") {
    Vocabulary vocab = tiny_vocab();
    ModelConfig mc{4, 5, 7};
    PolicyModel m(vocab, mc, 67);
    const size_t v = static_cast<size_t>(vocab.size());
    const size_t expected = v * 5 + 7 * (4 * 5) + 7 + v * 7 + v;
    CHECK(m.param_count() == expected);
}

TEST_CASE("prompt rendering joins preamble, demos and question") {
    PromptRenderer r;
    r.preamble = "solve the task";
    r.demos = {{"count 1 + 1?", "first one plus one = 2. #### 2"}};
    CHECK(r.render_text("count 2 + 2?") ==
          "solve the task count 1 + 1? first one plus one = 2. #### 2 count 2 + 2?");

    PromptRenderer plain;
    CHECK(plain.render_text("count 2 + 2?") == "count 2 + 2?");
}
