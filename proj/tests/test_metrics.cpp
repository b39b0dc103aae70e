#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "tandem/metrics.hpp"
#include "tandem/tasks.hpp"
#include "tandem/train.hpp"

using namespace tandem;

namespace {

// Classifier trained on plain renderings of the built-in dialects.
DialectClassifier builtin_classifier() {
    const auto& dialects = builtin_dialects();
    auto problems = generate_problem_set(1234, 120, DifficultyMix{}, dialects);
    std::map<std::string, std::vector<std::string>> corpora;
    for (const Dialect& d : dialects) {
        auto& texts = corpora[d.name];
        for (const Problem& p : problems) {
            texts.push_back(render_solution(p, d, false));
            texts.push_back(p.question(d.name));
        }
    }
    return train_dialect_classifier(corpora);
}

double distribution_sum(const std::map<std::string, double>& dist) {
    double s = 0.0;
    for (const auto& [d, p] : dist) s += p;
    return s;
}

// n random dialect words, whitespace-joined.
std::string dialect_text(const Dialect& d, int n, Rng& rng) {
    std::vector<std::string> words = d.content_words();
    std::string out;
    for (int i = 0; i < n; ++i) {
        if (i) out += ' ';
        out += words[static_cast<size_t>(uniform_int(rng, 0, static_cast<int64_t>(words.size()) - 1))];
    }
    return out;
}

}  // namespace

TEST_CASE("the cleaner strips notation and is idempotent") {
    SUBCASE("digits, operators and calculator brackets disappear") {
        CHECK(clean_for_langid("a ⟪8+6=14⟫ b") == "a b");
        CHECK(clean_for_langid("$14 / $2 = 7") == "");
        CHECK(clean_for_langid("3 × 4 ÷ 2") == "");
        CHECK(clean_for_langid("#### 7") == "");
        CHECK(clean_for_langid("first eight plus one = ⟪8+1=9⟫ 9. #### 9") ==
              "first eight plus one .");
        CHECK(clean_for_langid("x3y < z>") == "xy z");
    }

    SUBCASE("whitespace collapses") {
        CHECK(clean_for_langid("  a   b\tc\n") == "a b c");
    }

    SUBCASE("idempotent on rendered solutions") {
        const auto& dialects = builtin_dialects();
        for (const Problem& p : generate_problem_set(9, 40, DifficultyMix{}, dialects)) {
            for (const Dialect& d : dialects) {
                std::string cleaned = clean_for_langid(render_solution(p, d, true));
                CHECK(clean_for_langid(cleaned) == cleaned);
            }
        }
    }
}

TEST_CASE("notational jargon rate counts answers containing calculator brackets") {
    CHECK(notational_jargon_rate({}) == 0.0);
    std::vector<std::string> answers = {
        "first eight plus one = ⟪8+1=9⟫ 9. #### 9",
        "first eight plus one = 9. #### 9",
        "broken output ⟫ tail",
        "plain again. #### 3",
    };
    CHECK(notational_jargon_rate(answers) == doctest::Approx(0.5));
}

TEST_CASE("shingling follows the stride-1 window law") {
    Rng rng(2718);
    const auto& dialects = builtin_dialects();

    SUBCASE("n - window + 1 shingles for long texts") {
        for (int trial = 0; trial < 100; ++trial) {
            int n = static_cast<int>(uniform_int(rng, 8, 60));
            const Dialect& d = dialects[static_cast<size_t>(uniform_int(rng, 0, 3))];
            std::vector<std::string> words =
                split_whitespace(clean_for_langid(dialect_text(d, n, rng)));
            REQUIRE(static_cast<int>(words.size()) == n);
            auto s = shingles(words);
            CHECK(s.size() == static_cast<size_t>(n - kShingleWindow + 1));
            for (const auto& w : s) CHECK(w.size() == static_cast<size_t>(kShingleWindow));
        }
    }

    SUBCASE("short texts form one whole-text shingle") {
        for (int n = 1; n < kShingleWindow; ++n) {
            std::vector<std::string> words(static_cast<size_t>(n), "word");
            auto s = shingles(words);
            REQUIRE(s.size() == 1);
            CHECK(s[0].size() == static_cast<size_t>(n));
        }
        CHECK(shingles({}).empty());
    }
}

TEST_CASE("language distributions are proper probability vectors") {
    DialectClassifier clf = builtin_classifier();
    Rng rng(31415);
    const auto& dialects = builtin_dialects();

    std::vector<std::string> texts = {"", "one", "unrelatedword another"};
    for (int trial = 0; trial < 40; ++trial) {
        int n = static_cast<int>(uniform_int(rng, 1, 40));
        const Dialect& a = dialects[static_cast<size_t>(uniform_int(rng, 0, 3))];
        const Dialect& b = dialects[static_cast<size_t>(uniform_int(rng, 0, 3))];
        texts.push_back(dialect_text(a, n, rng) + " " + dialect_text(b, n, rng));
    }
    for (const std::string& text : texts) {
        CAPTURE(text);
        auto dist = language_distribution(text, clf);
        CHECK(dist.size() == clf.dialect_names().size());
        CHECK(std::abs(distribution_sum(dist) - 1.0) <= 1e-9);
        for (const auto& [d, p] : dist) {
            CHECK(p >= 0.0);
            CHECK(p <= 1.0);
        }
    }
}

TEST_CASE("pure-dialect text is attributed to its dialect") {
    DialectClassifier clf = builtin_classifier();
    Rng rng(999);
    for (const Dialect& d : builtin_dialects()) {
        for (int trial = 0; trial < 5; ++trial) {
            std::string text = dialect_text(d, 50, rng);
            auto dist = language_distribution(text, clf);
            CAPTURE(d.name);
            CAPTURE(trial);
            CHECK(dist.at(d.name) >= 0.9);
        }
    }
}

TEST_CASE("text unknown to every dialect yields the exact uniform distribution") {
    DialectClassifier clf = builtin_classifier();
    auto dist = language_distribution("zzz qqq www", clf);
    const double uniform = 1.0 / static_cast<double>(clf.dialect_names().size());
    for (const auto& [d, p] : dist) CHECK(p == doctest::Approx(uniform).epsilon(1e-12));

    auto window = clf.classify_window({"zzz", "qqq"});
    for (const auto& [d, p] : window) CHECK(p == uniform);
}

TEST_CASE("classifier training validates its corpus") {
    SUBCASE("fewer than two dialects") {
        std::map<std::string, std::vector<std::string>> one;
        one["only"] = {"some words repeated enough times to clear the floor"};
        CHECK_THROWS_AS(train_dialect_classifier(one), InsufficientCorpusError);
    }

    SUBCASE("a dialect with too few cleaned words") {
        std::map<std::string, std::vector<std::string>> corpora;
        std::string filler;
        for (int i = 0; i < 120; ++i) filler += "padword ";
        corpora["big"] = {filler};
        corpora["small"] = {"just 1 2 3 4 5"};  // digits clean away
        CHECK_THROWS_AS(train_dialect_classifier(corpora), InsufficientCorpusError);
    }
}

TEST_CASE("mixed text splits its mass between the contributing dialects") {
    DialectClassifier clf = builtin_classifier();
    Rng rng(5150);
    const auto& dialects = builtin_dialects();
    std::string mixed = dialect_text(dialects[0], 30, rng) + " " +
                        dialect_text(dialects[1], 30, rng);
    auto dist = language_distribution(mixed, clf);
    CHECK(dist.at(dialects[0].name) > 0.25);
    CHECK(dist.at(dialects[1].name) > 0.25);
    CHECK(dist.at(dialects[2].name) < 0.2);
    CHECK(dist.at(dialects[3].name) < 0.2);
}

TEST_CASE("metrics rows serialize with fixed precision and stable columns") {
    MetricRecord r;
    r.update = 40;
    r.accuracy = 0.5;
    r.notational_jargon = 1.0 / 3.0;
    r.language_distribution = {{"avon", 0.75}, {"brisk", 0.25}};
    std::string csv = metrics_csv({r}, {"avon", "brisk"});
    CHECK(csv ==
          "update,accuracy,notational_jargon,avon,brisk\n"
          "40,0.500000,0.333333,0.750000,0.250000\n");
}

TEST_CASE("solo evaluation scores a scripted model sensibly") {
    const auto& dialects = builtin_dialects();
    Vocabulary vocab = build_task_vocabulary(dialects);
    auto problems = generate_problem_set(77, 3, DifficultyMix{1.0, 0.0, 0.0}, dialects);
    DialectClassifier clf = builtin_classifier();

    // an untrained model emits near-uniform noise: expect zero accuracy and a
    // full, normalised language distribution
    PolicyModel model(vocab, ModelConfig{8, 4, 8}, 3);
    PromptRenderer plain;
    EvalConfig cfg;
    cfg.max_output_tokens = 12;
    EvalResult result = evaluate_model(model, problems, plain, "avon", vocab, cfg, clf);
    CHECK(result.answers.size() == problems.size());
    CHECK(result.record.accuracy == 0.0);
    CHECK(std::abs(distribution_sum(result.record.language_distribution) - 1.0) <= 1e-9);

    SUBCASE("no problems still yields a proper distribution") {
        EvalResult empty = evaluate_model(model, {}, plain, "avon", vocab, cfg, clf);
        CHECK(empty.record.accuracy == 0.0);
        CHECK(std::abs(distribution_sum(empty.record.language_distribution) - 1.0) <= 1e-9);
    }
}

TEST_CASE("aggregate metrics do not depend on problem order") {
    const auto& dialects = builtin_dialects();
    Vocabulary vocab = build_task_vocabulary(dialects);
    auto problems = generate_problem_set(88, 40, DifficultyMix{1.0, 0.0, 0.0}, dialects);
    DialectClassifier clf = builtin_classifier();

    // a briefly pretrained model, so the answers carry real content
    std::vector<CorpusRecord> corpus;
    for (const Problem& p : problems) {
        CorpusRecord r;
        r.id = p.id;
        r.dialect = "avon";
        r.question = p.question("avon");
        r.solution = render_solution(p, dialects.front(), false);
        r.ground_truth = p.ground_truth;
        corpus.push_back(std::move(r));
    }
    PromptRenderer plain;
    PolicyModel model(vocab, ModelConfig{12, 12, 32}, 4);
    pretrain_supervised(model, build_pretrain_examples(corpus, plain, vocab), 40, 1.0, 9);

    EvalConfig cfg;
    cfg.max_output_tokens = 24;
    EvalResult forward = evaluate_model(model, problems, plain, "avon", vocab, cfg, clf);
    std::reverse(problems.begin(), problems.end());
    EvalResult reversed = evaluate_model(model, problems, plain, "avon", vocab, cfg, clf);

    CHECK(forward.record.accuracy == reversed.record.accuracy);
    CHECK(forward.record.notational_jargon == doctest::Approx(reversed.record.notational_jargon));
    for (const auto& [name, mass] : forward.record.language_distribution)
        CHECK(mass == doctest::Approx(reversed.record.language_distribution.at(name)).epsilon(1e-12));
}
