#pragma once

// Synthetic arithmetic word problems in invented dialects.
//
// A problem is a chain of 1-3 single-digit steps ("plan"). Its question is
// rendered per dialect as a short narrative sentence plus the expression in
// shared digit/operator tokens, e.g.
//
//     anna keeps shells. count 8 + 1?
//
// The reference solution reduces the expression one step per line. Operands
// are spelled with dialect number words (so a reader needs the dialect to
// follow the working), results are digits, and the final answer repeats
// after the "####" marker:
//
//     first eight plus one = 9. #### 9
//
// With calculator spans enabled, every "=" is followed by a glued
// machine-readable annotation: "first eight plus one = <<8+1=9>> 9. #### 9"
// (shown here with ASCII brackets; the real marker tokens are U+27EA/U+27EB).
// In multi-step lines the not-yet-reduced tail of the expression trails the
// result: "first three plus four = 7 times two." means 3+4 gives 7 with
// "times two" still pending.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tandem/common.hpp"
#include "tandem/text.hpp"

namespace tandem {

// Marker surfaces shared by every dialect.
inline constexpr const char* kAnswerMarker = "####";
inline constexpr const char* kCalcOpen = "⟪";   // ⟪
inline constexpr const char* kCalcClose = "⟫";  // ⟫

enum class Op : uint8_t { Add = 0, Sub = 1, Mul = 2, Div = 3 };

char op_symbol(Op op);
std::optional<Op> op_from_symbol(char c);

struct PlanStep {
    Op op;
    int lhs = 0;  // running value entering the step (step 1: first operand)
    int rhs = 0;  // fresh operand
    int result() const;
};

struct Problem {
    int64_t id = 0;
    int difficulty = 1;  // number of plan steps, 1..3
    std::vector<PlanStep> plan;
    int ground_truth = 0;
    std::map<std::string, std::string> question_by_dialect;

    const std::string& question(const std::string& dialect) const;
};

// A dialect owns every content word it uses; only digits and the reserved
// operator/marker tokens are shared between dialects.
struct Dialect {
    std::string name;
    bool lingua_franca = false;
    std::array<std::string, 10> digit_words;
    std::array<std::string, 4> op_words;  // indexed by Op
    std::array<std::string, 3> ordinals;  // line openers, one per step
    std::array<std::string, 3> person_names;
    std::array<std::string, 3> nouns;
    std::array<std::string, 3> verbs;
    std::string ask_word;

    std::vector<std::string> content_words() const;
};

// Four built-in dialects; the first one is the designated lingua franca.
const std::vector<Dialect>& builtin_dialects();
const Dialect& dialect_by_name(const std::vector<Dialect>& dialects, const std::string& name);
const Dialect& lingua_franca(const std::vector<Dialect>& dialects);

// Throws ConfigError if any content word appears in two dialects.
void check_dialects_disjoint(const std::vector<Dialect>& dialects);

// Vocabulary covering digits, operators, markers, punctuation and every
// dialect content word. Deterministic token order.
Vocabulary build_task_vocabulary(const std::vector<Dialect>& dialects);

// Draws a plan whose running values all stay in 0..9 (division exact,
// subtraction nonnegative), then renders the question for every dialect.
// Deterministic given the generator state.
Problem generate_problem(Rng& rng, int difficulty, const std::vector<Dialect>& dialects);

// Weights for difficulties 1..3; sampling normalises internally.
struct DifficultyMix {
    double w1 = 0.5, w2 = 0.35, w3 = 0.15;
    int sample(Rng& rng) const;
};

std::vector<Problem> generate_problem_set(uint64_t seed, int count, const DifficultyMix& mix,
                                          const std::vector<Dialect>& dialects);

std::string render_solution(const Problem& p, const Dialect& d, bool with_jargon);

// Integer after the first "####" marker (optional sign, contiguous digits,
// leading spaces allowed). Anything else after it is ignored.
std::optional<int64_t> extract_answer(std::string_view text);

struct Annotation {
    std::string lhs;
    int64_t rhs = 0;
    bool valid = false;  // exact left-to-right evaluation of lhs equals rhs
};

// Parses the first calculator span in the fragment. Returns nullopt when no
// span opens, the span never closes, or it lacks an "lhs=rhs" shape.
std::optional<Annotation> parse_annotation(std::string_view fragment);

// 1 when the extracted answer equals the ground truth, else 0.
int verify(std::string_view answer_text, const Problem& p);

// ------------------------------------------------------------ corpora io --

// One rendered (question, solution) pair in one dialect; the on-disk corpus
// format is line-delimited JSON with exactly these fields.
struct CorpusRecord {
    int64_t id = 0;
    std::string dialect;
    std::string question;
    std::string solution;
    int64_t ground_truth = 0;
};

std::string serialize_corpus(const std::vector<CorpusRecord>& records);
std::vector<CorpusRecord> load_corpus(const std::filesystem::path& path);

// All structural problems found in the file, as (line number, reason) pairs.
// Checks JSON shape, field types, and that the solution's "####" integer
// matches the stored ground truth.
std::vector<std::pair<size_t, std::string>> validate_corpus(const std::filesystem::path& path);

// Full problems with every dialect rendering, used where both models need
// their own view of the same task.
std::string serialize_problems(const std::vector<Problem>& problems);
std::vector<Problem> load_problems(const std::filesystem::path& path);

// --------------------------------------------------------------- gsm8k io --

struct GsmRecord {
    std::string question;
    std::string answer;
    int64_t ground_truth = 0;
};

struct GsmLoadResult {
    std::vector<GsmRecord> records;
    std::vector<std::pair<size_t, std::string>> rejected;  // (line number, reason)
};

// Reads the public line-delimited question/answer format. Records whose
// answer lacks a parsable "####" integer are reported, not silently dropped.
GsmLoadResult load_gsm8k(const std::filesystem::path& path);

}  // namespace tandem
