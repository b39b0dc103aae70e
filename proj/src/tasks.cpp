#include "tandem/tasks.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include <json.hpp>

namespace tandem {

using nlohmann::json;

char op_symbol(Op op) {
    switch (op) {
        case Op::Add: return '+';
        case Op::Sub: return '-';
        case Op::Mul: return '*';
        case Op::Div: return '/';
    }
    return '?';
}

std::optional<Op> op_from_symbol(char c) {
    switch (c) {
        case '+': return Op::Add;
        case '-': return Op::Sub;
        case '*': return Op::Mul;
        case '/': return Op::Div;
    }
    return std::nullopt;
}

int PlanStep::result() const {
    switch (op) {
        case Op::Add: return lhs + rhs;
        case Op::Sub: return lhs - rhs;
        case Op::Mul: return lhs * rhs;
        case Op::Div: return lhs / rhs;
    }
    return 0;
}

const std::string& Problem::question(const std::string& dialect) const {
    auto it = question_by_dialect.find(dialect);
    if (it == question_by_dialect.end()) throw MissingDialectError(dialect);
    return it->second;
}

const std::vector<Dialect>& builtin_dialects() {
    static const std::vector<Dialect> dialects = [] {
        std::vector<Dialect> v;
        v.push_back({"avon",
                     true,
                     {"zero", "one", "two", "three", "four", "five", "six", "seven", "eight",
                      "nine"},
                     {"plus", "minus", "times", "split"},
                     {"first", "then", "lastly"},
                     {"anna", "bruno", "clara"},
                     {"apples", "coins", "shells"},
                     {"keeps", "finds", "trades"},
                     "count"});
        v.push_back({"brisk",
                     false,
                     {"nulla", "eins", "duo", "trio", "quade", "penta", "hexa", "septa", "octa",
                      "nona"},
                     {"adda", "suba", "mula", "diva"},
                     {"primo", "secundo", "tertio"},
                     {"mira", "tomas", "lena"},
                     {"plums", "stones", "cards"},
                     {"holds", "gets", "swaps"},
                     "tally"});
        v.push_back({"corin",
                     false,
                     {"zim", "yon", "dex", "tov", "kel", "mur", "pia", "sol", "vek", "rud"},
                     {"join", "drop", "fold", "cut"},
                     {"alpha", "beta", "gamma"},
                     {"ivo", "nadia", "pell"},
                     {"beads", "acorns", "ribbons"},
                     {"stores", "wins", "lends"},
                     "reckon"});
        v.push_back({"dunmal",
                     false,
                     {"og", "iz", "ul", "eshk", "ara", "vun", "tol", "imba", "ker", "yuz"},
                     {"gana", "tira", "bura", "sava"},
                     {"unda", "midda", "enda"},
                     {"rok", "suma", "tev"},
                     {"nuts", "amber", "feathers"},
                     {"carries", "earns", "barters"},
                     "sum"});
        check_dialects_disjoint(v);
        return v;
    }();
    return dialects;
}

std::vector<std::string> Dialect::content_words() const {
    std::vector<std::string> out;
    out.insert(out.end(), digit_words.begin(), digit_words.end());
    out.insert(out.end(), op_words.begin(), op_words.end());
    out.insert(out.end(), ordinals.begin(), ordinals.end());
    out.insert(out.end(), person_names.begin(), person_names.end());
    out.insert(out.end(), nouns.begin(), nouns.end());
    out.insert(out.end(), verbs.begin(), verbs.end());
    out.push_back(ask_word);
    return out;
}

const Dialect& dialect_by_name(const std::vector<Dialect>& dialects, const std::string& name) {
    for (const Dialect& d : dialects)
        if (d.name == name) return d;
    throw ConfigError("unknown dialect '" + name + "'");
}

const Dialect& lingua_franca(const std::vector<Dialect>& dialects) {
    for (const Dialect& d : dialects)
        if (d.lingua_franca) return d;
    throw ConfigError("no lingua-franca dialect configured");
}

void check_dialects_disjoint(const std::vector<Dialect>& dialects) {
    static const std::set<std::string> shared = {
        "0", "1", "2", "3", "4", "5", "6", "7", "8", "9", "+",         "-",
        "*", "/", "=", ".", "?", "####", kCalcOpen, kCalcClose};
    std::map<std::string, std::string> owner;
    int lf_count = 0;
    for (const Dialect& d : dialects) {
        if (d.lingua_franca) ++lf_count;
        std::set<std::string> seen;
        for (const std::string& w : d.content_words()) {
            if (shared.count(w))
                throw ConfigError("dialect " + d.name + " reuses reserved surface '" + w + "'");
            if (!seen.insert(w).second)
                throw ConfigError("dialect " + d.name + " repeats word '" + w + "'");
            auto [it, inserted] = owner.emplace(w, d.name);
            if (!inserted)
                throw ConfigError("word '" + w + "' appears in dialects " + it->second + " and " +
                                  d.name);
        }
    }
    if (lf_count != 1) throw ConfigError("exactly one lingua-franca dialect required");
}

Vocabulary build_task_vocabulary(const std::vector<Dialect>& dialects) {
    check_dialects_disjoint(dialects);
    std::vector<TokenInfo> toks;
    for (char c = '0'; c <= '9'; ++c) toks.push_back({std::string(1, c), false, false});
    for (char c = '0'; c <= '9'; ++c) toks.push_back({std::string(1, c), true, false});
    for (char c : std::string("+-*/")) toks.push_back({std::string(1, c), false, false});
    for (char c : std::string("+-*/")) toks.push_back({std::string(1, c), true, false});
    toks.push_back({"=", false, false});
    toks.push_back({"=", true, false});
    toks.push_back({kAnswerMarker, false, false});
    toks.push_back({kCalcOpen, false, false});
    toks.push_back({kCalcClose, true, false});
    toks.push_back({".", true, true});
    toks.push_back({"?", true, true});
    for (const Dialect& d : dialects)
        for (const std::string& w : d.content_words()) toks.push_back({w, false, false});
    return Vocabulary::build(toks);
}

namespace {

// Spell a nonnegative value with dialect number words, one word per digit.
void append_value_words(std::vector<std::string>& words, int value, const Dialect& d) {
    for (char c : std::to_string(value)) words.push_back(d.digit_words[static_cast<size_t>(c - '0')]);
}

std::string expression_text(const Problem& p) {
    std::string expr = std::to_string(p.plan[0].lhs);
    for (const PlanStep& s : p.plan) {
        expr += ' ';
        expr += op_symbol(s.op);
        expr += ' ';
        expr += std::to_string(s.rhs);
    }
    return expr;
}

std::string render_question(const Problem& p, const Dialect& d, int name_i, int verb_i,
                            int noun_i) {
    std::string q = d.person_names[static_cast<size_t>(name_i)] + " " +
                    d.verbs[static_cast<size_t>(verb_i)] + " " +
                    d.nouns[static_cast<size_t>(noun_i)] + ". " + d.ask_word + " " +
                    expression_text(p) + "?";
    return q;
}

}  // namespace

Problem generate_problem(Rng& rng, int difficulty, const std::vector<Dialect>& dialects) {
    if (difficulty < 1 || difficulty > 3) throw ConfigError("difficulty must be 1..3");
    for (int attempt = 0; attempt < 1000; ++attempt) {
        std::vector<PlanStep> plan;
        int v = static_cast<int>(uniform_int(rng, 1, 9));
        bool ok = true;
        for (int k = 0; k < difficulty; ++k) {
            Op op = static_cast<Op>(uniform_int(rng, 0, 3));
            int rhs = static_cast<int>(uniform_int(rng, 1, 9));
            int r;
            switch (op) {
                case Op::Add: r = v + rhs; break;
                case Op::Sub: r = v - rhs; break;
                case Op::Mul: r = v * rhs; break;
                case Op::Div:
                    if (v % rhs != 0) { ok = false; }
                    r = ok ? v / rhs : 0;
                    break;
            }
            if (!ok || r < 0 || r > 9) {
                ok = false;
                break;
            }
            plan.push_back({op, v, rhs});
            v = r;
        }
        if (!ok) continue;
        Problem p;
        p.difficulty = difficulty;
        p.plan = std::move(plan);
        p.ground_truth = v;
        int name_i = static_cast<int>(uniform_int(rng, 0, 2));
        int verb_i = static_cast<int>(uniform_int(rng, 0, 2));
        int noun_i = static_cast<int>(uniform_int(rng, 0, 2));
        for (const Dialect& d : dialects)
            p.question_by_dialect[d.name] = render_question(p, d, name_i, verb_i, noun_i);
        return p;
    }
    throw std::logic_error("plan sampling failed to converge");  // not reachable in practice
}

int DifficultyMix::sample(Rng& rng) const {
    double total = w1 + w2 + w3;
    if (total <= 0) throw ConfigError("difficulty mix weights must be positive");
    double u = uniform_unit(rng) * total;
    if (u < w1) return 1;
    if (u < w1 + w2) return 2;
    return 3;
}

std::vector<Problem> generate_problem_set(uint64_t seed, int count, const DifficultyMix& mix,
                                          const std::vector<Dialect>& dialects) {
    Rng rng(splitmix64(seed));
    std::vector<Problem> out;
    out.reserve(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i) {
        Problem p = generate_problem(rng, mix.sample(rng), dialects);
        p.id = i;
        out.push_back(std::move(p));
    }
    return out;
}

std::string render_solution(const Problem& p, const Dialect& d, bool with_jargon) {
    std::vector<std::string> words;
    for (size_t k = 0; k < p.plan.size(); ++k) {
        const PlanStep& step = p.plan[k];
        const int r = step.result();
        words.push_back(d.ordinals[std::min<size_t>(k, 2)]);
        append_value_words(words, step.lhs, d);
        words.push_back(d.op_words[static_cast<size_t>(step.op)]);
        append_value_words(words, step.rhs, d);
        words.push_back("=");
        if (with_jargon) {
            words.push_back(std::string(kCalcOpen) + std::to_string(step.lhs) +
                            op_symbol(step.op) + std::to_string(step.rhs) + "=" +
                            std::to_string(r) + kCalcClose);
        }
        words.push_back(std::to_string(r));
        for (size_t j = k + 1; j < p.plan.size(); ++j) {
            words.push_back(d.op_words[static_cast<size_t>(p.plan[j].op)]);
            append_value_words(words, p.plan[j].rhs, d);
        }
        words.back() += ".";
    }
    words.push_back(kAnswerMarker);
    words.push_back(std::to_string(p.ground_truth));
    return join(words, " ");
}

std::optional<int64_t> extract_answer(std::string_view text) {
    size_t pos = text.find(kAnswerMarker);
    if (pos == std::string_view::npos) return std::nullopt;
    size_t i = pos + std::string_view(kAnswerMarker).size();
    while (i < text.size() && text[i] == ' ') ++i;
    bool negative = false;
    if (i < text.size() && (text[i] == '+' || text[i] == '-')) {
        negative = text[i] == '-';
        ++i;
    }
    size_t digits_start = i;
    int64_t value = 0;
    while (i < text.size() && text[i] >= '0' && text[i] <= '9') {
        if (i - digits_start > 17) return std::nullopt;  // implausibly long, treat as garbage
        value = value * 10 + (text[i] - '0');
        ++i;
    }
    if (i == digits_start) return std::nullopt;
    return negative ? -value : value;
}

namespace {

// Left-to-right exact integer evaluation of e.g. "8+6" or "14/2". A chain
// that is not syntactically number-op-number-... is not well formed; one that
// parses but divides inexactly (or by zero) is well formed with no value, so
// callers can tell "not an annotation" apart from "an annotation that lies".
struct ChainEval {
    bool well_formed = false;
    std::optional<int64_t> value;
};

ChainEval eval_chain(std::string_view expr) {
    size_t i = 0;
    auto skip_spaces = [&] {
        while (i < expr.size() && expr[i] == ' ') ++i;
    };
    auto parse_int = [&]() -> std::optional<int64_t> {
        skip_spaces();
        size_t start = i;
        int64_t v = 0;
        while (i < expr.size() && expr[i] >= '0' && expr[i] <= '9') {
            if (i - start > 17) return std::nullopt;
            v = v * 10 + (expr[i] - '0');
            ++i;
        }
        if (i == start) return std::nullopt;
        return v;
    };
    auto acc = parse_int();
    if (!acc) return {};
    bool exact = true;
    while (true) {
        skip_spaces();
        if (i == expr.size()) {
            ChainEval out;
            out.well_formed = true;
            if (exact) out.value = *acc;
            return out;
        }
        auto op = op_from_symbol(expr[i]);
        if (!op) return {};
        ++i;
        auto rhs = parse_int();
        if (!rhs) return {};
        switch (*op) {
            case Op::Add: *acc += *rhs; break;
            case Op::Sub: *acc -= *rhs; break;
            case Op::Mul: *acc *= *rhs; break;
            case Op::Div:
                if (*rhs == 0 || *acc % *rhs != 0)
                    exact = false;  // structurally fine, arithmetically wrong
                else
                    *acc /= *rhs;
                break;
        }
    }
}

}  // namespace

std::optional<Annotation> parse_annotation(std::string_view fragment) {
    size_t open = fragment.find(kCalcOpen);
    if (open == std::string_view::npos) return std::nullopt;
    size_t body_start = open + std::string_view(kCalcOpen).size();
    size_t close = fragment.find(kCalcClose, body_start);
    if (close == std::string_view::npos) return std::nullopt;
    std::string_view body = fragment.substr(body_start, close - body_start);
    size_t eq = body.rfind('=');
    if (eq == std::string_view::npos) return std::nullopt;
    Annotation a;
    a.lhs = trim(body.substr(0, eq));
    std::string rhs_text = trim(body.substr(eq + 1));
    if (rhs_text.empty()) return std::nullopt;
    try {
        size_t used = 0;
        a.rhs = std::stoll(rhs_text, &used);
        if (used != rhs_text.size()) return std::nullopt;
    } catch (const std::exception&) {
        return std::nullopt;
    }
    ChainEval eval = eval_chain(a.lhs);
    if (!eval.well_formed) return std::nullopt;
    a.valid = eval.value.has_value() && *eval.value == a.rhs;
    return a;
}

int verify(std::string_view answer_text, const Problem& p) {
    auto got = extract_answer(answer_text);
    return got && *got == p.ground_truth ? 1 : 0;
}

// ------------------------------------------------------------- corpora io --

std::string serialize_corpus(const std::vector<CorpusRecord>& records) {
    std::string out;
    for (const CorpusRecord& r : records) {
        json j;
        j["id"] = r.id;
        j["dialect"] = r.dialect;
        j["question"] = r.question;
        j["solution"] = r.solution;
        j["ground_truth"] = r.ground_truth;
        out += j.dump();
        out += '\n';
    }
    return out;
}

namespace {

// Runs fn over every nonempty line, mapping json exceptions to per-line errors.
template <typename Fn>
void for_each_json_line(const std::string& content, Fn fn) {
    size_t pos = 0, line_no = 0;
    while (pos < content.size()) {
        size_t end = content.find('\n', pos);
        if (end == std::string::npos) end = content.size();
        std::string line = content.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (trim(line).empty()) continue;
        fn(line_no, line);
    }
}

CorpusRecord parse_corpus_line(size_t line_no, const std::string& line) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception& e) {
        throw MalformedRecordError(line_no, e.what());
    }
    if (!j.is_object()) throw MalformedRecordError(line_no, "expected a JSON object");
    CorpusRecord r;
    try {
        r.id = j.at("id").get<int64_t>();
        r.dialect = j.at("dialect").get<std::string>();
        r.question = j.at("question").get<std::string>();
        r.solution = j.at("solution").get<std::string>();
        r.ground_truth = j.at("ground_truth").get<int64_t>();
    } catch (const json::exception& e) {
        throw MalformedRecordError(line_no, e.what());
    }
    return r;
}

}  // namespace

std::vector<CorpusRecord> load_corpus(const std::filesystem::path& path) {
    std::string content = read_file(path);
    std::vector<CorpusRecord> out;
    for_each_json_line(content, [&](size_t line_no, const std::string& line) {
        out.push_back(parse_corpus_line(line_no, line));
    });
    return out;
}

std::vector<std::pair<size_t, std::string>> validate_corpus(const std::filesystem::path& path) {
    std::string content = read_file(path);
    std::vector<std::pair<size_t, std::string>> problems;
    for_each_json_line(content, [&](size_t line_no, const std::string& line) {
        try {
            CorpusRecord r = parse_corpus_line(line_no, line);
            auto answer = extract_answer(r.solution);
            if (!answer)
                problems.emplace_back(line_no, "solution lacks a '####' integer");
            else if (*answer != r.ground_truth)
                problems.emplace_back(line_no, "solution answer does not match ground truth");
        } catch (const MalformedRecordError& e) {
            problems.emplace_back(line_no, e.what());
        }
    });
    return problems;
}

std::string serialize_problems(const std::vector<Problem>& problems) {
    std::string out;
    for (const Problem& p : problems) {
        json steps = json::array();
        for (const PlanStep& s : p.plan) {
            json step;
            step["op"] = std::string(1, op_symbol(s.op));
            step["lhs"] = s.lhs;
            step["rhs"] = s.rhs;
            steps.push_back(step);
        }
        json j;
        j["id"] = p.id;
        j["difficulty"] = p.difficulty;
        j["ground_truth"] = p.ground_truth;
        j["plan"] = steps;
        j["question"] = p.question_by_dialect;
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::vector<Problem> load_problems(const std::filesystem::path& path) {
    std::string content = read_file(path);
    std::vector<Problem> out;
    for_each_json_line(content, [&](size_t line_no, const std::string& line) {
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw MalformedRecordError(line_no, e.what());
        }
        try {
            Problem p;
            p.id = j.at("id").get<int64_t>();
            p.difficulty = j.at("difficulty").get<int>();
            p.ground_truth = j.at("ground_truth").get<int>();
            for (const json& step : j.at("plan")) {
                auto op = op_from_symbol(step.at("op").get<std::string>().at(0));
                if (!op) throw MalformedRecordError(line_no, "bad op symbol");
                p.plan.push_back({*op, step.at("lhs").get<int>(), step.at("rhs").get<int>()});
            }
            p.question_by_dialect =
                j.at("question").get<std::map<std::string, std::string>>();
            out.push_back(std::move(p));
        } catch (const json::exception& e) {
            throw MalformedRecordError(line_no, e.what());
        }
    });
    return out;
}

// --------------------------------------------------------------- gsm8k io --

GsmLoadResult load_gsm8k(const std::filesystem::path& path) {
    std::string content = read_file(path);
    GsmLoadResult result;
    for_each_json_line(content, [&](size_t line_no, const std::string& line) {
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            result.rejected.emplace_back(line_no, std::string("bad json: ") + e.what());
            return;
        }
        if (!j.is_object() || !j.contains("question") || !j.contains("answer") ||
            !j["question"].is_string() || !j["answer"].is_string()) {
            result.rejected.emplace_back(line_no, "expected question/answer string fields");
            return;
        }
        GsmRecord r;
        r.question = j["question"].get<std::string>();
        r.answer = j["answer"].get<std::string>();
        auto gt = extract_answer(r.answer);
        if (!gt) {
            result.rejected.emplace_back(line_no, "answer lacks a '####' integer");
            return;
        }
        r.ground_truth = *gt;
        result.records.push_back(std::move(r));
    });
    return result;
}

}  // namespace tandem
