// End-to-end acceptance checks for the tandem training framework. Each check
// prints one PASS/FAIL line; the exit status is the number of failures.
//
// Usage: acceptance <path-to-cli-binary>
//
// The heavyweight checks drive the real command-line pipeline (full preset
// runs across seeds); the mechanical ones exercise the library directly.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "tandem/metrics.hpp"
#include "tandem/model.hpp"
#include "tandem/runner.hpp"
#include "tandem/tandem.hpp"
#include "tandem/tasks.hpp"
#include "tandem/text.hpp"
#include "tandem/train.hpp"

using namespace tandem;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
    std::printf("%s  %2d  %-34s  %s\n", pass ? "PASS" : "FAIL", id, name.c_str(),
                detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

void info(const std::string& name, const std::string& detail) {
    std::printf("INFO      %-34s  %s\n", name.c_str(), detail.c_str());
    std::fflush(stdout);
}

int run(const std::string& cmd) {
    std::fprintf(stderr, "[acceptance] running: %s\n", cmd.c_str());
    int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

// ------------------------------------------------------------- csv reading --

struct Csv {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    size_t col(const std::string& name) const {
        for (size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw IoError("missing column " + name);
    }
};

Csv read_csv(const fs::path& path) {
    Csv csv;
    std::string content = read_file(path);
    size_t pos = 0;
    bool first = true;
    while (pos < content.size()) {
        size_t end = content.find('\n', pos);
        if (end == std::string::npos) end = content.size();
        std::string line = content.substr(pos, end - pos);
        pos = end + 1;
        if (trim(line).empty()) continue;
        std::vector<std::string> fields;
        size_t fpos = 0;
        while (true) {
            size_t comma = line.find(',', fpos);
            if (comma == std::string::npos) {
                fields.push_back(line.substr(fpos));
                break;
            }
            fields.push_back(line.substr(fpos, comma - fpos));
            fpos = comma + 1;
        }
        if (first) {
            csv.header = fields;
            first = false;
        } else {
            std::vector<double> row;
            for (const std::string& f : fields) row.push_back(std::stod(f));
            csv.rows.push_back(std::move(row));
        }
    }
    if (csv.header.empty()) throw IoError("empty csv: " + path.string());
    return csv;
}

struct SeedData {
    bool failed = false;
    Csv metrics;
    Csv baseline;
    Csv probes;
};

struct SettingData {
    bool ok = false;
    std::string error;
    double wall_seconds = 0;
    std::vector<SeedData> seeds;
};

SettingData run_setting(const std::string& cli, const std::string& preset, const fs::path& root,
                        int n_seeds) {
    SettingData data;
    auto t0 = std::chrono::steady_clock::now();
    int rc = run(cli + " reproduce " + preset + " --out " + root.string());
    data.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    fs::path dir = root / preset;
    for (int seed = 1; seed <= n_seeds; ++seed) {
        SeedData sd;
        fs::path sdir = dir / ("seed_" + std::to_string(seed));
        if (fs::exists(sdir / "FAILED") || !fs::exists(sdir / "metrics.csv")) {
            sd.failed = true;
        } else {
            sd.metrics = read_csv(sdir / "metrics.csv");
            sd.baseline = read_csv(sdir / "junior_baseline.csv");
            sd.probes = read_csv(sdir / "probes.csv");
        }
        data.seeds.push_back(std::move(sd));
    }
    data.ok = rc == 0;
    if (rc != 0) data.error = "reproduce exited with " + std::to_string(rc);
    return data;
}

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

// -------------------------------------------- finite-difference scaffolding --

constexpr size_t kModelHeaderBytes = 8 + 4 + 8 + 4 * 4 + 1;

std::vector<double> params_of(const PolicyModel& m) {
    std::string blob = m.serialize();
    std::vector<double> out(m.param_count());
    std::memcpy(out.data(), blob.data() + kModelHeaderBytes, out.size() * 8);
    return out;
}

PolicyModel with_param(const PolicyModel& m, const Vocabulary& vocab, size_t index,
                       double value) {
    std::string blob = m.serialize();
    std::memcpy(blob.data() + kModelHeaderBytes + index * 8, &value, 8);
    uint64_t sum = fnv1a64(std::string_view(blob).substr(0, blob.size() - 8));
    std::memcpy(blob.data() + blob.size() - 8, &sum, 8);
    return PolicyModel::deserialize(blob, vocab);
}

struct GradCase {
    std::vector<TokenId> prompt;
    std::vector<TokenId> completion;
    std::vector<double> weights;
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

// ---------------------------------------------------------------- checks --

void check_skill_setting(const SettingData& skill) {
    // jargon collapse: starts fully notational, ends collapsed, quickly
    int collapsed = 0, retained = 0, usable = 0;
    std::string detail;
    for (size_t i = 0; i < skill.seeds.size(); ++i) {
        const SeedData& sd = skill.seeds[i];
        if (sd.failed) {
            detail += " seed" + std::to_string(i + 1) + ":failed";
            continue;
        }
        ++usable;
        size_t jc = sd.metrics.col("notational_jargon");
        size_t uc = sd.metrics.col("update");
        size_t ac = sd.metrics.col("accuracy");
        double first_jargon = sd.metrics.rows.front()[jc];
        double last_jargon = sd.metrics.rows.back()[jc];
        double last_update = sd.metrics.rows.back()[uc];
        bool c = first_jargon >= 0.95 && last_jargon <= 0.05 && last_update <= 300;
        collapsed += c ? 1 : 0;

        double senior_acc = sd.metrics.rows.back()[ac];
        double junior_acc = sd.baseline.rows.front()[sd.baseline.col("accuracy")];
        bool r = senior_acc >= junior_acc - 0.02;
        retained += r ? 1 : 0;
        detail += " seed" + std::to_string(i + 1) + ":[jargon " + fmt(first_jargon) + "->" +
                  fmt(last_jargon) + " in " + std::to_string(static_cast<int>(last_update)) +
                  " updates, acc " + fmt(senior_acc) + " vs junior " + fmt(junior_acc) + "]";
    }
    double per_seed = skill.wall_seconds / std::max<size_t>(1, skill.seeds.size());
    bool time_ok = per_seed <= 600.0;
    report(1, "jargon collapses under handoffs",
           skill.ok && collapsed >= 2 && time_ok,
           std::to_string(collapsed) + "/3 seeds collapsed (need 2); " + fmt(per_seed) +
               "s/seed (limit 600);" + detail);
    report(2, "accuracy at least matches the junior", skill.ok && retained >= 2,
           std::to_string(retained) + "/3 seeds retained accuracy (need 2)");

    // soft trend: training should not degrade reward on the fixed probe set
    // (the probe set is small, so checkpoint-to-checkpoint wobble is noise;
    // what matters is where training ends relative to where it started)
    int steady = 0;
    for (const SeedData& sd : skill.seeds) {
        if (sd.failed) continue;
        size_t rc = sd.probes.col("mean_reward");
        if (sd.probes.rows.back()[rc] >= sd.probes.rows.front()[rc] - 0.05) ++steady;
    }
    info("probe reward held or improved (soft)",
         std::to_string(steady) + "/" + std::to_string(usable) +
             " seeds ended within 0.05 of their starting probe reward or above it");
}

void check_language_setting(const SettingData& language) {
    int shifted = 0;
    std::string detail;
    for (size_t i = 0; i < language.seeds.size(); ++i) {
        const SeedData& sd = language.seeds[i];
        if (sd.failed) {
            detail += " seed" + std::to_string(i + 1) + ":failed";
            continue;
        }
        size_t bc = sd.metrics.col("brisk");
        double first = sd.metrics.rows.front()[bc];
        double last = sd.metrics.rows.back()[bc];
        bool s = first <= 0.1 && last >= 0.8;
        shifted += s ? 1 : 0;
        detail += " seed" + std::to_string(i + 1) + ":[brisk " + fmt(first) + "->" + fmt(last) + "]";
    }
    report(3, "output shifts into the junior's dialect", language.ok && shifted >= 2,
           std::to_string(shifted) + "/3 seeds shifted (need 2);" + detail);
}

void check_ablation_setting(const SettingData& ablation) {
    bool all_high = ablation.ok;
    std::string detail;
    for (size_t i = 0; i < ablation.seeds.size(); ++i) {
        const SeedData& sd = ablation.seeds[i];
        if (sd.failed) {
            all_high = false;
            detail += " seed" + std::to_string(i + 1) + ":failed";
            continue;
        }
        size_t jc = sd.metrics.col("notational_jargon");
        double lowest = 1.0;
        for (const auto& row : sd.metrics.rows) lowest = std::min(lowest, row[jc]);
        if (lowest < 0.9) all_high = false;
        detail += " seed" + std::to_string(i + 1) + ":min " + fmt(lowest);
    }
    report(4, "no handoffs, no collapse", all_high, "jargon stays >= 0.90 at every checkpoint;" + detail);
}

void check_solo_equivalence(const fs::path& seed_dir) {
    Vocabulary vocab = Vocabulary::load(seed_dir / "vocab.tsv");
    PolicyModel senior = Checkpoint::load(seed_dir / checkpoint_filename(0)).restore_model(vocab);
    PolicyModel junior = PolicyModel::load(seed_dir / "junior.bin", vocab);
    std::vector<Problem> problems = load_problems(seed_dir / "train_problems.jsonl");

    TandemConfig cfg;
    cfg.handoff_prob = 0.0;
    cfg.initial_model_rule = InitialModelRule::FixedSenior;
    cfg.rollout_temperature = 0.7;
    cfg.max_output_tokens = 64;

    PromptRenderer plain;
    int mismatches = 0;
    const int n = 1000;
    for (int i = 0; i < n; ++i) {
        const Problem& p = problems[static_cast<size_t>(i) % problems.size()];
        std::vector<TokenId> prompt = plain.render(vocab, p.question("avon"));
        uint64_t seed = mix_seed(424242, static_cast<uint64_t>(i));
        CoinSource coins = CoinSource::fresh(mix_seed(seed, 1));
        Rollout r = tandem_rollout(senior, junior, prompt, prompt, vocab, cfg, coins, seed);
        Rng rng = senior_stream(seed);
        std::vector<TokenId> solo =
            solo_decode(senior, prompt, cfg.rollout_temperature, cfg.max_output_tokens, rng);
        if (r.response != solo) ++mismatches;
    }
    report(5, "disabled handoffs equal solo decoding", mismatches == 0,
           std::to_string(mismatches) + "/" + std::to_string(n) + " prompt mismatches (zero tolerated)");
}

void check_gradients() {
    std::vector<TokenInfo> tokens;
    for (const char* w : {"a", "b", "c", "d", "e", "f", "g", "h"})
        tokens.push_back({w, false, false});
    tokens.push_back({".", true, true});
    Vocabulary vocab = Vocabulary::build(tokens);
    PolicyModel m(vocab, ModelConfig{4, 5, 7}, 2026);

    Rng rng(99);
    std::vector<TokenId> hist;
    for (int step = 0; step < 12; ++step) {
        TokenId t = static_cast<TokenId>(uniform_int(rng, 0, m.vocab_size() - 1));
        m.accumulate_log_prob_grad(hist, t, step % 2 ? 1.0 : -0.5);
        m.apply_sgd(0.3);
        hist.push_back(t);
        if (hist.size() > 5) hist.erase(hist.begin());
    }

    std::vector<GradCase> cases = {
        {{3, 4, 5}, {6}, {1.0}},
        {{3, 4, 5, 6}, {7, 8, 9, 1}, {1.0, 1.0, 1.0, 1.0}},
        {{3}, {4, 5, 6, 7}, {1.0, 0.0, 1.0, 0.0}},  // mask mimicking junior-authored positions
        {{}, {5, 6, 7}, {0.0, 0.0, 0.5}},
        {{8, 9, 3, 4, 5, 6}, {7, 8}, {0.25, 2.0}},
    };

    const double h = 1e-4;
    double worst = 0.0;
    for (const GradCase& c : cases) {
        PolicyModel work = PolicyModel::deserialize(m.serialize(), vocab);
        std::vector<double> before = params_of(work);
        std::vector<TokenId> history = c.prompt;
        for (size_t k = 0; k < c.completion.size(); ++k) {
            if (c.weights[k] != 0.0)
                work.accumulate_log_prob_grad(history, c.completion[k], c.weights[k]);
            history.push_back(c.completion[k]);
        }
        work.apply_sgd(1.0);
        std::vector<double> after = params_of(work);

        std::vector<double> theta = params_of(m);
        for (size_t i = 0; i < theta.size(); ++i) {
            double analytic = after[i] - before[i];
            double up = weighted_ll(with_param(m, vocab, i, theta[i] + h), c);
            double down = weighted_ll(with_param(m, vocab, i, theta[i] - h), c);
            double fd = (up - down) / (2.0 * h);
            double rel = std::abs(analytic - fd) /
                         std::max(std::abs(analytic) + std::abs(fd), 1e-3);
            worst = std::max(worst, rel);
        }
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "max relative error %.2e over %zu cases (vocab %d)",
                  worst, cases.size(), vocab.size());
    report(6, "backprop matches finite differences", worst < 1e-4, buf);
}

void check_paired_inversion(const fs::path& seed_dir) {
    Vocabulary vocab = Vocabulary::load(seed_dir / "vocab.tsv");
    PolicyModel senior = Checkpoint::load(seed_dir / checkpoint_filename(0)).restore_model(vocab);
    PolicyModel junior = PolicyModel::load(seed_dir / "junior.bin", vocab);
    std::vector<Problem> problems = load_problems(seed_dir / "train_problems.jsonl");

    TandemConfig cfg;
    cfg.rollout_temperature = 0.7;
    cfg.max_output_tokens = 64;
    PromptRenderer plain;

    int agreeing = 0, same_initial = 0;
    for (int i = 0; i < 200; ++i) {
        const Problem& p = problems[static_cast<size_t>(i) % problems.size()];
        std::vector<TokenId> prompt = plain.render(vocab, p.question("avon"));
        auto [a, b] = paired_rollouts(senior, junior, prompt, prompt, vocab, cfg,
                                      mix_seed(777, static_cast<uint64_t>(i)));
        if (a.coin_record.empty() || b.coin_record.empty() ||
            a.coin_record[0] == b.coin_record[0])
            ++same_initial;
        size_t overlap = std::min(a.coin_record.size(), b.coin_record.size());
        for (size_t k = 0; k < overlap; ++k)
            if (a.coin_record[k] == b.coin_record[k]) ++agreeing;
    }
    report(7, "paired rollouts invert every coin", agreeing == 0 && same_initial == 0,
           std::to_string(agreeing) + " agreeing coins, " + std::to_string(same_initial) +
               " identical initial picks over 200 pairs (zero tolerated)");
}

void check_reward_filtering(const fs::path& seed_dir, int last_update) {
    Vocabulary vocab = Vocabulary::load(seed_dir / "vocab.tsv");
    PolicyModel senior =
        Checkpoint::load(seed_dir / checkpoint_filename(last_update)).restore_model(vocab);
    PolicyModel junior = PolicyModel::load(seed_dir / "junior.bin", vocab);
    std::vector<Problem> problems = load_problems(seed_dir / "train_problems.jsonl");
    PromptRenderer plain;
    PromptPlan plan{plain, plain, "avon", "avon"};

    // an unreachable ground truth guarantees a zero-success batch
    Problem impossible = problems.front();
    impossible.ground_truth = 1999999999;  // needs 11 tokens; the budget is 8
    std::vector<const Problem*> batch = {&impossible, &impossible, &impossible};
    TrainConfig cfg;
    cfg.learning_rate = 1e-3;
    cfg.max_output_tokens = 8;
    TandemConfig tandem_cfg;
    tandem_cfg.max_output_tokens = 8;

    PolicyModel scratch = senior;
    uint64_t before = scratch.params_hash();
    StepReport sr = reinforce_step(scratch, junior, batch, plan, vocab, cfg, tandem_cfg, 5150);
    bool no_op = sr.n_correct == 0 && scratch.params_hash() == before;

    // one verified rollout: its log-likelihood must strictly rise
    bool ll_checked = false, ll_rose = false;
    TandemConfig tc;
    tc.rollout_temperature = 0.7;
    tc.max_output_tokens = 64;
    for (uint64_t seed = 0; seed < 500 && !ll_checked; ++seed) {
        for (size_t pi = 0; pi < 20 && !ll_checked; ++pi) {
            const Problem& p = problems[pi];
            std::vector<TokenId> prompt = plain.render(vocab, p.question("avon"));
            auto [a, b] = paired_rollouts(senior, junior, prompt, prompt, vocab, tc, seed);
            int ra = verify(detokenize(a.response, vocab), p);
            int rb = verify(detokenize(b.response, vocab), p);
            if (ra + rb != 1) continue;
            const Rollout& winner = ra == 1 ? a : b;
            PolicyModel work = senior;
            double ll_before = work.sequence_log_likelihood(prompt, winner.response);
            std::vector<TokenId> hist = prompt;
            for (TokenId t : winner.response) {
                work.accumulate_log_prob_grad(hist, t, 1.0);
                hist.push_back(t);
            }
            work.apply_sgd(1e-3);
            double ll_after = work.sequence_log_likelihood(prompt, winner.response);
            ll_checked = true;
            ll_rose = ll_after > ll_before;
        }
    }
    report(8, "only verified rollouts move the model", no_op && ll_checked && ll_rose,
           std::string("zero-success batch bit-identical: ") + (no_op ? "yes" : "NO") +
               "; single-success log-likelihood rose: " +
               (ll_checked ? (ll_rose ? "yes" : "NO") : "no case found"));
}

void check_language_id() {
    const auto& dialects = builtin_dialects();
    auto problems = generate_problem_set(31337, 150, DifficultyMix{}, dialects);
    std::map<std::string, std::vector<std::string>> corpora;
    for (const Dialect& d : dialects) {
        auto& texts = corpora[d.name];
        for (const Problem& p : problems) {
            texts.push_back(render_solution(p, d, false));
            texts.push_back(p.question(d.name));
        }
    }
    DialectClassifier clf = train_dialect_classifier(corpora);

    Rng rng(123);
    bool counts_ok = true, sums_ok = true;
    for (int trial = 0; trial < 100; ++trial) {
        const Dialect& d = dialects[static_cast<size_t>(uniform_int(rng, 0, 3))];
        int n = static_cast<int>(uniform_int(rng, 8, 80));
        std::vector<std::string> words;
        auto pool = d.content_words();
        for (int i = 0; i < n; ++i)
            words.push_back(pool[static_cast<size_t>(
                uniform_int(rng, 0, static_cast<int64_t>(pool.size()) - 1))]);
        if (shingles(words).size() != static_cast<size_t>(n - kShingleWindow + 1))
            counts_ok = false;

        std::string text = join(words, " ");
        double sum = 0.0;
        for (const auto& [name, p] : language_distribution(text, clf)) sum += p;
        if (std::abs(sum - 1.0) > 1e-9) sums_ok = false;
    }

    int attributed = 0, total = 0;
    for (const Dialect& d : dialects) {
        auto pool = d.content_words();
        for (int trial = 0; trial < 5; ++trial) {
            std::vector<std::string> words;
            for (int i = 0; i < 50; ++i)
                words.push_back(pool[static_cast<size_t>(
                    uniform_int(rng, 0, static_cast<int64_t>(pool.size()) - 1))]);
            auto dist = language_distribution(join(words, " "), clf);
            ++total;
            if (dist.at(d.name) >= 0.9) ++attributed;
        }
    }
    report(9, "dialect identification behaves", counts_ok && sums_ok && attributed == total,
           std::string("window counts ") + (counts_ok ? "ok" : "WRONG") + ", sums " +
               (sums_ok ? "within 1e-9" : "OFF") + ", " + std::to_string(attributed) + "/" +
               std::to_string(total) + " pure texts >= 0.9");
}

void check_answer_extraction() {
    const std::string lettuce =
        "The total cost of the green and red lettuce is $8 + $6 = $⟪8+6=14⟫ 14.\n"
        "Julie bought $14 / $2 = ⟪14/2=7⟫ 7 pounds of lettuce.\n"
        "#### 7";
    const std::string clips =
        "Natalia sold 48/2 = 24 clips in May. Natalia sold 48+24 = 72 clips altogether in April "
        "and May. #### 72";

    bool ok = extract_answer(lettuce) == 7 && extract_answer(clips) == 72;

    auto first = parse_annotation(lettuce);
    auto second = parse_annotation("⟪14/2=7⟫ 7 pounds");
    auto wrong = parse_annotation("⟪8+6=15⟫");
    ok = ok && first && first->valid && first->lhs == "8+6" && first->rhs == 14;
    ok = ok && second && second->valid;
    ok = ok && wrong && !wrong->valid;

    report(10, "answers and annotations parse", ok,
           ok ? "reference texts extract 7 and 72; spans validate as expected"
              : "reference extraction or span validation broke");
}

void check_repro_idempotence(const std::string& cli, const fs::path& scratch) {
    fs::path conf = scratch / "reduced.conf";
    write_file_atomic(conf,
                      "train_problems = 200\ntest_problems = 50\nepochs = 1\n"
                      "effective_batch_size = 16\ncheckpoint_every = 5\n"
                      "senior_pretrain_epochs = 4\njunior_pretrain_epochs = 2\n"
                      "max_output_length = 48\nseeds = 1\n");
    fs::path r1 = scratch / "repro_a";
    fs::path r2 = scratch / "repro_b";
    int rc1 = run(cli + " reproduce skill --config " + conf.string() + " --out " + r1.string());
    int rc2 = run(cli + " reproduce skill --config " + conf.string() + " --out " + r2.string());

    bool identical = rc1 == 0 && rc2 == 0;
    std::string detail;
    for (const char* name : {"metrics.csv", "probes.csv", "junior_baseline.csv",
                             "pretrain_senior.csv", "corpus_senior.jsonl"}) {
        fs::path a = r1 / "skill" / "seed_1" / name;
        fs::path b = r2 / "skill" / "seed_1" / name;
        bool same = fs::exists(a) && fs::exists(b) && read_file(a) == read_file(b);
        if (!same) {
            identical = false;
            detail += std::string(" ") + name + " differs;";
        }
    }
    if (rc1 != 0 || rc2 != 0) detail += " nonzero exit";
    report(11, "repeated runs are byte-identical", identical,
           identical ? "metrics, probes, baselines and corpora match across two runs"
                     : "divergence:" + detail);
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::fprintf(stderr, "usage: acceptance <cli-binary>\n");
        return 2;
    }
    const std::string cli = argv[1];
    fs::path scratch = fs::temp_directory_path() / "tandem_acceptance";
    fs::remove_all(scratch);
    fs::create_directories(scratch);

    try {
        // cheap mechanical checks first so a broken build fails fast
        check_gradients();
        check_answer_extraction();
        check_language_id();

        // full preset runs
        SettingData skill = run_setting(cli, "skill", scratch, 3);
        check_skill_setting(skill);

        SettingData language = run_setting(cli, "language", scratch, 3);
        check_language_setting(language);

        SettingData ablation = run_setting(cli, "ablation", scratch, 3);
        check_ablation_setting(ablation);

        // mechanical checks that reuse the skill run's artifacts
        fs::path seed_dir = scratch / "skill" / "seed_1";
        if (fs::exists(seed_dir / "vocab.tsv")) {
            check_solo_equivalence(seed_dir);
            check_paired_inversion(seed_dir);
            int last_update = 0;
            if (!skill.seeds.empty() && !skill.seeds[0].failed)
                last_update = static_cast<int>(
                    skill.seeds[0].metrics.rows.back()[skill.seeds[0].metrics.col("update")]);
            check_reward_filtering(seed_dir, last_update);
        } else {
            report(5, "disabled handoffs equal solo decoding", false, "skill artifacts missing");
            report(7, "paired rollouts invert every coin", false, "skill artifacts missing");
            report(8, "only verified rollouts move the model", false, "skill artifacts missing");
        }

        check_repro_idempotence(cli, scratch);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "acceptance aborted: %s\n", e.what());
        return 99;
    }

    std::printf("%d criterion(s) failed\n", g_failures);
    return g_failures;
}
