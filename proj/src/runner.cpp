#include "tandem/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "tandem/tandem.hpp"

namespace tandem {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr uint64_t kTrainProblemsTag = fnv1a64("train-problems");
constexpr uint64_t kTestProblemsTag = fnv1a64("test-problems");
constexpr uint64_t kSeniorCorpusTag = fnv1a64("senior-corpus");
constexpr uint64_t kJuniorCorpusTag = fnv1a64("junior-corpus");
constexpr uint64_t kSeniorInitTag = fnv1a64("senior-init");
constexpr uint64_t kJuniorInitTag = fnv1a64("junior-init");
constexpr uint64_t kSeniorPretrainTag = fnv1a64("senior-pretrain");
constexpr uint64_t kJuniorPretrainTag = fnv1a64("junior-pretrain");

std::string hex64(uint64_t v) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string fmt_double(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}


std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    size_t pos = 0;
    while (true) {
        size_t comma = line.find(',', pos);
        if (comma == std::string::npos) {
            out.push_back(line.substr(pos));
            return out;
        }
        out.push_back(line.substr(pos, comma - pos));
        pos = comma + 1;
    }
}

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> out;
    size_t pos = 0;
    while (pos < text.size()) {
        size_t end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        out.push_back(text.substr(pos, end - pos));
        pos = end + 1;
    }
    return out;
}

}  // namespace

std::string setting_name(Setting s) {
    switch (s) {
        case Setting::Skill: return "skill";
        case Setting::SkillAndLanguage: return "skill_language";
        case Setting::Language: return "language";
    }
    return "?";
}

void ExperimentConfig::validate() const {
    const auto& dialects = builtin_dialects();
    dialect_by_name(dialects, senior_dialect);
    dialect_by_name(dialects, junior_dialect);
    switch (setting) {
        case Setting::Skill:
            if (senior_dialect != junior_dialect)
                throw ConfigError("the skill setting requires matching dialects");
            break;
        case Setting::SkillAndLanguage:
        case Setting::Language:
            if (senior_dialect == junior_dialect)
                throw ConfigError("cross-language settings require distinct dialects");
            break;
    }
    if (setting == Setting::Language && senior_uses_jargon)
        throw ConfigError("the language setting uses a plain (non-jargon) senior");
    if (train_problems < 1 || test_problems < 1)
        throw ConfigError("problem counts must be positive");
    if (senior_jargon_fraction < 0 || senior_jargon_fraction > 1 || senior_minor_fraction < 0 ||
        senior_minor_fraction > 1 || junior_corpus_fraction <= 0 || junior_corpus_fraction > 1)
        throw ConfigError("corpus fractions must lie in [0, 1]");
    if (senior_pretrain_epochs < 1 || junior_pretrain_epochs < 1)
        throw ConfigError("pretraining epochs must be >= 1");
    if (pretrain_learning_rate <= 0) throw ConfigError("pretrain_learning_rate must be positive");
    if (seeds.empty()) throw ConfigError("at least one seed required");
    train.validate();
    tandem.validate();
}

ExperimentConfig preset_config(const std::string& preset) {
    ExperimentConfig cfg;
    cfg.model = ModelConfig{20, 16, 96};
    cfg.train.learning_rate = 0.02;
    cfg.train.batch_size = 32;
    cfg.train.rollouts_per_prompt = 2;
    cfg.train.train_temperature = 0.7;
    cfg.train.test_temperature = 0.0;
    cfg.train.max_output_tokens = 64;
    cfg.train.checkpoint_every = 10;
    cfg.train.epochs = 4;
    cfg.tandem.handoff_prob = 0.5;
    cfg.tandem.granularity = Granularity::Word;
    cfg.tandem.max_output_tokens = 64;
    cfg.tandem.rollout_temperature = 0.7;
    cfg.tandem.initial_model_rule = InitialModelRule::RandomUniform;

    if (preset == "skill") {
        cfg.setting = Setting::Skill;
        cfg.name = "skill";
        cfg.senior_dialect = "avon";
        cfg.junior_dialect = "avon";
        cfg.senior_uses_jargon = true;
        cfg.tracked_markers = {"⟪⟫"};
    } else if (preset == "ablation") {
        cfg.setting = Setting::Skill;
        cfg.name = "ablation";
        cfg.senior_dialect = "avon";
        cfg.junior_dialect = "avon";
        cfg.senior_uses_jargon = true;
        cfg.tracked_markers = {"⟪⟫"};
        cfg.tandem.handoff_prob = 0.0;
        cfg.tandem.initial_model_rule = InitialModelRule::FixedSenior;
    } else if (preset == "skill_language") {
        cfg.setting = Setting::SkillAndLanguage;
        cfg.name = "skill_language";
        cfg.senior_dialect = "avon";
        cfg.junior_dialect = "brisk";
        cfg.senior_uses_jargon = true;
        cfg.tracked_markers = {"⟪⟫", "dialect:avon"};
    } else if (preset == "language") {
        cfg.setting = Setting::Language;
        cfg.name = "language";
        cfg.senior_dialect = "avon";
        cfg.junior_dialect = "brisk";
        cfg.senior_uses_jargon = false;
        cfg.tracked_markers = {"dialect:avon"};
        cfg.junior_corpus_fraction = 1.0;
    } else {
        throw ConfigError("unknown preset '" + preset + "'; expected one of skill, "
                          "skill_language, language, ablation");
    }
    return cfg;
}

std::vector<std::string> preset_names() {
    return {"skill", "skill_language", "language", "ablation"};
}

// ------------------------------------------------------------- config file --

namespace {

int parse_int(const std::string& key, const std::string& value) {
    try {
        size_t used = 0;
        int v = std::stoi(value, &used);
        if (used != value.size()) throw std::invalid_argument("");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "' expects an integer, got '" + value + "'");
    }
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        size_t used = 0;
        double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument("");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "' expects a number, got '" + value + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "1" || value == "true") return true;
    if (value == "0" || value == "false") return false;
    throw ConfigError("key '" + key + "' expects a boolean, got '" + value + "'");
}

}  // namespace

void apply_config_line(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "learning_rate") cfg.train.learning_rate = parse_double(key, value);
    else if (key == "effective_batch_size") cfg.train.batch_size = parse_int(key, value);
    else if (key == "rollouts_per_prompt") cfg.train.rollouts_per_prompt = parse_int(key, value);
    else if (key == "train_temperature") {
        cfg.train.train_temperature = parse_double(key, value);
        cfg.tandem.rollout_temperature = cfg.train.train_temperature;
    } else if (key == "test_temperature") cfg.train.test_temperature = parse_double(key, value);
    else if (key == "max_output_length") {
        cfg.train.max_output_tokens = parse_int(key, value);
        cfg.tandem.max_output_tokens = cfg.train.max_output_tokens;
    } else if (key == "epochs") cfg.train.epochs = parse_int(key, value);
    else if (key == "checkpoint_every") cfg.train.checkpoint_every = parse_int(key, value);
    else if (key == "mask_junior_tokens") cfg.train.mask_junior_tokens = parse_bool(key, value);
    else if (key == "learn_from_negatives")
        cfg.train.learn_from_negatives = parse_bool(key, value);
    else if (key == "handoff_prob") cfg.tandem.handoff_prob = parse_double(key, value);
    else if (key == "granularity") {
        if (value == "token") cfg.tandem.granularity = Granularity::Token;
        else if (value == "word") cfg.tandem.granularity = Granularity::Word;
        else if (value == "sentence") cfg.tandem.granularity = Granularity::Sentence;
        else throw ConfigError("granularity must be token, word or sentence");
    } else if (key == "initial_model") {
        if (value == "random") cfg.tandem.initial_model_rule = InitialModelRule::RandomUniform;
        else if (value == "senior") cfg.tandem.initial_model_rule = InitialModelRule::FixedSenior;
        else if (value == "junior") cfg.tandem.initial_model_rule = InitialModelRule::FixedJunior;
        else throw ConfigError("initial_model must be random, senior or junior");
    } else if (key == "context_window") cfg.model.context_window = parse_int(key, value);
    else if (key == "embedding_dim") cfg.model.embedding_dim = parse_int(key, value);
    else if (key == "hidden_dim") cfg.model.hidden_dim = parse_int(key, value);
    else if (key == "train_problems") cfg.train_problems = parse_int(key, value);
    else if (key == "test_problems") cfg.test_problems = parse_int(key, value);
    else if (key == "senior_pretrain_epochs") cfg.senior_pretrain_epochs = parse_int(key, value);
    else if (key == "junior_pretrain_epochs") cfg.junior_pretrain_epochs = parse_int(key, value);
    else if (key == "pretrain_learning_rate")
        cfg.pretrain_learning_rate = parse_double(key, value);
    else if (key == "senior_jargon_fraction")
        cfg.senior_jargon_fraction = parse_double(key, value);
    else if (key == "senior_minor_fraction") cfg.senior_minor_fraction = parse_double(key, value);
    else if (key == "junior_corpus_fraction")
        cfg.junior_corpus_fraction = parse_double(key, value);
    else if (key == "senior_dialect") cfg.senior_dialect = value;
    else if (key == "junior_dialect") cfg.junior_dialect = value;
    else if (key == "difficulty_mix") {
        auto parts = split_csv_line(value);
        if (parts.size() != 3) throw ConfigError("difficulty_mix expects three weights");
        cfg.difficulty.w1 = parse_double(key, trim(parts[0]));
        cfg.difficulty.w2 = parse_double(key, trim(parts[1]));
        cfg.difficulty.w3 = parse_double(key, trim(parts[2]));
    } else if (key == "seeds") {
        std::vector<uint64_t> seeds;
        for (const std::string& part : split_csv_line(value)) {
            std::string p = trim(part);
            if (p.empty()) continue;
            seeds.push_back(static_cast<uint64_t>(parse_int(key, p)));
        }
        if (seeds.empty()) throw ConfigError("seeds list is empty");
        cfg.seeds = seeds;
    } else {
        throw ConfigError("unknown config key '" + key + "'");
    }
}

void apply_config_file(ExperimentConfig& cfg, const fs::path& path) {
    std::string content = read_file(path);
    size_t line_no = 0;
    for (const std::string& raw : split_lines(content)) {
        ++line_no;
        std::string line = raw;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw MalformedRecordError(line_no, "expected 'key = value'");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw MalformedRecordError(line_no, "empty key");
        apply_config_line(cfg, key, value);
    }
}

std::string config_snapshot(const ExperimentConfig& cfg) {
    std::ostringstream out;
    out << "# setting: " << setting_name(cfg.setting) << " (" << cfg.name << ")\n";
    out << "senior_dialect = " << cfg.senior_dialect << "\n";
    out << "junior_dialect = " << cfg.junior_dialect << "\n";
    out << "train_problems = " << cfg.train_problems << "\n";
    out << "test_problems = " << cfg.test_problems << "\n";
    out << "difficulty_mix = " << cfg.difficulty.w1 << "," << cfg.difficulty.w2 << ","
        << cfg.difficulty.w3 << "\n";
    out << "senior_jargon_fraction = " << cfg.senior_jargon_fraction << "\n";
    out << "senior_minor_fraction = " << cfg.senior_minor_fraction << "\n";
    out << "junior_corpus_fraction = " << cfg.junior_corpus_fraction << "\n";
    out << "senior_pretrain_epochs = " << cfg.senior_pretrain_epochs << "\n";
    out << "junior_pretrain_epochs = " << cfg.junior_pretrain_epochs << "\n";
    out << "pretrain_learning_rate = " << cfg.pretrain_learning_rate << "\n";
    out << "context_window = " << cfg.model.context_window << "\n";
    out << "embedding_dim = " << cfg.model.embedding_dim << "\n";
    out << "hidden_dim = " << cfg.model.hidden_dim << "\n";
    out << "learning_rate = " << cfg.train.learning_rate << "\n";
    out << "effective_batch_size = " << cfg.train.batch_size << "\n";
    out << "rollouts_per_prompt = " << cfg.train.rollouts_per_prompt << "\n";
    out << "train_temperature = " << cfg.train.train_temperature << "\n";
    out << "test_temperature = " << cfg.train.test_temperature << "\n";
    out << "max_output_length = " << cfg.train.max_output_tokens << "\n";
    out << "epochs = " << cfg.train.epochs << "\n";
    out << "checkpoint_every = " << cfg.train.checkpoint_every << "\n";
    out << "mask_junior_tokens = " << (cfg.train.mask_junior_tokens ? 1 : 0) << "\n";
    out << "handoff_prob = " << cfg.tandem.handoff_prob << "\n";
    out << "granularity = "
        << (cfg.tandem.granularity == Granularity::Token
                ? "token"
                : cfg.tandem.granularity == Granularity::Word ? "word" : "sentence")
        << "\n";
    out << "initial_model = "
        << (cfg.tandem.initial_model_rule == InitialModelRule::RandomUniform
                ? "random"
                : cfg.tandem.initial_model_rule == InitialModelRule::FixedSenior ? "senior"
                                                                                 : "junior")
        << "\n";
    out << "seeds = ";
    for (size_t i = 0; i < cfg.seeds.size(); ++i)
        out << (i ? "," : "") << cfg.seeds[i];
    out << "\n";
    return out.str();
}

// ------------------------------------------------------------ seed pipeline --

namespace {

std::vector<CorpusRecord> make_senior_corpus(const std::vector<Problem>& problems,
                                             const ExperimentConfig& cfg,
                                             const std::vector<Dialect>& dialects,
                                             uint64_t seed) {
    const Dialect& own = dialect_by_name(dialects, cfg.senior_dialect);
    const Dialect& other = dialect_by_name(dialects, cfg.junior_dialect);
    const bool cross = cfg.senior_dialect != cfg.junior_dialect;
    Rng rng(splitmix64(mix_seed(seed, kSeniorCorpusTag)));
    std::vector<CorpusRecord> out;
    out.reserve(problems.size());
    for (const Problem& p : problems) {
        CorpusRecord r;
        r.id = p.id;
        r.question = p.question(cfg.senior_dialect);
        r.ground_truth = p.ground_truth;
        double u = uniform_unit(rng);
        if (cross && u < cfg.senior_minor_fraction) {
            // cross-dialect exposure: question stays in the senior's dialect,
            // answer rendered plainly in the junior's
            r.dialect = other.name;
            r.solution = render_solution(p, other, false);
        } else if (cfg.senior_uses_jargon &&
                   uniform_unit(rng) < cfg.senior_jargon_fraction) {
            r.dialect = own.name;
            r.solution = render_solution(p, own, true);
        } else {
            r.dialect = own.name;
            r.solution = render_solution(p, own, false);
        }
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<CorpusRecord> make_junior_corpus(const std::vector<Problem>& problems,
                                             const ExperimentConfig& cfg,
                                             const std::vector<Dialect>& dialects,
                                             uint64_t seed) {
    const Dialect& own = dialect_by_name(dialects, cfg.junior_dialect);
    Rng rng(splitmix64(mix_seed(seed, kJuniorCorpusTag)));
    std::vector<CorpusRecord> out;
    for (const Problem& p : problems) {
        if (uniform_unit(rng) >= cfg.junior_corpus_fraction) continue;
        CorpusRecord r;
        r.id = p.id;
        r.dialect = own.name;
        r.question = p.question(own.name);
        r.solution = render_solution(p, own, false);
        r.ground_truth = p.ground_truth;
        out.push_back(std::move(r));
    }
    if (out.empty()) throw InsufficientCorpusError("junior corpus came out empty");
    return out;
}

std::map<std::string, std::vector<std::string>> classifier_corpora(
    const std::vector<Problem>& problems, const std::vector<Dialect>& dialects) {
    const size_t k = std::min<size_t>(problems.size(), 300);
    std::map<std::string, std::vector<std::string>> out;
    for (const Dialect& d : dialects) {
        auto& texts = out[d.name];
        for (size_t i = 0; i < k; ++i) {
            texts.push_back(render_solution(problems[i], d, false));
            texts.push_back(problems[i].question(d.name));
        }
    }
    return out;
}

std::string probes_csv(const std::vector<ProbeRecord>& probes) {
    std::string out = "update,mean_reward\n";
    for (const ProbeRecord& p : probes)
        out += std::to_string(p.update) + "," + fmt_double(p.mean_reward) + "\n";
    return out;
}

std::string training_log_jsonl(const std::vector<StepReport>& log) {
    std::string out;
    for (const StepReport& r : log) {
        json j;
        j["update"] = r.update;
        j["n_rollouts"] = r.n_rollouts;
        j["n_correct"] = r.n_correct;
        j["mean_reward"] = r.mean_reward;
        j["grad_norm"] = r.grad_norm;
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::string nll_csv(const PretrainReport& report) {
    std::string out = "epoch,mean_nll\n";
    for (size_t i = 0; i < report.epoch_mean_nll.size(); ++i)
        out += std::to_string(i + 1) + "," + fmt_double(report.epoch_mean_nll[i]) + "\n";
    return out;
}

std::string baseline_csv(const MetricRecord& r, const std::vector<std::string>& dialect_names) {
    std::string out = "accuracy,notational_jargon";
    for (const std::string& d : dialect_names) out += "," + d;
    out += "\n" + fmt_double(r.accuracy) + "," + fmt_double(r.notational_jargon);
    for (const std::string& d : dialect_names) {
        auto it = r.language_distribution.find(d);
        out += "," + fmt_double(it == r.language_distribution.end() ? 0.0 : it->second);
    }
    out += "\n";
    return out;
}

SeedOutcome run_seed(const ExperimentConfig& cfg, uint64_t seed, const fs::path& dir) {
    SeedOutcome outcome;
    outcome.seed = seed;
    outcome.dir = dir;

    const auto& dialects = builtin_dialects();
    Vocabulary vocab = build_task_vocabulary(dialects);

    fs::create_directories(dir);
    std::error_code ec;
    fs::remove(dir / "FAILED", ec);  // clear any marker from a previous attempt

    vocab.save(dir / "vocab.tsv");
    write_file_atomic(dir / "config.snapshot", config_snapshot(cfg));

    std::vector<Problem> train_set = generate_problem_set(mix_seed(seed, kTrainProblemsTag),
                                                          cfg.train_problems, cfg.difficulty,
                                                          dialects);
    std::vector<Problem> test_set = generate_problem_set(mix_seed(seed, kTestProblemsTag),
                                                         cfg.test_problems, cfg.difficulty,
                                                         dialects);
    write_file_atomic(dir / "train_problems.jsonl", serialize_problems(train_set));
    write_file_atomic(dir / "test_problems.jsonl", serialize_problems(test_set));

    std::vector<CorpusRecord> senior_corpus = make_senior_corpus(train_set, cfg, dialects, seed);
    std::vector<CorpusRecord> junior_corpus = make_junior_corpus(train_set, cfg, dialects, seed);
    write_file_atomic(dir / "corpus_senior.jsonl", serialize_corpus(senior_corpus));
    write_file_atomic(dir / "corpus_junior.jsonl", serialize_corpus(junior_corpus));

    DialectClassifier clf = train_dialect_classifier(classifier_corpora(train_set, dialects));

    PromptRenderer plain;  // question-only prompting; roles come from the corpora
    PromptPlan plan;
    plan.senior_renderer = plain;
    plan.junior_renderer = plain;
    plan.senior_dialect = cfg.senior_dialect;
    plan.junior_dialect = cfg.junior_dialect;

    PolicyModel senior(vocab, cfg.model, mix_seed(seed, kSeniorInitTag));
    auto senior_examples = build_pretrain_examples(senior_corpus, plain, vocab);
    PretrainReport senior_report =
        pretrain_supervised(senior, senior_examples, cfg.senior_pretrain_epochs,
                            cfg.pretrain_learning_rate, mix_seed(seed, kSeniorPretrainTag));
    write_file_atomic(dir / "pretrain_senior.csv", nll_csv(senior_report));

    PolicyModel junior(vocab, cfg.model, mix_seed(seed, kJuniorInitTag));
    auto junior_examples = build_pretrain_examples(junior_corpus, plain, vocab);
    PretrainReport junior_report =
        pretrain_supervised(junior, junior_examples, cfg.junior_pretrain_epochs,
                            cfg.pretrain_learning_rate, mix_seed(seed, kJuniorPretrainTag));
    write_file_atomic(dir / "pretrain_junior.csv", nll_csv(junior_report));
    junior.set_frozen(true);
    junior.save(dir / "junior.bin");

    EvalConfig eval_cfg;
    eval_cfg.temperature = cfg.train.test_temperature;
    eval_cfg.max_output_tokens = cfg.train.max_output_tokens;

    outcome.junior_baseline =
        evaluate_model(junior, test_set, plain, cfg.junior_dialect, vocab, eval_cfg, clf).record;
    write_file_atomic(dir / "junior_baseline.csv",
                      baseline_csv(outcome.junior_baseline, clf.dialect_names()));

    TrainConfig train_cfg = cfg.train;
    train_cfg.seed = seed;
    TrainResult result =
        tandem_train(senior, junior, train_set, plan, vocab, train_cfg, cfg.tandem, dir);
    write_file_atomic(dir / "training_log.jsonl", training_log_jsonl(result.log));
    write_file_atomic(dir / "probes.csv", probes_csv(result.probes));
    outcome.probes = result.probes;

    for (const Checkpoint& c : result.checkpoints) {
        PolicyModel m = c.restore_model(vocab);
        MetricRecord rec =
            evaluate_model(m, test_set, plain, cfg.senior_dialect, vocab, eval_cfg, clf).record;
        rec.update = c.update_index;
        outcome.metrics.push_back(std::move(rec));
    }
    write_file_atomic(dir / "metrics.csv", metrics_csv(outcome.metrics, clf.dialect_names()));
    return outcome;
}

void hash_seed_files(json& files, const fs::path& dir) {
    std::vector<fs::path> paths;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file()) paths.push_back(entry.path());
    std::sort(paths.begin(), paths.end());
    for (const fs::path& p : paths)
        files[p.filename().string()] = hex64(fnv1a64(read_file(p)));
}

}  // namespace

RunManifest reproduce_setting(const ExperimentConfig& cfg, const fs::path& out_root) {
    cfg.validate();
    RunManifest manifest;
    manifest.setting = cfg.name;
    const char* rev = std::getenv("TANDEM_REVISION");
    manifest.revision = rev ? rev : "unversioned";
    manifest.root = out_root / cfg.name;
    fs::create_directories(manifest.root);
    write_file_atomic(manifest.root / "config.snapshot", config_snapshot(cfg));

    for (uint64_t seed : cfg.seeds) {
        fs::path dir = manifest.root / ("seed_" + std::to_string(seed));
        try {
            manifest.seeds.push_back(run_seed(cfg, seed, dir));
        } catch (const std::exception& e) {
            SeedOutcome failed;
            failed.seed = seed;
            failed.dir = dir;
            failed.failed = true;
            failed.error = e.what();
            fs::create_directories(dir);
            write_file_atomic(dir / "FAILED", std::string(e.what()) + "\n");
            manifest.seeds.push_back(std::move(failed));
        }
    }

    json j;
    j["setting"] = manifest.setting;
    j["revision"] = manifest.revision;
    j["config"] = config_snapshot(cfg);
    j["seeds"] = json::array();
    for (const SeedOutcome& s : manifest.seeds) {
        json js;
        js["seed"] = s.seed;
        js["dir"] = s.dir.filename().string();
        js["failed"] = s.failed;
        if (s.failed) js["error"] = s.error;
        json files = json::object();
        if (fs::exists(s.dir)) hash_seed_files(files, s.dir);
        js["files"] = files;
        j["seeds"].push_back(js);
    }
    write_file_atomic(manifest.root / "manifest.json", j.dump(2) + "\n");
    return manifest;
}

// ------------------------------------------------------------------- checks --

namespace {

double junior_dialect_mass(const MetricRecord& r, const std::string& junior_dialect) {
    auto it = r.language_distribution.find(junior_dialect);
    return it == r.language_distribution.end() ? 0.0 : it->second;
}

}  // namespace

std::vector<std::string> check_setting(const ExperimentConfig& cfg, const RunManifest& manifest) {
    std::vector<std::string> failures;
    int usable = 0;
    for (const SeedOutcome& s : manifest.seeds) {
        if (s.failed)
            failures.push_back("seed " + std::to_string(s.seed) + " failed: " + s.error);
        else if (s.metrics.size() < 2)
            failures.push_back("seed " + std::to_string(s.seed) + " produced too few checkpoints");
        else
            ++usable;
    }
    if (usable == 0) {
        failures.push_back("no usable seeds");
        return failures;
    }

    auto count_passing = [&](auto&& pred) {
        int n = 0;
        for (const SeedOutcome& s : manifest.seeds)
            if (!s.failed && s.metrics.size() >= 2 && pred(s)) ++n;
        return n;
    };
    const int need = std::min<int>(2, static_cast<int>(manifest.seeds.size()));

    if (cfg.name == "ablation") {
        for (const SeedOutcome& s : manifest.seeds) {
            if (s.failed || s.metrics.empty()) continue;
            for (const MetricRecord& r : s.metrics) {
                if (r.notational_jargon < 0.9) {
                    failures.push_back("seed " + std::to_string(s.seed) + " update " +
                                       std::to_string(r.update) + ": jargon " +
                                       fmt_double(r.notational_jargon) + " fell below 0.90");
                    break;
                }
            }
        }
        return failures;
    }

    if (cfg.setting == Setting::Language) {
        int shifted = count_passing([&](const SeedOutcome& s) {
            return junior_dialect_mass(s.metrics.front(), cfg.junior_dialect) <= 0.1 &&
                   junior_dialect_mass(s.metrics.back(), cfg.junior_dialect) >= 0.8;
        });
        if (shifted < need)
            failures.push_back("language shift (junior-dialect mass <=0.1 -> >=0.8) held in " +
                               std::to_string(shifted) + "/" +
                               std::to_string(manifest.seeds.size()) + " seeds; need " +
                               std::to_string(need));
        return failures;
    }

    // skill and skill_language: jargon collapse with retained accuracy
    int collapsed = count_passing([&](const SeedOutcome& s) {
        return s.metrics.front().notational_jargon >= 0.95 &&
               s.metrics.back().notational_jargon <= 0.05 && s.metrics.back().update <= 300;
    });
    if (collapsed < need)
        failures.push_back("jargon collapse (>=0.95 -> <=0.05 within 300 updates) held in " +
                           std::to_string(collapsed) + "/" +
                           std::to_string(manifest.seeds.size()) + " seeds; need " +
                           std::to_string(need));
    int retained = count_passing([&](const SeedOutcome& s) {
        return s.metrics.back().accuracy >= s.junior_baseline.accuracy - 0.02;
    });
    if (retained < need)
        failures.push_back("accuracy retention (final senior >= junior - 0.02) held in " +
                           std::to_string(retained) + "/" +
                           std::to_string(manifest.seeds.size()) + " seeds; need " +
                           std::to_string(need));
    return failures;
}

// ------------------------------------------------------------------- report --

std::string aggregate_report(const fs::path& setting_dir) {
    std::vector<fs::path> seed_dirs;
    for (const auto& entry : fs::directory_iterator(setting_dir)) {
        if (entry.is_directory() &&
            starts_with(entry.path().filename().string(), "seed_") &&
            fs::exists(entry.path() / "metrics.csv"))
            seed_dirs.push_back(entry.path());
    }
    std::sort(seed_dirs.begin(), seed_dirs.end());
    if (seed_dirs.empty()) throw IoError("no seed metrics found under " + setting_dir.string());

    std::vector<std::string> columns;  // metric columns after "update"
    // update -> column -> per-seed values
    std::map<int, std::vector<std::vector<double>>> by_update;
    std::vector<double> baselines;

    for (const fs::path& dir : seed_dirs) {
        std::vector<std::string> lines = split_lines(read_file(dir / "metrics.csv"));
        if (lines.empty()) throw MalformedRecordError(0, "empty metrics file");
        std::vector<std::string> header = split_csv_line(lines[0]);
        if (header.size() < 2 || header[0] != "update")
            throw MalformedRecordError(1, "unexpected metrics header");
        std::vector<std::string> cols(header.begin() + 1, header.end());
        if (columns.empty()) columns = cols;
        else if (columns != cols)
            throw MalformedRecordError(1, "metrics headers differ between seeds");
        for (size_t i = 1; i < lines.size(); ++i) {
            if (trim(lines[i]).empty()) continue;
            std::vector<std::string> f = split_csv_line(lines[i]);
            if (f.size() != header.size())
                throw MalformedRecordError(i + 1, "metrics row width mismatch");
            int update = parse_int("update", f[0]);
            auto& cell = by_update[update];
            cell.resize(columns.size());
            for (size_t c = 0; c < columns.size(); ++c)
                cell[c].push_back(parse_double(columns[c], f[c + 1]));
        }
        fs::path baseline_path = dir / "junior_baseline.csv";
        if (fs::exists(baseline_path)) {
            std::vector<std::string> blines = split_lines(read_file(baseline_path));
            if (blines.size() >= 2)
                baselines.push_back(parse_double("accuracy", split_csv_line(blines[1])[0]));
        }
    }

    std::ostringstream out;
    out << "# seeds: " << seed_dirs.size() << "\n";
    if (!baselines.empty()) {
        double mn = baselines[0], mx = baselines[0], sum = 0;
        for (double b : baselines) {
            mn = std::min(mn, b);
            mx = std::max(mx, b);
            sum += b;
        }
        out << "# junior_baseline_accuracy mean=" << fmt_double(sum / baselines.size())
            << " min=" << fmt_double(mn) << " max=" << fmt_double(mx) << "\n";
    }
    // min/max bands are honest at a handful of seeds; once there are enough
    // for the normal approximation to mean anything, add a 95% interval too.
    const bool with_ci = seed_dirs.size() >= 10;
    out << "update";
    for (const std::string& c : columns) {
        out << "," << c << "_mean," << c << "_min," << c << "_max";
        if (with_ci) out << "," << c << "_ci95";
    }
    out << "\n";
    for (const auto& [update, cells] : by_update) {
        out << update;
        for (const auto& values : cells) {
            double mn = values[0], mx = values[0], sum = 0;
            for (double v : values) {
                mn = std::min(mn, v);
                mx = std::max(mx, v);
                sum += v;
            }
            double mean = sum / values.size();
            out << "," << fmt_double(mean) << "," << fmt_double(mn) << "," << fmt_double(mx);
            if (with_ci) {
                double ss = 0;
                for (double v : values) ss += (v - mean) * (v - mean);
                double sd = std::sqrt(ss / (values.size() - 1));
                out << "," << fmt_double(1.96 * sd / std::sqrt(double(values.size())));
            }
        }
        out << "\n";
    }
    return out.str();
}

fs::path resolve_out_root(const std::string& flag_value) {
    if (!flag_value.empty()) return flag_value;
    const char* env = std::getenv("TANDEM_OUT");
    if (env && *env) return env;
    return "out";
}

// ---------------------------------------------------------------------- cli --

namespace {

// Builds the prompt-dialect classifier used by the standalone evaluate
// command from the problems file's own renderings.
DialectClassifier classifier_from_problems(const std::vector<Problem>& problems) {
    return train_dialect_classifier(classifier_corpora(problems, builtin_dialects()));
}

int cmd_gen_corpus(const std::string& out_dir, int count, uint64_t seed,
                   const std::string& check_path) {
    if (!check_path.empty()) {
        auto problems = validate_corpus(check_path);
        for (const auto& [line, why] : problems)
            std::cerr << check_path << ":" << line << ": " << why << "\n";
        if (!problems.empty()) {
            std::cerr << check_path << ": " << problems.size() << " malformed record(s)\n";
            return 2;
        }
        std::cout << check_path << ": ok\n";
        return 0;
    }
    if (out_dir.empty()) throw ConfigError("gen-corpus needs --out (or --check <file>)");
    const auto& dialects = builtin_dialects();
    Vocabulary vocab = build_task_vocabulary(dialects);
    DifficultyMix mix;
    std::vector<Problem> problems = generate_problem_set(seed, count, mix, dialects);
    fs::path dir(out_dir);
    fs::create_directories(dir);
    vocab.save(dir / "vocab.tsv");
    write_file_atomic(dir / "problems.jsonl", serialize_problems(problems));
    for (const Dialect& d : dialects) {
        for (bool jargon : {false, true}) {
            std::vector<CorpusRecord> records;
            records.reserve(problems.size());
            for (const Problem& p : problems) {
                CorpusRecord r;
                r.id = p.id;
                r.dialect = d.name;
                r.question = p.question(d.name);
                r.solution = render_solution(p, d, jargon);
                r.ground_truth = p.ground_truth;
                records.push_back(std::move(r));
            }
            std::string name = "corpus_" + d.name + (jargon ? "_jargon" : "") + ".jsonl";
            write_file_atomic(dir / name, serialize_corpus(records));
        }
    }
    std::cout << "wrote " << problems.size() << " problems and " << dialects.size() * 2
              << " corpora to " << dir.string() << "\n";
    return 0;
}

int cmd_pretrain(const std::string& vocab_path, const std::string& corpus_path,
                 const std::string& out_path, int epochs, double lr, uint64_t seed,
                 const ModelConfig& mc, bool freeze) {
    Vocabulary vocab = Vocabulary::load(vocab_path);
    std::vector<CorpusRecord> records = load_corpus(corpus_path);
    PolicyModel model(vocab, mc, mix_seed(seed, fnv1a64("init")));
    PromptRenderer plain;
    auto examples = build_pretrain_examples(records, plain, vocab);
    PretrainReport report =
        pretrain_supervised(model, examples, epochs, lr, mix_seed(seed, fnv1a64("pretrain")));
    for (size_t i = 0; i < report.epoch_mean_nll.size(); ++i)
        std::cout << "epoch " << (i + 1) << " mean_nll " << fmt_double(report.epoch_mean_nll[i])
                  << "\n";
    if (freeze) model.set_frozen(true);
    model.save(out_path);
    std::cout << "saved " << out_path << "\n";
    return 0;
}

int cmd_tandem_train(const std::string& vocab_path, const std::string& senior_path,
                     const std::string& junior_path, const std::string& problems_path,
                     const std::string& out_dir, const std::string& senior_dialect,
                     const std::string& junior_dialect, uint64_t seed,
                     const std::string& config_path) {
    ExperimentConfig cfg = preset_config("skill");
    cfg.senior_dialect = senior_dialect;
    cfg.junior_dialect = junior_dialect;
    if (!config_path.empty()) apply_config_file(cfg, config_path);
    Vocabulary vocab = Vocabulary::load(vocab_path);
    PolicyModel senior = PolicyModel::load(senior_path, vocab);
    senior.set_frozen(false);
    PolicyModel junior = PolicyModel::load(junior_path, vocab);
    junior.set_frozen(true);
    std::vector<Problem> train_set = load_problems(problems_path);

    PromptRenderer plain;
    PromptPlan plan{plain, plain, cfg.senior_dialect, cfg.junior_dialect};
    TrainConfig train_cfg = cfg.train;
    train_cfg.seed = seed;
    fs::path dir(out_dir);
    fs::create_directories(dir);
    TrainResult result =
        tandem_train(senior, junior, train_set, plan, vocab, train_cfg, cfg.tandem, dir);
    write_file_atomic(dir / "training_log.jsonl", training_log_jsonl(result.log));
    write_file_atomic(dir / "probes.csv", probes_csv(result.probes));
    std::cout << "ran " << result.log.size() << " updates; wrote " << result.checkpoints.size()
              << " checkpoints to " << dir.string() << "\n";
    return 0;
}

int cmd_evaluate(const std::string& vocab_path, const std::string& ckpt_path,
                 const std::string& problems_path, const std::string& dialect,
                 int max_output_tokens, const std::string& out_path) {
    Vocabulary vocab = Vocabulary::load(vocab_path);
    Checkpoint ckpt = Checkpoint::load(ckpt_path);
    PolicyModel model = ckpt.restore_model(vocab);
    std::vector<Problem> problems = load_problems(problems_path);
    DialectClassifier clf = classifier_from_problems(problems);
    PromptRenderer plain;
    EvalConfig eval_cfg;
    eval_cfg.max_output_tokens = max_output_tokens;
    EvalResult result = evaluate_model(model, problems, plain, dialect, vocab, eval_cfg, clf);
    result.record.update = ckpt.update_index;
    std::cout << "update " << ckpt.update_index << ": accuracy "
              << fmt_double(result.record.accuracy) << ", jargon "
              << fmt_double(result.record.notational_jargon);
    for (const auto& [d, p] : result.record.language_distribution)
        std::cout << ", " << d << " " << fmt_double(p);
    std::cout << "\n";
    if (!out_path.empty())
        write_file_atomic(out_path, metrics_csv({result.record}, clf.dialect_names()));
    return 0;
}

int cmd_trace(const std::string& vocab_path, const std::string& senior_path,
              const std::string& junior_path, const std::string& problems_path, int index,
              uint64_t seed, const std::string& senior_dialect,
              const std::string& junior_dialect, double p) {
    Vocabulary vocab = Vocabulary::load(vocab_path);
    PolicyModel senior = PolicyModel::load(senior_path, vocab);
    PolicyModel junior = PolicyModel::load(junior_path, vocab);
    std::vector<Problem> problems = load_problems(problems_path);
    if (index < 0 || static_cast<size_t>(index) >= problems.size())
        throw ConfigError("problem index out of range");
    const Problem& problem = problems[static_cast<size_t>(index)];
    PromptRenderer plain;
    TandemConfig cfg;
    cfg.handoff_prob = p;
    cfg.max_output_tokens = 64;
    CoinSource coins = CoinSource::fresh(mix_seed(seed, fnv1a64("trace-coins")));
    Rollout r = tandem_rollout(senior, junior, plain.render(vocab, problem.question(senior_dialect)),
                               plain.render(vocab, problem.question(junior_dialect)), vocab, cfg,
                               coins, mix_seed(seed, fnv1a64("trace-tokens")));
    std::cout << format_trace(r, vocab);
    std::cout << "answer: " << detokenize(r.response, vocab) << "\n";
    std::cout << "reward: " << verify(detokenize(r.response, vocab), problem) << "\n";
    return 0;
}

int cmd_reproduce(const std::string& preset, int seeds_flag, const std::string& out_flag,
                  const std::string& config_path, bool check) {
    ExperimentConfig cfg = preset_config(preset);
    if (!config_path.empty()) apply_config_file(cfg, config_path);
    if (seeds_flag > 0) {
        cfg.seeds.clear();
        for (int i = 1; i <= seeds_flag; ++i) cfg.seeds.push_back(static_cast<uint64_t>(i));
    }
    cfg.validate();
    RunManifest manifest = reproduce_setting(cfg, resolve_out_root(out_flag));

    bool any_failed = false;
    for (const SeedOutcome& s : manifest.seeds) {
        if (s.failed) {
            any_failed = true;
            std::cerr << "seed " << s.seed << " FAILED: " << s.error << "\n";
            continue;
        }
        const MetricRecord& last = s.metrics.back();
        std::cout << "seed " << s.seed << ": updates " << last.update << ", accuracy "
                  << fmt_double(last.accuracy) << ", jargon "
                  << fmt_double(last.notational_jargon) << ", junior-dialect mass "
                  << fmt_double(junior_dialect_mass(last, cfg.junior_dialect))
                  << " (junior baseline accuracy "
                  << fmt_double(s.junior_baseline.accuracy) << ")\n";
    }
    std::cout << "artifacts under " << manifest.root.string() << "\n";
    if (any_failed) return 2;
    if (check) {
        std::vector<std::string> failures = check_setting(cfg, manifest);
        for (const std::string& f : failures) std::cerr << "check failed: " << f << "\n";
        if (!failures.empty()) return 3;
        std::cout << "checks passed\n";
    }
    return 0;
}

}  // namespace

int cli(int argc, char** argv) {
    CLI::App app{"tandem training testbed for co-generating language models"};
    app.require_subcommand(1);
    int rc = 0;

    // gen-corpus
    auto* gen = app.add_subcommand("gen-corpus",
                                   "generate synthetic problems and dialect corpora");
    std::string gen_out, gen_check;
    int gen_count = 500;
    uint64_t gen_seed = 1;
    gen->add_option("--out", gen_out, "output directory");
    gen->add_option("--count", gen_count, "number of problems");
    gen->add_option("--seed", gen_seed, "generation seed");
    gen->add_option("--check", gen_check, "validate an existing corpus file instead");
    gen->callback([&] { rc = cmd_gen_corpus(gen_out, gen_count, gen_seed, gen_check); });

    // pretrain
    auto* pre = app.add_subcommand("pretrain", "supervised pretraining on a corpus");
    std::string pre_vocab, pre_corpus, pre_out;
    int pre_epochs = 15;
    double pre_lr = 0.2;
    uint64_t pre_seed = 1;
    ModelConfig pre_mc;
    bool pre_freeze = false;
    pre->add_option("--vocab", pre_vocab, "vocabulary file")->required();
    pre->add_option("--corpus", pre_corpus, "corpus jsonl")->required();
    pre->add_option("--out", pre_out, "output model file")->required();
    pre->add_option("--epochs", pre_epochs, "training epochs");
    pre->add_option("--lr", pre_lr, "learning rate");
    pre->add_option("--seed", pre_seed, "seed");
    pre->add_option("--context-window", pre_mc.context_window, "context window");
    pre->add_option("--embedding-dim", pre_mc.embedding_dim, "embedding dimension");
    pre->add_option("--hidden-dim", pre_mc.hidden_dim, "hidden dimension");
    pre->add_flag("--freeze", pre_freeze, "mark the saved model frozen");
    pre->callback([&] {
        rc = cmd_pretrain(pre_vocab, pre_corpus, pre_out, pre_epochs, pre_lr, pre_seed, pre_mc,
                          pre_freeze);
    });

    // tandem-train
    auto* tt = app.add_subcommand("tandem-train", "reinforcement loop over tandem rollouts");
    std::string tt_vocab, tt_senior, tt_junior, tt_problems, tt_out, tt_config;
    std::string tt_sdialect = "avon", tt_jdialect = "avon";
    uint64_t tt_seed = 1;
    tt->add_option("--vocab", tt_vocab, "vocabulary file")->required();
    tt->add_option("--senior", tt_senior, "senior model file")->required();
    tt->add_option("--junior", tt_junior, "junior model file")->required();
    tt->add_option("--problems", tt_problems, "training problems jsonl")->required();
    tt->add_option("--out-dir", tt_out, "checkpoint/log directory")->required();
    tt->add_option("--senior-dialect", tt_sdialect, "dialect of the senior's questions");
    tt->add_option("--junior-dialect", tt_jdialect, "dialect of the junior's questions");
    tt->add_option("--seed", tt_seed, "training seed");
    tt->add_option("--config", tt_config, "key = value hyperparameter file");
    tt->callback([&] {
        rc = cmd_tandem_train(tt_vocab, tt_senior, tt_junior, tt_problems, tt_out, tt_sdialect,
                              tt_jdialect, tt_seed, tt_config);
    });

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "solo-evaluate a checkpoint on a problem set");
    std::string ev_vocab, ev_ckpt, ev_problems, ev_out;
    std::string ev_dialect = "avon";
    int ev_max = 64;
    ev->add_option("--vocab", ev_vocab, "vocabulary file")->required();
    ev->add_option("--ckpt", ev_ckpt, "checkpoint file")->required();
    ev->add_option("--problems", ev_problems, "problems jsonl")->required();
    ev->add_option("--dialect", ev_dialect, "prompt dialect");
    ev->add_option("--max-output", ev_max, "max output tokens");
    ev->add_option("--out", ev_out, "write a one-row metrics csv here");
    ev->callback([&] {
        rc = cmd_evaluate(ev_vocab, ev_ckpt, ev_problems, ev_dialect, ev_max, ev_out);
    });

    // report
    auto* rep = app.add_subcommand("report", "aggregate per-seed metrics into mean/min/max bands");
    std::string rep_dir;
    rep->add_option("--dir", rep_dir, "setting directory containing seed_*/")->required();
    rep->callback([&] {
        std::string out = aggregate_report(rep_dir);
        std::cout << out;
        write_file_atomic(fs::path(rep_dir) / "report.csv", out);
    });

    // trace
    auto* tr = app.add_subcommand("trace", "print one tandem rollout token by token");
    std::string tr_vocab, tr_senior, tr_junior, tr_problems;
    std::string tr_sdialect = "avon", tr_jdialect = "avon";
    int tr_index = 0;
    uint64_t tr_seed = 1;
    double tr_p = 0.5;
    tr->add_option("--vocab", tr_vocab, "vocabulary file")->required();
    tr->add_option("--senior", tr_senior, "senior model file")->required();
    tr->add_option("--junior", tr_junior, "junior model file")->required();
    tr->add_option("--problems", tr_problems, "problems jsonl")->required();
    tr->add_option("--index", tr_index, "problem index");
    tr->add_option("--seed", tr_seed, "rollout seed");
    tr->add_option("--senior-dialect", tr_sdialect, "senior question dialect");
    tr->add_option("--junior-dialect", tr_jdialect, "junior question dialect");
    tr->add_option("--handoff-prob", tr_p, "handoff probability");
    tr->callback([&] {
        rc = cmd_trace(tr_vocab, tr_senior, tr_junior, tr_problems, tr_index, tr_seed,
                       tr_sdialect, tr_jdialect, tr_p);
    });

    // reproduce
    auto* repr = app.add_subcommand("reproduce", "run a full preset across seeds");
    std::string repr_setting, repr_out, repr_config;
    int repr_seeds = 0;
    bool repr_check = false;
    repr->add_option("setting", repr_setting, "skill | skill_language | language | ablation")
        ->required();
    repr->add_option("--seeds", repr_seeds, "run seeds 1..N (default: preset seeds)");
    repr->add_option("--out", repr_out, "output root (default $TANDEM_OUT or ./out)");
    repr->add_option("--config", repr_config, "key = value overrides");
    repr->add_flag("--check", repr_check, "assert the preset's expected outcome afterwards");
    repr->callback([&] {
        rc = cmd_reproduce(repr_setting, repr_seeds, repr_out, repr_config, repr_check);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;  // usage problems map to exit 1
    } catch (const ConfigError& e) {
        std::cerr << e.what() << "\n";
        return 1;
    } catch (const MalformedRecordError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return 2;
    }
    return rc;
}

}  // namespace tandem
