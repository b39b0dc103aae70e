#include "tandem/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <numeric>

namespace tandem {

namespace {

constexpr uint64_t kShuffleTag = fnv1a64("shuffle");
constexpr uint64_t kStepTag = fnv1a64("step");
constexpr uint64_t kProbeTag = fnv1a64("probe");
constexpr uint64_t kPretrainShuffleTag = fnv1a64("pretrain-shuffle");
constexpr uint64_t kCoinsATag = fnv1a64("solo-coins-a");
constexpr uint64_t kCoinsBTag = fnv1a64("solo-coins-b");
constexpr uint64_t kTokensATag = fnv1a64("solo-tokens-a");
constexpr uint64_t kTokensBTag = fnv1a64("solo-tokens-b");

constexpr uint64_t kCheckpointMagic = 0x31747063646e7464ULL;  // "tdndcpt1"
constexpr uint32_t kCheckpointVersion = 1;

constexpr int kPretrainMinibatch = 16;

// Fisher-Yates with our deterministic uniform_int so shuffles are identical
// across standard libraries.
void deterministic_shuffle(std::vector<size_t>& v, Rng& rng) {
    for (size_t i = v.size(); i > 1; --i) {
        size_t j = static_cast<size_t>(uniform_int(rng, 0, static_cast<int64_t>(i) - 1));
        std::swap(v[i - 1], v[j]);
    }
}

struct ScoredRollout {
    Rollout rollout;
    int reward = 0;
};

void put_u64(std::string& out, uint64_t v) {
    char b[8];
    std::memcpy(b, &v, 8);
    out.append(b, 8);
}

void put_u32(std::string& out, uint32_t v) {
    char b[4];
    std::memcpy(b, &v, 4);
    out.append(b, 4);
}

uint64_t get_u64(std::string_view s, size_t& pos) {
    if (pos + 8 > s.size()) throw IoError("checkpoint data truncated");
    uint64_t v;
    std::memcpy(&v, s.data() + pos, 8);
    pos += 8;
    return v;
}

uint32_t get_u32(std::string_view s, size_t& pos) {
    if (pos + 4 > s.size()) throw IoError("checkpoint data truncated");
    uint32_t v;
    std::memcpy(&v, s.data() + pos, 4);
    pos += 4;
    return v;
}

}  // namespace

void TrainConfig::validate() const {
    if (learning_rate <= 0) throw ConfigError("learning_rate must be positive");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (rollouts_per_prompt < 1) throw ConfigError("rollouts_per_prompt must be >= 1");
    if (train_temperature < 0 || test_temperature < 0)
        throw ConfigError("temperatures must be >= 0");
    if (max_output_tokens < 1) throw ConfigError("max_output_tokens must be >= 1");
    if (checkpoint_every < 1) throw ConfigError("checkpoint_every must be >= 1");
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (learn_from_negatives)
        throw NotImplementedError("learning from negative examples");
}

// ------------------------------------------------------------- pretraining --

std::vector<PretrainExample> build_pretrain_examples(const std::vector<CorpusRecord>& records,
                                                     const PromptRenderer& renderer,
                                                     const Vocabulary& vocab) {
    std::vector<PretrainExample> out;
    out.reserve(records.size());
    for (const CorpusRecord& r : records) {
        PretrainExample ex;
        ex.prompt = renderer.render(vocab, r.question);
        ex.target = tokenize(r.solution, vocab);
        ex.target.push_back(Vocabulary::kEos);
        out.push_back(std::move(ex));
    }
    return out;
}

PretrainReport pretrain_supervised(PolicyModel& model,
                                   const std::vector<PretrainExample>& corpus, int epochs,
                                   double learning_rate, uint64_t seed) {
    if (corpus.empty()) throw InsufficientCorpusError("pretraining corpus is empty");
    if (model.frozen()) throw FrozenModelError();
    if (epochs < 0) throw ConfigError("epochs must be >= 0");

    PretrainReport report;
    std::vector<size_t> order(corpus.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<TokenId> hist;

    for (int epoch = 0; epoch < epochs; ++epoch) {
        Rng shuffle_rng(splitmix64(mix_seed(seed, kPretrainShuffleTag,
                                            static_cast<uint64_t>(epoch))));
        deterministic_shuffle(order, shuffle_rng);

        double nll_sum = 0.0;
        size_t nll_count = 0;
        for (size_t start = 0; start < order.size(); start += kPretrainMinibatch) {
            size_t end = std::min(order.size(), start + kPretrainMinibatch);
            size_t batch_tokens = 0;
            for (size_t i = start; i < end; ++i) batch_tokens += corpus[order[i]].target.size();
            const double w = 1.0 / static_cast<double>(batch_tokens);
            for (size_t i = start; i < end; ++i) {
                const PretrainExample& ex = corpus[order[i]];
                hist = ex.prompt;
                for (TokenId t : ex.target) {
                    nll_sum -= model.token_log_prob(hist, t);
                    ++nll_count;
                    model.accumulate_log_prob_grad(hist, t, w);
                    hist.push_back(t);
                }
            }
            model.apply_sgd(learning_rate);
        }
        report.epoch_mean_nll.push_back(nll_sum / static_cast<double>(nll_count));
    }
    return report;
}

// ---------------------------------------------------------------- RL phase --

namespace {

std::vector<ScoredRollout> draw_scored_rollouts(const PolicyModel& senior,
                                                const PolicyModel& junior, const Problem& problem,
                                                const PromptPlan& plan, const Vocabulary& vocab,
                                                const TrainConfig& cfg,
                                                const TandemConfig& tandem_cfg,
                                                uint64_t pair_seed) {
    std::vector<TokenId> prompt_sen =
        plan.senior_renderer.render(vocab, problem.question(plan.senior_dialect));
    std::vector<TokenId> prompt_jun =
        plan.junior_renderer.render(vocab, problem.question(plan.junior_dialect));

    std::vector<ScoredRollout> out;
    if (tandem_cfg.initial_model_rule == InitialModelRule::RandomUniform) {
        if (cfg.rollouts_per_prompt != 2)
            throw ConfigError("inverted-coin pairing requires rollouts_per_prompt = 2");
        auto [a, b] =
            paired_rollouts(senior, junior, prompt_sen, prompt_jun, vocab, tandem_cfg, pair_seed);
        out.push_back({std::move(a), 0});
        out.push_back({std::move(b), 0});
    } else {
        // A deterministic initial-model rule has no meaningful coin sequence
        // to invert, so the rollouts are simply independent.
        const uint64_t coin_tags[] = {kCoinsATag, kCoinsBTag};
        const uint64_t token_tags[] = {kTokensATag, kTokensBTag};
        for (int k = 0; k < cfg.rollouts_per_prompt; ++k) {
            CoinSource coins =
                CoinSource::fresh(mix_seed(pair_seed, coin_tags[k % 2], static_cast<uint64_t>(k)));
            Rollout r =
                tandem_rollout(senior, junior, prompt_sen, prompt_jun, vocab, tandem_cfg, coins,
                               mix_seed(pair_seed, token_tags[k % 2], static_cast<uint64_t>(k)));
            out.push_back({std::move(r), 0});
        }
    }
    for (ScoredRollout& s : out) {
        s.reward = verify(detokenize(s.rollout.response, vocab), problem);
        s.rollout.reward = s.reward;
    }
    return out;
}

}  // namespace

StepReport reinforce_step(PolicyModel& senior, const PolicyModel& junior,
                          const std::vector<const Problem*>& batch, const PromptPlan& plan,
                          const Vocabulary& vocab, const TrainConfig& cfg,
                          const TandemConfig& tandem_cfg, uint64_t step_seed) {
    if (!junior.frozen()) throw ConfigError("junior must be frozen during tandem training");
    if (senior.frozen()) throw FrozenModelError();
    auto t0 = std::chrono::steady_clock::now();

    TandemConfig roll_cfg = tandem_cfg;
    roll_cfg.rollout_temperature = cfg.train_temperature;
    roll_cfg.max_output_tokens = cfg.max_output_tokens;

    StepReport report;
    std::vector<ScoredRollout> scored;
    for (size_t i = 0; i < batch.size(); ++i) {
        uint64_t pair_seed = mix_seed(step_seed, static_cast<uint64_t>(i));
        for (ScoredRollout& s : draw_scored_rollouts(senior, junior, *batch[i], plan, vocab, cfg,
                                                     roll_cfg, pair_seed))
            scored.push_back(std::move(s));
    }

    report.n_rollouts = static_cast<int>(scored.size());
    for (const ScoredRollout& s : scored) report.n_correct += s.reward;
    report.mean_reward = scored.empty() ? 0.0
                                        : static_cast<double>(report.n_correct) /
                                              static_cast<double>(scored.size());

    if (report.n_correct > 0) {
        const double w = 1.0 / static_cast<double>(report.n_correct);
        senior.zero_grad();
        std::vector<TokenId> hist;
        for (const ScoredRollout& s : scored) {
            if (s.reward != 1) continue;  // incorrect rollouts are discarded
            hist = s.rollout.prompt_sen;
            for (size_t i = 0; i < s.rollout.response.size(); ++i) {
                bool counted =
                    !cfg.mask_junior_tokens || s.rollout.authorship[i] == Author::Senior;
                if (counted) senior.accumulate_log_prob_grad(hist, s.rollout.response[i], w);
                hist.push_back(s.rollout.response[i]);
            }
        }
        report.grad_norm = senior.grad_norm();
        senior.apply_sgd(cfg.learning_rate);
    }

    report.wall_ms = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - t0)
                         .count();
    return report;
}

// -------------------------------------------------------------- checkpoints --

std::string checkpoint_filename(int update_index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "ckpt_%06d.bin", update_index);
    return buf;
}

uint64_t train_config_hash(const TrainConfig& cfg, const TandemConfig& tandem_cfg) {
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "lr=%.17g bs=%d rpp=%d tt=%.17g et=%.17g mot=%d mask=%d neg=%d ce=%d ep=%d "
                  "p=%.17g gran=%d tmax=%d ttemp=%.17g init=%d",
                  cfg.learning_rate, cfg.batch_size, cfg.rollouts_per_prompt,
                  cfg.train_temperature, cfg.test_temperature, cfg.max_output_tokens,
                  cfg.mask_junior_tokens ? 1 : 0, cfg.learn_from_negatives ? 1 : 0,
                  cfg.checkpoint_every, cfg.epochs, tandem_cfg.handoff_prob,
                  static_cast<int>(tandem_cfg.granularity), tandem_cfg.max_output_tokens,
                  tandem_cfg.rollout_temperature,
                  static_cast<int>(tandem_cfg.initial_model_rule));
    return fnv1a64(buf);
}

void Checkpoint::save(const std::filesystem::path& path) const {
    std::string out;
    put_u64(out, kCheckpointMagic);
    put_u32(out, kCheckpointVersion);
    put_u32(out, static_cast<uint32_t>(update_index));
    put_u64(out, master_seed);
    put_u64(out, config_hash);
    put_u64(out, model_blob.size());
    out += model_blob;
    put_u64(out, fnv1a64(out));
    write_file_atomic(path, out);
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
    std::string data = read_file(path);
    if (data.size() < 8) throw IoError("checkpoint data truncated");
    uint64_t stored;
    std::memcpy(&stored, data.data() + data.size() - 8, 8);
    if (fnv1a64(std::string_view(data).substr(0, data.size() - 8)) != stored)
        throw IoError("checkpoint failed checksum");
    size_t pos = 0;
    std::string_view view(data);
    if (get_u64(view, pos) != kCheckpointMagic) throw IoError("not a checkpoint file");
    if (get_u32(view, pos) != kCheckpointVersion) throw IoError("unsupported checkpoint version");
    Checkpoint c;
    c.update_index = static_cast<int>(get_u32(view, pos));
    c.master_seed = get_u64(view, pos);
    c.config_hash = get_u64(view, pos);
    uint64_t blob_size = get_u64(view, pos);
    if (pos + blob_size > data.size() - 8) throw IoError("checkpoint data truncated");
    c.model_blob = data.substr(pos, blob_size);
    return c;
}

PolicyModel Checkpoint::restore_model(const Vocabulary& vocab) const {
    return PolicyModel::deserialize(model_blob, vocab);
}

// ------------------------------------------------------------ training loop --

namespace {

double probe_mean_reward(const PolicyModel& senior, const PolicyModel& junior,
                         const std::vector<const Problem*>& probe_set, const PromptPlan& plan,
                         const Vocabulary& vocab, const TrainConfig& cfg,
                         const TandemConfig& tandem_cfg, int update) {
    TandemConfig roll_cfg = tandem_cfg;
    roll_cfg.rollout_temperature = cfg.train_temperature;
    roll_cfg.max_output_tokens = cfg.max_output_tokens;
    int n = 0, correct = 0;
    for (size_t i = 0; i < probe_set.size(); ++i) {
        uint64_t pair_seed =
            mix_seed(mix_seed(cfg.seed, kProbeTag, static_cast<uint64_t>(update)),
                     static_cast<uint64_t>(i));
        for (const ScoredRollout& s : draw_scored_rollouts(
                 senior, junior, *probe_set[i], plan, vocab, cfg, roll_cfg, pair_seed)) {
            ++n;
            correct += s.reward;
        }
    }
    return n == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(n);
}

}  // namespace

TrainResult tandem_train(PolicyModel& senior, const PolicyModel& junior,
                         const std::vector<Problem>& train_set, const PromptPlan& plan,
                         const Vocabulary& vocab, const TrainConfig& cfg,
                         const TandemConfig& tandem_cfg,
                         const std::optional<std::filesystem::path>& out_dir,
                         int resume_from_update) {
    cfg.validate();
    tandem_cfg.validate();
    if (train_set.empty()) throw ConfigError("training set is empty");
    if (!junior.frozen()) throw ConfigError("junior must be frozen during tandem training");

    const uint64_t config_hash = train_config_hash(cfg, tandem_cfg);
    const size_t n = train_set.size();
    const int updates_per_epoch = static_cast<int>((n + static_cast<size_t>(cfg.batch_size) - 1) /
                                                   static_cast<size_t>(cfg.batch_size));
    const int total_updates = cfg.epochs * updates_per_epoch;

    std::vector<const Problem*> probe_set;
    for (size_t i = 0; i < std::min<size_t>(16, n); ++i) probe_set.push_back(&train_set[i]);

    TrainResult result;
    auto emit_checkpoint = [&](int update) {
        Checkpoint c;
        c.update_index = update;
        c.master_seed = cfg.seed;
        c.config_hash = config_hash;
        c.model_blob = senior.serialize();
        if (out_dir) c.save(*out_dir / checkpoint_filename(update));
        result.checkpoints.push_back(std::move(c));
        result.probes.push_back({update, probe_mean_reward(senior, junior, probe_set, plan, vocab,
                                                           cfg, tandem_cfg, update)});
    };

    if (resume_from_update == 0) emit_checkpoint(0);

    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    int update = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng shuffle_rng(
            splitmix64(mix_seed(cfg.seed, kShuffleTag, static_cast<uint64_t>(epoch))));
        deterministic_shuffle(order, shuffle_rng);
        for (size_t start = 0; start < n; start += static_cast<size_t>(cfg.batch_size)) {
            ++update;
            if (update <= resume_from_update) continue;  // replayed deterministically on resume
            size_t end = std::min(n, start + static_cast<size_t>(cfg.batch_size));
            std::vector<const Problem*> batch;
            batch.reserve(end - start);
            for (size_t i = start; i < end; ++i) batch.push_back(&train_set[order[i]]);

            StepReport report =
                reinforce_step(senior, junior, batch, plan, vocab, cfg, tandem_cfg,
                               mix_seed(cfg.seed, kStepTag, static_cast<uint64_t>(update)));
            report.update = update;
            result.log.push_back(report);

            if (update % cfg.checkpoint_every == 0 || update == total_updates)
                emit_checkpoint(update);
        }
    }
    return result;
}

// -------------------------------------------------------------- evaluation --

EvalReport evaluate(const PolicyModel& model, const std::vector<Problem>& test_set,
                    const PromptRenderer& renderer, const std::string& dialect,
                    const Vocabulary& vocab, double temperature, int max_output_tokens,
                    uint64_t seed) {
    EvalReport report;
    Rng rng(splitmix64(seed));
    size_t correct = 0;
    for (const Problem& p : test_set) {
        std::vector<TokenId> prompt = renderer.render(vocab, p.question(dialect));
        std::vector<TokenId> out = solo_decode(model, prompt, temperature, max_output_tokens, rng);
        std::string answer = detokenize(out, vocab);
        correct += static_cast<size_t>(verify(answer, p));
        report.outputs.push_back(std::move(answer));
    }
    if (!test_set.empty())
        report.accuracy = static_cast<double>(correct) / static_cast<double>(test_set.size());
    return report;
}

}  // namespace tandem
