#pragma once

// Two training phases.
//
// Phase one is supervised pre-training: plain likelihood maximisation over
// (prompt, solution) pairs, used to manufacture a competent senior and a
// weaker junior from the same architecture.
//
// Phase two is the reinforcement loop: every update draws two tandem rollouts
// per problem (paired with inverted coins when the initial model is
// randomized), keeps the rollouts whose final answer verifies, and takes one
// gradient step that raises the senior's log-likelihood of those responses.
// Incorrect rollouts are discarded outright; a batch with no correct rollout
// changes nothing.
//
// All randomness is derived statelessly from (seed, update index, slot), so a
// checkpoint only needs the seed and the update counter to resume bit-exactly.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tandem/model.hpp"
#include "tandem/tandem.hpp"
#include "tandem/tasks.hpp"
#include "tandem/text.hpp"

namespace tandem {

struct TrainConfig {
    double learning_rate = 1e-4;
    int batch_size = 32;
    int rollouts_per_prompt = 2;
    double train_temperature = 0.7;
    double test_temperature = 0.0;
    int max_output_tokens = 256;
    bool mask_junior_tokens = false;   // when true, junior-authored positions carry no gradient
    bool learn_from_negatives = false; // reserved; enabling it is an error for now
    int checkpoint_every = 10;
    int epochs = 1;
    uint64_t seed = 0;

    void validate() const;
};

// How each side of the pair sees a problem: which dialect's question text it
// gets and through which renderer (plain for specialists, demos for a base
// model).
struct PromptPlan {
    PromptRenderer senior_renderer;
    PromptRenderer junior_renderer;
    std::string senior_dialect;
    std::string junior_dialect;
};

// ------------------------------------------------------------- pretraining --

struct PretrainExample {
    std::vector<TokenId> prompt;
    std::vector<TokenId> target;  // solution tokens followed by EOS
};

struct PretrainReport {
    std::vector<double> epoch_mean_nll;  // mean per-token NLL, one entry per epoch
};

std::vector<PretrainExample> build_pretrain_examples(const std::vector<CorpusRecord>& records,
                                                     const PromptRenderer& renderer,
                                                     const Vocabulary& vocab);

// Gradient ascent on log-likelihood over shuffled minibatches; loss is only
// taken on target positions (the prompt is conditioning context).
PretrainReport pretrain_supervised(PolicyModel& model,
                                   const std::vector<PretrainExample>& corpus, int epochs,
                                   double learning_rate, uint64_t seed);

// ---------------------------------------------------------------- RL phase --

struct StepReport {
    int update = 0;
    int n_rollouts = 0;
    int n_correct = 0;
    double mean_reward = 0.0;
    double grad_norm = 0.0;
    double wall_ms = 0.0;
};

struct ProbeRecord {
    int update = 0;
    double mean_reward = 0.0;
};

StepReport reinforce_step(PolicyModel& senior, const PolicyModel& junior,
                          const std::vector<const Problem*>& batch, const PromptPlan& plan,
                          const Vocabulary& vocab, const TrainConfig& cfg,
                          const TandemConfig& tandem_cfg, uint64_t step_seed);

struct Checkpoint {
    int update_index = 0;
    uint64_t master_seed = 0;  // with the update index this is the full rng state
    uint64_t config_hash = 0;
    std::string model_blob;    // serialized senior

    void save(const std::filesystem::path& path) const;
    static Checkpoint load(const std::filesystem::path& path);
    PolicyModel restore_model(const Vocabulary& vocab) const;
};

std::string checkpoint_filename(int update_index);
uint64_t train_config_hash(const TrainConfig& cfg, const TandemConfig& tandem_cfg);

struct TrainResult {
    std::vector<Checkpoint> checkpoints;  // update 0 first, then every interval + final
    std::vector<StepReport> log;
    std::vector<ProbeRecord> probes;      // fixed-batch reward probe at checkpoint times
};

// Runs cfg.epochs over train_set in shuffled batches. Checkpoints (including
// the pre-training state at update 0) are returned and, when out_dir is set,
// written to ckpt_{update:06}.bin as training progresses. Passing
// resume_from_update > 0 with a senior restored from that checkpoint replays
// the schedule bit-exactly from that point; earlier updates are skipped.
TrainResult tandem_train(PolicyModel& senior, const PolicyModel& junior,
                         const std::vector<Problem>& train_set, const PromptPlan& plan,
                         const Vocabulary& vocab, const TrainConfig& cfg,
                         const TandemConfig& tandem_cfg,
                         const std::optional<std::filesystem::path>& out_dir = std::nullopt,
                         int resume_from_update = 0);

// -------------------------------------------------------------- evaluation --

struct EvalReport {
    double accuracy = 0.0;
    std::vector<std::string> outputs;  // detokenized answers in problem order
};

// Solo decoding per problem (no junior involved); temperature 0 is the
// standard test-time setting and consumes no randomness.
EvalReport evaluate(const PolicyModel& model, const std::vector<Problem>& test_set,
                    const PromptRenderer& renderer, const std::string& dialect,
                    const Vocabulary& vocab, double temperature, int max_output_tokens,
                    uint64_t seed = 0);

}  // namespace tandem
