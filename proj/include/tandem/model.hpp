#pragma once

// Small feed-forward next-token model plus prompt rendering.
//
// The model predicts the next token from a fixed-width window of the most
// recent tokens (left-padded with <pad> near the start of a sequence).  Each
// window position is embedded, the embeddings are concatenated and pushed
// through one tanh layer, and a linear output layer produces logits over the
// vocabulary.  The output layer starts at zero so an untrained model assigns
// a uniform next-token distribution.
//
// Training is plain gradient ascent on accumulated log-likelihood terms:
// callers accumulate weighted d/dθ log p(target | context) and then apply one
// SGD step.  Backpropagation is written out by hand; everything is double
// precision so gradients can be checked against finite differences.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tandem/common.hpp"
#include "tandem/text.hpp"

namespace tandem {

struct ModelConfig {
    int context_window = 20;
    int embedding_dim = 16;
    int hidden_dim = 96;
};

class PolicyModel {
public:
    PolicyModel(const Vocabulary& vocab, const ModelConfig& config, uint64_t init_seed);

    int vocab_size() const { return v_; }
    const ModelConfig& config() const { return config_; }
    uint64_t vocab_hash() const { return vocab_hash_; }
    size_t param_count() const;

    bool frozen() const { return frozen_; }
    void set_frozen(bool frozen) { frozen_ = frozen; }

    // Next-token logits given the full token history (prompt + generations).
    std::vector<double> logits(std::span<const TokenId> history) const;
    std::vector<double> log_softmax(std::span<const TokenId> history) const;

    // temperature == 0 picks the argmax (ties resolved to the lowest id) and
    // consumes no randomness; otherwise samples from softmax(logits / T).
    TokenId sample_next(std::span<const TokenId> history, double temperature, Rng& rng) const;

    double token_log_prob(std::span<const TokenId> history, TokenId target) const;
    double sequence_log_likelihood(std::span<const TokenId> prompt,
                                   std::span<const TokenId> completion) const;

    // Adds weight * d/dθ log p(target | history) to the gradient accumulator.
    // Throws FrozenModelError when the model is frozen.
    void accumulate_log_prob_grad(std::span<const TokenId> history, TokenId target,
                                  double weight);
    double grad_norm() const;
    void zero_grad();
    // One ascent step θ += lr * grad, then clears the accumulator.
    void apply_sgd(double learning_rate);

    std::string serialize() const;
    static PolicyModel deserialize(std::string_view bytes, const Vocabulary& vocab);
    void save(const std::filesystem::path& path) const;
    static PolicyModel load(const std::filesystem::path& path, const Vocabulary& vocab);

    // Hash of configuration + parameters; handy for bit-exactness checks.
    uint64_t params_hash() const;

private:
    PolicyModel() = default;

    std::vector<TokenId> window(std::span<const TokenId> history) const;
    // Forward pass for one window; fills scratch_x_, scratch_h_ and returns logits.
    std::vector<double> forward(const std::vector<TokenId>& ctx) const;

    ModelConfig config_;
    int v_ = 0;
    uint64_t vocab_hash_ = 0;
    bool frozen_ = false;

    // Parameters (row-major): embedding [V x E], w1 [H x W*E], b1 [H],
    // w2 [V x H], b2 [V].  Gradients mirror the parameter layout.
    std::vector<double> embedding_, w1_, b1_, w2_, b2_;
    std::vector<double> g_embedding_, g_w1_, g_b1_, g_w2_, g_b2_;

    mutable std::vector<double> scratch_x_, scratch_h_;
};

// Prompt construction: optional preamble, optional demonstration pairs, then
// the question itself, joined with single spaces and tokenized.
struct PromptRenderer {
    struct Demo {
        std::string question;
        std::string answer;
    };

    std::string preamble;
    std::vector<Demo> demos;

    std::string render_text(const std::string& question) const;
    std::vector<TokenId> render(const Vocabulary& vocab, const std::string& question) const;
};

}  // namespace tandem
