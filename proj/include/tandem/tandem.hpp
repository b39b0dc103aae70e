#pragma once

// Two-model co-generation with stochastic handoffs.
//
// One model is "active" at a time. Each step the active model samples a
// proposal from its own rng stream; if that proposal would begin a new unit
// (token/word/sentence granularity), a coin decides who generates next: the
// junior with probability p, otherwise the senior. When the coin hands
// control to the other model, the newly active model samples its own proposal
// and that token is appended without re-testing the boundary. Every appended
// token is pushed into both models' contexts, so the pair always extends one
// shared response.
//
// Coins come from a CoinSource rather than the token rng streams. That split
// makes two things exactly reproducible: a p=0 fixed-senior rollout consumes
// the senior stream exactly like solo decoding, and a paired rollout can
// replay the first rollout's coins inverted while sampling fresh tokens.

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "tandem/common.hpp"
#include "tandem/model.hpp"
#include "tandem/text.hpp"

namespace tandem {

enum class Author : uint8_t { Senior, Junior };
enum class InitialModelRule { RandomUniform, FixedSenior, FixedJunior };
enum class Termination : uint8_t { Eos, MaxLen };

struct TandemConfig {
    double handoff_prob = 0.5;  // probability a boundary coin selects the junior
    Granularity granularity = Granularity::Word;
    int max_output_tokens = 256;
    double rollout_temperature = 0.7;
    InitialModelRule initial_model_rule = InitialModelRule::RandomUniform;

    void validate() const;
};

// Supplies boundary coins: fresh draws, an exact replay of a recorded
// sequence, or the negation of a recorded sequence followed by fresh draws
// from an extension stream once the record runs out.
class CoinSource {
public:
    static CoinSource fresh(uint64_t seed);
    static CoinSource replay(std::vector<bool> record);
    static CoinSource invert(std::vector<bool> record, uint64_t extension_seed);

    // true = junior selected. p only affects fresh draws; replayed and
    // inverted coins are returned as recorded.
    bool draw(double p);
    size_t drawn() const { return drawn_; }

private:
    enum class Mode { Fresh, Replay, Invert };
    CoinSource(Mode mode, std::vector<bool> record, uint64_t seed, bool has_rng);

    Mode mode_;
    std::vector<bool> record_;
    size_t next_ = 0;
    size_t drawn_ = 0;
    Rng rng_;
    bool has_rng_ = false;
};

struct Rollout {
    static constexpr int kRewardUnset = -1;

    std::vector<TokenId> prompt_sen;
    std::vector<TokenId> prompt_jun;
    std::vector<TokenId> response;
    std::vector<Author> authorship;      // one entry per response token
    std::vector<bool> boundary;          // proposal-began-new-unit flag per position
    std::vector<bool> coin_record;       // every coin drawn, initial coin first if any
    Termination terminated_by = Termination::MaxLen;
    int reward = kRewardUnset;
};

// Token rng streams are derived from `seed` per model; a fixed-senior p=0
// rollout therefore reproduces solo_decode(senior, ..., senior_stream(seed)).
Rng senior_stream(uint64_t seed);
Rng junior_stream(uint64_t seed);

Rollout tandem_rollout(const PolicyModel& senior, const PolicyModel& junior,
                       std::span<const TokenId> prompt_sen, std::span<const TokenId> prompt_jun,
                       const Vocabulary& vocab, const TandemConfig& cfg, CoinSource& coins,
                       uint64_t seed);

// First rollout draws fresh coins; the second replays them inverted (so the
// initial actives and every boundary choice differ) with fresh token streams.
// Requires RANDOM_UNIFORM, since inverting a deterministic initial-model rule
// is not meaningful.
std::pair<Rollout, Rollout> paired_rollouts(const PolicyModel& senior, const PolicyModel& junior,
                                            std::span<const TokenId> prompt_sen,
                                            std::span<const TokenId> prompt_jun,
                                            const Vocabulary& vocab, const TandemConfig& cfg,
                                            uint64_t seed);

// Plain autoregressive decoding; returns generated tokens (EOS included when
// it terminates the sequence).
std::vector<TokenId> solo_decode(const PolicyModel& model, std::span<const TokenId> prompt,
                                 double temperature, int max_len, Rng& rng);

// Debug dump: one tab-separated line per response token with position,
// surface, author, boundary flag and the coin consumed at that position.
std::string format_trace(const Rollout& rollout, const Vocabulary& vocab);

}  // namespace tandem
