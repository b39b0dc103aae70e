#include "tandem/tandem.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace tandem {

namespace {

constexpr uint64_t kSeniorStreamTag = fnv1a64("senior-tokens");
constexpr uint64_t kJuniorStreamTag = fnv1a64("junior-tokens");
constexpr uint64_t kPairFirstTag = fnv1a64("pair-first");
constexpr uint64_t kPairSecondTag = fnv1a64("pair-second");
constexpr uint64_t kPairCoinsTag = fnv1a64("pair-coins");
constexpr uint64_t kPairCoinExtTag = fnv1a64("pair-coin-extension");

}  // namespace

void TandemConfig::validate() const {
    if (handoff_prob < 0.0 || handoff_prob > 1.0)
        throw ConfigError("handoff probability must be in [0, 1]");
    if (max_output_tokens < 1) throw ConfigError("max_output_tokens must be >= 1");
    if (rollout_temperature < 0.0) throw ConfigError("rollout temperature must be >= 0");
}

CoinSource::CoinSource(Mode mode, std::vector<bool> record, uint64_t seed, bool has_rng)
    : mode_(mode), record_(std::move(record)), rng_(splitmix64(seed)), has_rng_(has_rng) {}

CoinSource CoinSource::fresh(uint64_t seed) { return CoinSource(Mode::Fresh, {}, seed, true); }

CoinSource CoinSource::replay(std::vector<bool> record) {
    return CoinSource(Mode::Replay, std::move(record), 0, false);
}

CoinSource CoinSource::invert(std::vector<bool> record, uint64_t extension_seed) {
    return CoinSource(Mode::Invert, std::move(record), extension_seed, true);
}

bool CoinSource::draw(double p) {
    ++drawn_;
    switch (mode_) {
        case Mode::Fresh:
            return uniform_unit(rng_) < p;
        case Mode::Replay:
            if (next_ >= record_.size()) throw std::out_of_range("coin record exhausted");
            return record_[next_++];
        case Mode::Invert:
            if (next_ < record_.size()) return !record_[next_++];
            return uniform_unit(rng_) < p;  // past the record: fresh extension draws
    }
    return false;
}

Rng senior_stream(uint64_t seed) { return Rng(splitmix64(mix_seed(seed, kSeniorStreamTag))); }
Rng junior_stream(uint64_t seed) { return Rng(splitmix64(mix_seed(seed, kJuniorStreamTag))); }

Rollout tandem_rollout(const PolicyModel& senior, const PolicyModel& junior,
                       std::span<const TokenId> prompt_sen, std::span<const TokenId> prompt_jun,
                       const Vocabulary& vocab, const TandemConfig& cfg, CoinSource& coins,
                       uint64_t seed) {
    cfg.validate();
    if (senior.vocab_hash() != junior.vocab_hash())
        throw ConfigError("tandem models must share one vocabulary");

    Rollout r;
    r.prompt_sen.assign(prompt_sen.begin(), prompt_sen.end());
    r.prompt_jun.assign(prompt_jun.begin(), prompt_jun.end());

    Rng sen_rng = senior_stream(seed);
    Rng jun_rng = junior_stream(seed);
    std::vector<TokenId> hist_sen = r.prompt_sen;
    std::vector<TokenId> hist_jun = r.prompt_jun;

    Author active = Author::Senior;
    switch (cfg.initial_model_rule) {
        case InitialModelRule::RandomUniform: {
            bool c = coins.draw(cfg.handoff_prob);
            r.coin_record.push_back(c);
            active = c ? Author::Junior : Author::Senior;
            break;
        }
        case InitialModelRule::FixedSenior:
            active = Author::Senior;
            break;
        case InitialModelRule::FixedJunior:
            active = Author::Junior;
            break;
    }

    auto propose = [&](Author who) {
        return who == Author::Senior
                   ? senior.sample_next(hist_sen, cfg.rollout_temperature, sen_rng)
                   : junior.sample_next(hist_jun, cfg.rollout_temperature, jun_rng);
    };

    r.terminated_by = Termination::MaxLen;
    for (int t = 0; t < cfg.max_output_tokens; ++t) {
        TokenId chosen = propose(active);
        bool at_boundary = begins_new_unit(r.response, chosen, cfg.granularity, vocab);
        if (at_boundary) {
            bool c = coins.draw(cfg.handoff_prob);
            r.coin_record.push_back(c);
            Author next_active = c ? Author::Junior : Author::Senior;
            if (next_active != active) {
                active = next_active;
                chosen = propose(active);  // appended without re-testing the boundary
            }
        }
        r.response.push_back(chosen);
        hist_sen.push_back(chosen);
        hist_jun.push_back(chosen);
        r.authorship.push_back(active);
        r.boundary.push_back(at_boundary);
        if (chosen == Vocabulary::kEos) {
            r.terminated_by = Termination::Eos;
            break;
        }
    }
    return r;
}

std::pair<Rollout, Rollout> paired_rollouts(const PolicyModel& senior, const PolicyModel& junior,
                                            std::span<const TokenId> prompt_sen,
                                            std::span<const TokenId> prompt_jun,
                                            const Vocabulary& vocab, const TandemConfig& cfg,
                                            uint64_t seed) {
    if (cfg.initial_model_rule != InitialModelRule::RandomUniform)
        throw ConfigError("paired rollouts require a randomly chosen initial model");
    CoinSource first_coins = CoinSource::fresh(mix_seed(seed, kPairCoinsTag));
    Rollout first = tandem_rollout(senior, junior, prompt_sen, prompt_jun, vocab, cfg,
                                   first_coins, mix_seed(seed, kPairFirstTag));
    CoinSource second_coins =
        CoinSource::invert(first.coin_record, mix_seed(seed, kPairCoinExtTag));
    Rollout second = tandem_rollout(senior, junior, prompt_sen, prompt_jun, vocab, cfg,
                                    second_coins, mix_seed(seed, kPairSecondTag));
    return {std::move(first), std::move(second)};
}

std::vector<TokenId> solo_decode(const PolicyModel& model, std::span<const TokenId> prompt,
                                 double temperature, int max_len, Rng& rng) {
    std::vector<TokenId> hist(prompt.begin(), prompt.end());
    std::vector<TokenId> out;
    for (int t = 0; t < max_len; ++t) {
        TokenId next = model.sample_next(hist, temperature, rng);
        out.push_back(next);
        hist.push_back(next);
        if (next == Vocabulary::kEos) break;
    }
    return out;
}

std::string format_trace(const Rollout& rollout, const Vocabulary& vocab) {
    std::ostringstream out;
    // Coins map onto positions in order: one leading coin if the initial model
    // was randomized, then one per boundary position.
    size_t coin_i = 0;
    bool had_initial = rollout.coin_record.size() > 0 &&
                       rollout.coin_record.size() >
                           static_cast<size_t>(std::count(rollout.boundary.begin(),
                                                          rollout.boundary.end(), true));
    if (had_initial) {
        out << "init\t-\t-\t-\t" << (rollout.coin_record[coin_i++] ? "JUN" : "SEN") << "\n";
    }
    for (size_t i = 0; i < rollout.response.size(); ++i) {
        out << i << '\t' << vocab.surface(rollout.response[i]) << '\t'
            << (rollout.authorship[i] == Author::Senior ? "SEN" : "JUN") << '\t'
            << (rollout.boundary[i] ? 1 : 0) << '\t';
        if (rollout.boundary[i] && coin_i < rollout.coin_record.size())
            out << (rollout.coin_record[coin_i++] ? "JUN" : "SEN");
        else
            out << '-';
        out << '\n';
    }
    return out.str();
}

}  // namespace tandem
