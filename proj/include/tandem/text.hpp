#pragma once

// Token vocabulary and the unit-boundary predicate that drives handoffs.
//
// Text structure is deliberately simple: words are whitespace-separated, and
// a word may be built from one word-start token followed by continuation
// tokens (multi-digit numbers, attached punctuation, calculator spans).
// Sentence terminators are flagged so boundary tests can work at sentence
// granularity as well as token/word granularity.

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "tandem/common.hpp"

namespace tandem {

using TokenId = int32_t;

enum class Granularity { Token, Word, Sentence };

struct TokenInfo {
    std::string surface;
    bool is_continuation = false;        // glues to the previous token inside a word
    bool is_sentence_terminator = false; // ends a sentence when emitted
};

// Dense-id vocabulary. Ids 0..2 are always the reserved BOS/EOS/PAD tokens;
// the tokenizer never emits them and detokenize skips them.
class Vocabulary {
public:
    static constexpr TokenId kBos = 0;
    static constexpr TokenId kEos = 1;
    static constexpr TokenId kPad = 2;

    // Builds a vocabulary from non-reserved token definitions; reserved
    // tokens are prepended automatically. Duplicate (surface, continuation)
    // pairs are rejected since they would make lookup ambiguous.
    static Vocabulary build(const std::vector<TokenInfo>& tokens);

    // File format: one token per line, "surface<TAB>cont=0|1<TAB>eos_sent=0|1",
    // line number == token id, lines 0-2 reserved for BOS/EOS/PAD.
    static Vocabulary load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;
    std::string serialize() const;

    int size() const { return static_cast<int>(tokens_.size()); }
    const TokenInfo& info(TokenId id) const { return tokens_.at(static_cast<size_t>(id)); }
    const std::string& surface(TokenId id) const { return info(id).surface; }
    bool is_reserved(TokenId id) const { return id >= 0 && id <= 2; }

    // Lookup by surface within one class (word-start vs continuation).
    std::optional<TokenId> find(std::string_view surface, bool continuation) const;

    // Longest surface length per class, used by greedy matching.
    size_t max_surface_length(bool continuation) const {
        return continuation ? max_len_cont_ : max_len_start_;
    }

    // FNV-1a of the serialized table; checkpoints store this to detect
    // vocabulary drift on reload.
    uint64_t content_hash() const { return fnv1a64(serialize()); }

private:
    std::vector<TokenInfo> tokens_;
    std::unordered_map<std::string, TokenId> start_ids_;
    std::unordered_map<std::string, TokenId> cont_ids_;
    size_t max_len_start_ = 0;
    size_t max_len_cont_ = 0;

    void index_token(TokenId id);
};

// Whitespace split plus greedy longest-match decomposition of each word into
// one word-start token and zero or more continuation tokens. Total on the
// generator's output language; anything else raises UnknownTokenError.
std::vector<TokenId> tokenize(std::string_view text, const Vocabulary& vocab);

// Inverse of tokenize up to whitespace canonicalisation. Reserved tokens are
// skipped so decoded model output can be passed through directly.
std::string detokenize(const std::vector<TokenId>& tokens, const Vocabulary& vocab);

// True when appending `candidate` to `history` starts a new unit:
//   Token    - always
//   Word     - candidate is not a continuation token
//   Sentence - history ends with a sentence terminator
// An empty history always starts a new unit.
bool begins_new_unit(const std::vector<TokenId>& history, TokenId candidate,
                     Granularity granularity, const Vocabulary& vocab);

}  // namespace tandem
