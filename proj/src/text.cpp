#include "tandem/text.hpp"

#include <algorithm>
#include <sstream>

namespace tandem {

namespace {

const TokenInfo kReserved[3] = {
    {"<bos>", false, false},
    {"<eos>", false, false},
    {"<pad>", false, false},
};

}  // namespace

void Vocabulary::index_token(TokenId id) {
    const TokenInfo& t = tokens_[static_cast<size_t>(id)];
    if (is_reserved(id)) return;  // reserved tokens are not matchable text
    auto& map = t.is_continuation ? cont_ids_ : start_ids_;
    auto [it, inserted] = map.emplace(t.surface, id);
    (void)it;
    if (!inserted) {
        throw ConfigError("duplicate vocabulary entry '" + t.surface +
                          (t.is_continuation ? "' (continuation)" : "' (word-start)"));
    }
    auto& max_len = t.is_continuation ? max_len_cont_ : max_len_start_;
    max_len = std::max(max_len, t.surface.size());
}

Vocabulary Vocabulary::build(const std::vector<TokenInfo>& tokens) {
    Vocabulary v;
    v.tokens_.assign(std::begin(kReserved), std::end(kReserved));
    v.tokens_.insert(v.tokens_.end(), tokens.begin(), tokens.end());
    for (TokenId id = 0; id < v.size(); ++id) v.index_token(id);
    return v;
}

std::string Vocabulary::serialize() const {
    std::ostringstream out;
    for (const TokenInfo& t : tokens_) {
        out << t.surface << "\tcont=" << (t.is_continuation ? 1 : 0)
            << "\teos_sent=" << (t.is_sentence_terminator ? 1 : 0) << "\n";
    }
    return out.str();
}

void Vocabulary::save(const std::filesystem::path& path) const {
    write_file_atomic(path, serialize());
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
    std::string content = read_file(path);
    std::vector<TokenInfo> rows;
    size_t line_no = 0;
    size_t pos = 0;
    while (pos < content.size()) {
        size_t end = content.find('\n', pos);
        if (end == std::string::npos) end = content.size();
        std::string line = content.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (line.empty()) continue;
        size_t t1 = line.find('\t');
        size_t t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
        if (t1 == std::string::npos || t2 == std::string::npos)
            throw MalformedRecordError(line_no, "expected 3 tab-separated fields");
        std::string surface = line.substr(0, t1);
        std::string f1 = line.substr(t1 + 1, t2 - t1 - 1);
        std::string f2 = line.substr(t2 + 1);
        auto flag = [&](const std::string& field, std::string_view key) -> bool {
            std::string prefix = std::string(key) + "=";
            if (!starts_with(field, prefix) || field.size() != prefix.size() + 1 ||
                (field.back() != '0' && field.back() != '1'))
                throw MalformedRecordError(line_no, "bad flag field '" + field + "'");
            return field.back() == '1';
        };
        rows.push_back({surface, flag(f1, "cont"), flag(f2, "eos_sent")});
    }
    if (rows.size() < 3) throw MalformedRecordError(0, "vocabulary lacks reserved rows");
    // Lines 0-2 are the reserved tokens by position; drop them and rebuild so
    // the reserved block is always in canonical form.
    rows.erase(rows.begin(), rows.begin() + 3);
    return build(rows);
}

std::optional<TokenId> Vocabulary::find(std::string_view surface, bool continuation) const {
    const auto& map = continuation ? cont_ids_ : start_ids_;
    auto it = map.find(std::string(surface));
    if (it == map.end()) return std::nullopt;
    return it->second;
}

std::vector<TokenId> tokenize(std::string_view text, const Vocabulary& vocab) {
    std::vector<TokenId> out;
    for (const std::string& word : split_whitespace(text)) {
        size_t pos = 0;
        bool at_word_start = true;
        while (pos < word.size()) {
            const bool cont = !at_word_start;
            size_t longest = std::min(word.size() - pos, vocab.max_surface_length(cont));
            std::optional<TokenId> match;
            for (size_t len = longest; len >= 1; --len) {
                match = vocab.find(std::string_view(word).substr(pos, len), cont);
                if (match) {
                    pos += len;
                    break;
                }
            }
            if (!match) throw UnknownTokenError(word);
            out.push_back(*match);
            at_word_start = false;
        }
    }
    return out;
}

std::string detokenize(const std::vector<TokenId>& tokens, const Vocabulary& vocab) {
    std::string out;
    for (TokenId id : tokens) {
        if (vocab.is_reserved(id)) continue;
        const TokenInfo& t = vocab.info(id);
        if (!t.is_continuation && !out.empty()) out += ' ';
        out += t.surface;
    }
    return out;
}

bool begins_new_unit(const std::vector<TokenId>& history, TokenId candidate,
                     Granularity granularity, const Vocabulary& vocab) {
    if (history.empty()) return true;
    switch (granularity) {
        case Granularity::Token:
            return true;
        case Granularity::Word:
            return !vocab.info(candidate).is_continuation;
        case Granularity::Sentence:
            return vocab.info(history.back()).is_sentence_terminator;
    }
    return true;
}

}  // namespace tandem
