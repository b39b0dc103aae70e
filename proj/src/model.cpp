#include "tandem/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace tandem {

namespace {

constexpr uint64_t kModelMagic = 0x31646f6d646e7464ULL;  // "tdndmod1"
constexpr uint32_t kModelVersion = 1;

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

void put_i32(std::string& out, int32_t v) { put_u32(out, static_cast<uint32_t>(v)); }

void put_f64_vec(std::string& out, const std::vector<double>& v) {
    out.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
}

struct ByteReader {
    std::string_view bytes;
    size_t pos = 0;

    void need(size_t n) const {
        if (pos + n > bytes.size()) throw IoError("model data truncated");
    }
    uint64_t get_u64() {
        need(8);
        uint64_t v;
        std::memcpy(&v, bytes.data() + pos, 8);
        pos += 8;
        return v;
    }
    uint32_t get_u32() {
        need(4);
        uint32_t v;
        std::memcpy(&v, bytes.data() + pos, 4);
        pos += 4;
        return v;
    }
    int32_t get_i32() { return static_cast<int32_t>(get_u32()); }
    void get_f64_vec(std::vector<double>& v, size_t count) {
        need(count * sizeof(double));
        v.resize(count);
        std::memcpy(v.data(), bytes.data() + pos, count * sizeof(double));
        pos += count * sizeof(double);
    }
};

std::vector<double> log_softmax_of(const std::vector<double>& logits) {
    double m = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double l : logits) sum += std::exp(l - m);
    double lse = m + std::log(sum);
    std::vector<double> out(logits.size());
    for (size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
    return out;
}

}  // namespace

PolicyModel::PolicyModel(const Vocabulary& vocab, const ModelConfig& config, uint64_t init_seed)
    : config_(config), v_(static_cast<int>(vocab.size())) {
    if (config.context_window < 1 || config.embedding_dim < 1 || config.hidden_dim < 1)
        throw ConfigError("model dimensions must be positive");
    vocab_hash_ = vocab.content_hash();
    const size_t v = static_cast<size_t>(v_);
    const size_t e = static_cast<size_t>(config_.embedding_dim);
    const size_t h = static_cast<size_t>(config_.hidden_dim);
    const size_t we = static_cast<size_t>(config_.context_window) * e;

    Rng rng(splitmix64(init_seed));
    auto uniform_fill = [&](std::vector<double>& t, size_t n) {
        t.resize(n);
        for (double& x : t) x = (uniform_unit(rng) * 2.0 - 1.0) * 0.1;
    };
    uniform_fill(embedding_, v * e);
    uniform_fill(w1_, h * we);
    uniform_fill(b1_, h);
    w2_.assign(v * h, 0.0);  // zero output layer => uniform initial distribution
    b2_.assign(v, 0.0);

    g_embedding_.assign(embedding_.size(), 0.0);
    g_w1_.assign(w1_.size(), 0.0);
    g_b1_.assign(b1_.size(), 0.0);
    g_w2_.assign(w2_.size(), 0.0);
    g_b2_.assign(b2_.size(), 0.0);
    scratch_x_.resize(we);
    scratch_h_.resize(h);
}

size_t PolicyModel::param_count() const {
    return embedding_.size() + w1_.size() + b1_.size() + w2_.size() + b2_.size();
}

std::vector<TokenId> PolicyModel::window(std::span<const TokenId> history) const {
    const size_t w = static_cast<size_t>(config_.context_window);
    std::vector<TokenId> ctx(w, Vocabulary::kPad);
    size_t take = std::min(history.size(), w);
    std::copy(history.end() - static_cast<ptrdiff_t>(take), history.end(),
              ctx.end() - static_cast<ptrdiff_t>(take));
    return ctx;
}

std::vector<double> PolicyModel::forward(const std::vector<TokenId>& ctx) const {
    const size_t e = static_cast<size_t>(config_.embedding_dim);
    const size_t h = static_cast<size_t>(config_.hidden_dim);
    const size_t we = scratch_x_.size();
    for (size_t i = 0; i < ctx.size(); ++i) {
        const double* row = embedding_.data() + static_cast<size_t>(ctx[i]) * e;
        std::copy(row, row + e, scratch_x_.data() + i * e);
    }
    for (size_t j = 0; j < h; ++j) {
        const double* row = w1_.data() + j * we;
        double acc = b1_[j];
        for (size_t k = 0; k < we; ++k) acc += row[k] * scratch_x_[k];
        scratch_h_[j] = std::tanh(acc);
    }
    std::vector<double> logits(static_cast<size_t>(v_));
    for (size_t i = 0; i < logits.size(); ++i) {
        const double* row = w2_.data() + i * h;
        double acc = b2_[i];
        for (size_t j = 0; j < h; ++j) acc += row[j] * scratch_h_[j];
        logits[i] = acc;
    }
    return logits;
}

std::vector<double> PolicyModel::logits(std::span<const TokenId> history) const {
    return forward(window(history));
}

std::vector<double> PolicyModel::log_softmax(std::span<const TokenId> history) const {
    return log_softmax_of(forward(window(history)));
}

TokenId PolicyModel::sample_next(std::span<const TokenId> history, double temperature,
                                 Rng& rng) const {
    if (temperature < 0) throw ConfigError("temperature must be >= 0");
    std::vector<double> l = logits(history);
    if (temperature == 0.0) {
        size_t best = 0;
        for (size_t i = 1; i < l.size(); ++i)
            if (l[i] > l[best]) best = i;  // strict '>' keeps the lowest id on ties
        return static_cast<TokenId>(best);
    }
    for (double& x : l) x /= temperature;
    std::vector<double> logp = log_softmax_of(l);
    double u = uniform_unit(rng);
    double cum = 0.0;
    for (size_t i = 0; i < logp.size(); ++i) {
        cum += std::exp(logp[i]);
        if (u < cum) return static_cast<TokenId>(i);
    }
    return static_cast<TokenId>(logp.size() - 1);  // guard against rounding at u ~ 1
}

double PolicyModel::token_log_prob(std::span<const TokenId> history, TokenId target) const {
    return log_softmax(history)[static_cast<size_t>(target)];
}

double PolicyModel::sequence_log_likelihood(std::span<const TokenId> prompt,
                                            std::span<const TokenId> completion) const {
    std::vector<TokenId> hist(prompt.begin(), prompt.end());
    double ll = 0.0;
    for (TokenId t : completion) {
        ll += token_log_prob(hist, t);
        hist.push_back(t);
    }
    return ll;
}

void PolicyModel::accumulate_log_prob_grad(std::span<const TokenId> history, TokenId target,
                                           double weight) {
    if (frozen_) throw FrozenModelError("cannot accumulate gradients into a frozen model");
    const size_t e = static_cast<size_t>(config_.embedding_dim);
    const size_t h = static_cast<size_t>(config_.hidden_dim);
    const size_t we = scratch_x_.size();

    std::vector<TokenId> ctx = window(history);
    std::vector<double> l = forward(ctx);  // fills scratch_x_, scratch_h_
    std::vector<double> logp = log_softmax_of(l);

    // d log p(y) / d logits = one_hot(y) - softmax(logits)
    std::vector<double> dlogits(l.size());
    for (size_t i = 0; i < l.size(); ++i) dlogits[i] = -std::exp(logp[i]);
    dlogits[static_cast<size_t>(target)] += 1.0;

    std::vector<double> dh(h, 0.0);
    for (size_t i = 0; i < dlogits.size(); ++i) {
        const double d = dlogits[i];
        g_b2_[i] += weight * d;
        double* grow = g_w2_.data() + i * h;
        const double* wrow = w2_.data() + i * h;
        for (size_t j = 0; j < h; ++j) {
            grow[j] += weight * d * scratch_h_[j];
            dh[j] += wrow[j] * d;
        }
    }

    std::vector<double> dx(we, 0.0);
    for (size_t j = 0; j < h; ++j) {
        const double dpre = dh[j] * (1.0 - scratch_h_[j] * scratch_h_[j]);
        g_b1_[j] += weight * dpre;
        double* grow = g_w1_.data() + j * we;
        const double* wrow = w1_.data() + j * we;
        for (size_t k = 0; k < we; ++k) {
            grow[k] += weight * dpre * scratch_x_[k];
            dx[k] += wrow[k] * dpre;
        }
    }

    for (size_t i = 0; i < ctx.size(); ++i) {
        double* grow = g_embedding_.data() + static_cast<size_t>(ctx[i]) * e;
        const double* src = dx.data() + i * e;
        for (size_t k = 0; k < e; ++k) grow[k] += weight * src[k];
    }
}

double PolicyModel::grad_norm() const {
    double sum = 0.0;
    for (const auto* g : {&g_embedding_, &g_w1_, &g_b1_, &g_w2_, &g_b2_})
        for (double x : *g) sum += x * x;
    return std::sqrt(sum);
}

void PolicyModel::zero_grad() {
    for (auto* g : {&g_embedding_, &g_w1_, &g_b1_, &g_w2_, &g_b2_})
        std::fill(g->begin(), g->end(), 0.0);
}

void PolicyModel::apply_sgd(double learning_rate) {
    if (frozen_) throw FrozenModelError("cannot update a frozen model");
    auto step = [&](std::vector<double>& p, std::vector<double>& g) {
        for (size_t i = 0; i < p.size(); ++i) p[i] += learning_rate * g[i];
        std::fill(g.begin(), g.end(), 0.0);
    };
    step(embedding_, g_embedding_);
    step(w1_, g_w1_);
    step(b1_, g_b1_);
    step(w2_, g_w2_);
    step(b2_, g_b2_);
}

std::string PolicyModel::serialize() const {
    std::string out;
    put_u64(out, kModelMagic);
    put_u32(out, kModelVersion);
    put_u64(out, vocab_hash_);
    put_i32(out, v_);
    put_i32(out, config_.context_window);
    put_i32(out, config_.embedding_dim);
    put_i32(out, config_.hidden_dim);
    out.push_back(frozen_ ? '\1' : '\0');
    put_f64_vec(out, embedding_);
    put_f64_vec(out, w1_);
    put_f64_vec(out, b1_);
    put_f64_vec(out, w2_);
    put_f64_vec(out, b2_);
    put_u64(out, fnv1a64(out));  // trailing checksum over everything above
    return out;
}

PolicyModel PolicyModel::deserialize(std::string_view bytes, const Vocabulary& vocab) {
    if (bytes.size() < 8) throw IoError("model data truncated");
    uint64_t stored_sum;
    std::memcpy(&stored_sum, bytes.data() + bytes.size() - 8, 8);
    if (fnv1a64(bytes.substr(0, bytes.size() - 8)) != stored_sum)
        throw IoError("model data failed checksum");

    ByteReader r{bytes.substr(0, bytes.size() - 8)};
    if (r.get_u64() != kModelMagic) throw IoError("not a model file");
    if (r.get_u32() != kModelVersion) throw IoError("unsupported model version");

    PolicyModel m;
    m.vocab_hash_ = r.get_u64();
    m.v_ = r.get_i32();
    m.config_.context_window = r.get_i32();
    m.config_.embedding_dim = r.get_i32();
    m.config_.hidden_dim = r.get_i32();
    r.need(1);
    m.frozen_ = r.bytes[r.pos++] != '\0';

    if (m.vocab_hash_ != vocab.content_hash())
        throw ConfigError("model was built against a different vocabulary");
    if (m.v_ != static_cast<int>(vocab.size()))
        throw ConfigError("model vocabulary size does not match");
    if (m.config_.context_window < 1 || m.config_.embedding_dim < 1 || m.config_.hidden_dim < 1)
        throw IoError("model data has invalid dimensions");

    const size_t v = static_cast<size_t>(m.v_);
    const size_t e = static_cast<size_t>(m.config_.embedding_dim);
    const size_t h = static_cast<size_t>(m.config_.hidden_dim);
    const size_t we = static_cast<size_t>(m.config_.context_window) * e;
    r.get_f64_vec(m.embedding_, v * e);
    r.get_f64_vec(m.w1_, h * we);
    r.get_f64_vec(m.b1_, h);
    r.get_f64_vec(m.w2_, v * h);
    r.get_f64_vec(m.b2_, v);
    if (r.pos != r.bytes.size()) throw IoError("model data has trailing bytes");

    m.g_embedding_.assign(m.embedding_.size(), 0.0);
    m.g_w1_.assign(m.w1_.size(), 0.0);
    m.g_b1_.assign(m.b1_.size(), 0.0);
    m.g_w2_.assign(m.w2_.size(), 0.0);
    m.g_b2_.assign(m.b2_.size(), 0.0);
    m.scratch_x_.resize(we);
    m.scratch_h_.resize(h);
    return m;
}

void PolicyModel::save(const std::filesystem::path& path) const {
    write_file_atomic(path, serialize());
}

PolicyModel PolicyModel::load(const std::filesystem::path& path, const Vocabulary& vocab) {
    return deserialize(read_file(path), vocab);
}

uint64_t PolicyModel::params_hash() const {
    std::string buf;
    put_i32(buf, v_);
    put_i32(buf, config_.context_window);
    put_i32(buf, config_.embedding_dim);
    put_i32(buf, config_.hidden_dim);
    for (const auto* t : {&embedding_, &w1_, &b1_, &w2_, &b2_})
        buf.append(reinterpret_cast<const char*>(t->data()), t->size() * sizeof(double));
    return fnv1a64(buf);
}

std::string PromptRenderer::render_text(const std::string& question) const {
    std::vector<std::string> parts;
    if (!preamble.empty()) parts.push_back(preamble);
    for (const Demo& d : demos) {
        parts.push_back(d.question);
        parts.push_back(d.answer);
    }
    parts.push_back(question);
    return join(parts, " ");
}

std::vector<TokenId> PromptRenderer::render(const Vocabulary& vocab,
                                            const std::string& question) const {
    return tokenize(render_text(question), vocab);
}

}  // namespace tandem
