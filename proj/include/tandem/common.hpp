#pragma once

// Shared plumbing: error types, deterministic RNG helpers, hashing and
// small file utilities used by every other module.

#include <cstdint>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tandem {

// ---------------------------------------------------------------- errors --

struct UnknownTokenError : std::runtime_error {
    explicit UnknownTokenError(const std::string& word)
        : std::runtime_error("unknown token: '" + word + "'") {}
};

struct FrozenModelError : std::runtime_error {
    FrozenModelError() : std::runtime_error("gradient operation on frozen model") {}
    explicit FrozenModelError(const std::string& why) : std::runtime_error(why) {}
};

struct MissingDialectError : std::runtime_error {
    explicit MissingDialectError(const std::string& dialect)
        : std::runtime_error("problem has no rendering for dialect '" + dialect + "'") {}
};

struct InsufficientCorpusError : std::runtime_error {
    explicit InsufficientCorpusError(const std::string& why)
        : std::runtime_error("insufficient corpus: " + why) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& why) : std::runtime_error("io error: " + why) {}
};

struct MalformedRecordError : std::runtime_error {
    MalformedRecordError(size_t line, const std::string& why)
        : std::runtime_error("malformed record at line " + std::to_string(line) + ": " + why),
          line_number(line) {}
    size_t line_number;
};

struct NotImplementedError : std::runtime_error {
    explicit NotImplementedError(const std::string& what_feature)
        : std::runtime_error("not implemented: " + what_feature) {}
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& why) : std::runtime_error("config error: " + why) {}
};

// ------------------------------------------------------------------- rng --

// splitmix64; used to derive independent stream seeds from one master seed.
inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline uint64_t mix_seed(uint64_t a, uint64_t b) { return splitmix64(a ^ splitmix64(b)); }
inline uint64_t mix_seed(uint64_t a, uint64_t b, uint64_t c) { return mix_seed(mix_seed(a, b), c); }

using Rng = std::mt19937_64;

// Uniform double in [0, 1). Hand-rolled instead of uniform_real_distribution
// so sampled values are identical regardless of the standard library.
inline double uniform_unit(Rng& g) { return static_cast<double>(g() >> 11) * 0x1.0p-53; }

// Uniform integer in [lo, hi], rejection-sampled to stay unbiased.
inline int64_t uniform_int(Rng& g, int64_t lo, int64_t hi) {
    const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    const uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    uint64_t x;
    do {
        x = g();
    } while (x >= limit);
    return lo + static_cast<int64_t>(x % span);
}

// ------------------------------------------------------------------ hash --

constexpr uint64_t fnv1a64(std::string_view data, uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// -------------------------------------------------------------------- io --

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temp file then renames over the target, so a crash
// never leaves a half-written artifact behind.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

// --------------------------------------------------------------- strings --

std::vector<std::string> split_whitespace(std::string_view text);

// Collapse whitespace runs to single spaces and trim the ends.
std::string canonical_whitespace(std::string_view text);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

bool starts_with(std::string_view s, std::string_view prefix);

std::string trim(std::string_view s);

}  // namespace tandem
