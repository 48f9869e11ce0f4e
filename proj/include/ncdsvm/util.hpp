// util.hpp — deterministic RNG, encoding helpers, file helpers.
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace ncdsvm::util {

// Deterministic random source shared by every seeded operation in the
// pipeline. mt19937_64 is fully specified by the C++ standard and the
// bounded draw below avoids the implementation-defined distributions,
// so a seed reproduces the same sequence on any conforming compiler.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // Uniform draw in [0, n). Lemire's multiply-reject method.
    std::uint64_t below(std::uint64_t n);

    // Uniform draw in [0, 1) with 53 random bits.
    double unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Fisher-Yates, high index down to 1.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 gen_;
};

std::string base64_encode(std::string_view bytes);
// Returns nullopt on any character outside the base64 alphabet or bad padding.
std::optional<std::string> base64_decode(std::string_view text);

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 14695981039346656037ULL);

// Shortest round-trip decimal form of a double (to_chars).
std::string format_double(double v);
// Strict parse of a full token; nullopt on junk or trailing characters.
std::optional<double> parse_double(std::string_view token);
// Same for non-negative integers.
std::optional<std::uint64_t> parse_u64(std::string_view token);

// C-style escaping for byte strings that must survive a line-oriented file
// (separators, etc). escape("\n") == "\\n"; unescape round-trips and
// returns nullopt on a malformed escape sequence.
std::string escape_bytes(std::string_view bytes);
std::optional<std::string> unescape_bytes(std::string_view text);

// Write-temp-then-rename so readers never observe a partial file.
void atomic_write_file(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);  // throws on failure

// Worker count for parallel featurization: explicit request > NCDSVM_WORKERS
// environment variable > hardware concurrency.
int effective_worker_count(int requested);

// Runs fn(item) for item in [0, n) across `workers` threads (capped to n;
// values < 1 mean one). Items must be independent; the schedule never
// affects results.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

}  // namespace ncdsvm::util
