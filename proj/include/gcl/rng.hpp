#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace gcl {

// SplitMix64 step; used to derive sub-stream seeds and to seed xoshiro.
std::uint64_t splitmix64(std::uint64_t& state);

// FNV-1a 64-bit over bytes. Also used for file/content hashing in manifests.
std::uint64_t fnv1a64(std::string_view bytes);

/// Deterministic random stream derived from (master seed, stream name).
///
/// Every source of randomness in a run draws from a named stream so that
/// consuming extra draws in one subsystem (e.g. similarity sampling) never
/// shifts another (e.g. augmentation). The generator is xoshiro256**,
/// hand-rolled distributions, so sequences are identical across platforms.
class RngStream {
public:
    RngStream(std::uint64_t master_seed, std::string_view name);

    std::uint64_t next_u64();

    /// Uniform double in [0, 1).
    double uniform();

    /// Uniform integer in [lo, hi] inclusive. Requires lo <= hi.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

    /// Standard normal via Box-Muller (no cached spare; one draw = two u64s).
    double normal();

    /// Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            auto j = static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i) - 1));
            std::swap(v[i - 1], v[j]);
        }
    }

    /// k distinct values from {0,...,n-1}\{excluded}, ascending order not
    /// guaranteed. Requires k <= n-1 when excluded in range, else k <= n.
    std::vector<int> sample_without_replacement(int n, int k, int excluded = -1);

    /// Derive an independent child stream, e.g. one per epoch or batch.
    RngStream child(std::string_view name, std::uint64_t index) const;

private:
    RngStream() = default;
    std::uint64_t s_[4];
    std::uint64_t origin_;  // hash of (master seed, name) for child derivation
};

}  // namespace gcl
