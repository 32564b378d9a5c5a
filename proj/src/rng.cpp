#include "gcl/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace gcl {

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

namespace {
inline std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
}
}  // namespace

RngStream::RngStream(std::uint64_t master_seed, std::string_view name) {
    origin_ = master_seed ^ fnv1a64(name);
    std::uint64_t sm = origin_;
    for (auto& s : s_) s = splitmix64(sm);
}

std::uint64_t RngStream::next_u64() {
    // xoshiro256**
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double RngStream::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::int64_t RngStream::uniform_int(std::int64_t lo, std::int64_t hi) {
    if (lo > hi) throw std::invalid_argument("uniform_int: lo > hi");
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    if (span == 0) return static_cast<std::int64_t>(next_u64());  // full range
    // rejection sampling to avoid modulo bias
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    std::uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return lo + static_cast<std::int64_t>(x % span);
}

double RngStream::normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

std::vector<int> RngStream::sample_without_replacement(int n, int k, int excluded) {
    std::vector<int> pool;
    pool.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        if (i != excluded) pool.push_back(i);
    if (k > static_cast<int>(pool.size()))
        throw std::invalid_argument("sample_without_replacement: k too large");
    // partial Fisher-Yates: first k entries become the sample
    for (int i = 0; i < k; ++i) {
        auto j = static_cast<std::size_t>(
            uniform_int(i, static_cast<std::int64_t>(pool.size()) - 1));
        std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
    }
    pool.resize(static_cast<std::size_t>(k));
    return pool;
}

RngStream RngStream::child(std::string_view name, std::uint64_t index) const {
    RngStream r;
    std::uint64_t sm = origin_ ^ fnv1a64(name) ^ (index * 0x9e3779b97f4a7c15ULL + 0x632be59bd9b4e019ULL);
    r.origin_ = sm;
    for (auto& s : r.s_) s = splitmix64(sm);
    return r;
}

}  // namespace gcl
