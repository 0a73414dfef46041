#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <vector>

namespace bite {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace detail

/// Consumer ids for deriving independent streams from one root seed.
/// Adding a consumer never shifts the draws of existing ones.
enum class Stream : std::uint64_t {
    Init = 1,
    Shuffle = 2,
    Dropout = 3,
    Synth = 4,
    Split = 5,
};

/// Counter-based deterministic generator (SplitMix64 core). Portable across
/// platforms; all distributions are implemented here rather than through
/// std::random to keep byte-level reproducibility.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    /// Derive a child seed from a root seed and a key path, e.g.
    /// (root, {Stream::Dropout, fold, epoch}).
    static std::uint64_t derive(std::uint64_t root, std::initializer_list<std::uint64_t> path) {
        std::uint64_t h = root;
        for (std::uint64_t k : path) {
            h ^= k + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
            std::uint64_t s = h;
            h = detail::splitmix64(s);
        }
        return h;
    }

    static Rng derived(std::uint64_t root, Stream stream, std::initializer_list<std::uint64_t> extra = {}) {
        std::uint64_t h = derive(root, {static_cast<std::uint64_t>(stream)});
        for (std::uint64_t k : extra) h = derive(h, {k});
        return Rng(h);
    }

    std::uint64_t next_u64() { return detail::splitmix64(state_); }

    /// Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    /// Standard normal via Box-Muller.
    double normal() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        double u1 = 0.0;
        do { u1 = uniform(); } while (u1 <= 0.0);
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        cached_ = r * std::sin(a);
        have_cached_ = true;
        return r * std::cos(a);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t state_;
    double cached_ = 0.0;
    bool have_cached_ = false;
};

} // namespace bite
