#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace haven {

/// SplitMix64 finalizer; used to derive independent seeds.
[[nodiscard]] constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

[[nodiscard]] constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Seed for episode `episode` of environment `env` under `master`.
/// Independent of evaluation order and worker count.
[[nodiscard]] constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t env,
                                                  std::uint64_t episode = 0) noexcept {
    return mix64(mix64(mix64(master) ^ (env * 0xd6e8feb86659fd93ULL)) ^ (episode + 0x632be59bd9b4e019ULL));
}

/// Seeded random stream. Distributions are computed here from raw engine
/// output so sequences do not depend on the standard library vendor.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(mix64(seed)) {}

    /// Named sub-stream of `seed`; distinct tags give unrelated sequences.
    [[nodiscard]] static Rng stream(std::uint64_t seed, std::string_view tag) {
        return Rng(seed ^ mix64(fnv1a(tag)));
    }

    [[nodiscard]] std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1).
    [[nodiscard]] double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    [[nodiscard]] double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [lo, hi] (inclusive).
    [[nodiscard]] std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
        if (span == 0) {
            return static_cast<std::int64_t>(engine_());
        }
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
        std::uint64_t r = engine_();
        while (r >= limit) {
            r = engine_();
        }
        return lo + static_cast<std::int64_t>(r % span);
    }

    /// Standard normal via Box-Muller.
    [[nodiscard]] double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) {
            u1 = uniform();
        }
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
        has_spare_ = true;
        return r * std::cos(2.0 * std::numbers::pi * u2);
    }

    [[nodiscard]] bool bernoulli(double p) { return uniform() < p; }

    [[nodiscard]] std::string serialize() const {
        std::ostringstream os;
        os << engine_ << ' ' << (has_spare_ ? 1 : 0) << ' ';
        os.precision(17);
        os << spare_;
        return os.str();
    }

    [[nodiscard]] static Rng deserialize(const std::string& text) {
        std::istringstream is(text);
        Rng r;
        int spare = 0;
        is >> r.engine_ >> spare >> r.spare_;
        if (!is) {
            throw std::runtime_error("corrupt rng state");
        }
        r.has_spare_ = spare != 0;
        return r;
    }

    friend bool operator==(const Rng& a, const Rng& b) {
        return a.engine_ == b.engine_ && a.has_spare_ == b.has_spare_ && (!a.has_spare_ || a.spare_ == b.spare_);
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace haven
