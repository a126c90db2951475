#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

namespace msdeblur {

// mt19937_64 with portable conversions to floating point (the std
// distributions are implementation-defined, which breaks cross-platform
// reproducibility).
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    // Integer in [0, n).
    int below(int n) { return static_cast<int>(uniform() * n); }
    bool coin() { return (eng_() >> 63) != 0; }
    double normal() {
        // Box-Muller; 1 - u keeps the log argument in (0, 1].
        const double u1 = 1.0 - uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    [[nodiscard]] std::string state() const {
        std::ostringstream os;
        os << eng_;
        return os.str();
    }
    void set_state(const std::string& s) {
        std::istringstream is(s);
        is >> eng_;
    }

private:
    std::mt19937_64 eng_;
};

// Derives an independent stream seed from a base seed and stream indices.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
    auto mix = [](std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    return mix(mix(mix(base) ^ a) ^ (b * 0x632be59bd9b4e019ULL));
}

}  // namespace msdeblur
