#ifndef DPKM_RNG_HPP
#define DPKM_RNG_HPP

#include <cstdint>
#include <random>

namespace dpkm {

// Seedable random source. All distributions are derived from the raw 64-bit
// stream by hand so that a given seed produces the same values on every
// platform (std:: distributions are implementation-defined).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // uniform on [0, 1) with 53 bits of precision
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform on {0, ..., n-1}, unbiased
    int uniform_int(int n);

    // standard normal via Box-Muller; consumes exactly two raw draws
    double normal();

    double normal(double mean, double sd) { return mean + sd * normal(); }

private:
    std::mt19937_64 gen_;
};

// Child seed for experiment cell (a, b) under a master seed. Distinct inputs
// give statistically independent streams.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b);

} // namespace dpkm

#endif
