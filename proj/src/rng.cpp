#include "dpkm/rng.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace dpkm {

int Rng::uniform_int(int n) {
    if (n <= 0) throw std::invalid_argument("Rng::uniform_int: n must be positive");
    const std::uint64_t un = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % un;
    std::uint64_t r;
    do {
        r = gen_();
    } while (r >= limit);
    return static_cast<int>(r % un);
}

double Rng::normal() {
    // u1 in (0, 1] so the log is finite
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

namespace {

std::uint64_t mix64(std::uint64_t x) {
    // splitmix64 finalizer
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

} // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b) {
    std::uint64_t h = mix64(master);
    h = mix64(h ^ (a + 0x9E3779B97F4A7C15ull));
    h = mix64(h ^ (b + 0xC2B2AE3D27D4EB4Full));
    return h;
}

} // namespace dpkm
