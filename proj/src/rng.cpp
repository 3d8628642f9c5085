#include "sogr/rng.hpp"

#include <cmath>

#include "sogr/errors.hpp"

namespace sogr {

uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

uint64_t mix64(uint64_t a, uint64_t b) {
    // splitmix64 finalizer applied to the combined value
    uint64_t z = a + 0x9e3779b97f4a7c15ull * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

int64_t Rng::uniform_int(int64_t n) {
    if (n <= 0) throw ContractError("uniform_int: n must be positive");
    // modulo bias is irrelevant at these ranges; determinism is what matters
    return static_cast<int64_t>(eng_() % static_cast<uint64_t>(n));
}

double Rng::normal() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    double u1 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
}

double Rng::exponential() {
    double u = uniform();
    if (u > 1.0 - 1e-16) u = 1.0 - 1e-16;
    return -std::log(1.0 - u);
}

void shuffle_indices(std::vector<size_t>& v, Rng& rng) {
    for (size_t i = v.size(); i > 1; --i) {
        const size_t j = static_cast<size_t>(rng.uniform_int(static_cast<int64_t>(i)));
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace sogr
