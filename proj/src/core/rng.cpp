#include "core/rng.hpp"

#include <cmath>

namespace tb {

uint64_t Rng::mix(uint64_t z) {
    // SplitMix64 finalizer (Steele, Lea & Flood 2014).
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ull;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebull;
    z ^= z >> 31;
    return z;
}

double Rng::normal() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    // u must stay off zero for the log.
    double u = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    double v = uniform();
    double r = std::sqrt(-2.0 * std::log(u));
    double a = 6.283185307179586476925286766559 * v;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
}

void Rng::shuffle_indices(uint64_t* idx, uint64_t n) {
    for (uint64_t i = 0; i < n; ++i) idx[i] = i;
    for (uint64_t i = n; i > 1; --i) {
        uint64_t j = next_u64() % i;  // modulo bias is irrelevant at these sizes
        uint64_t t = idx[i - 1];
        idx[i - 1] = idx[j];
        idx[j] = t;
    }
}

Rng Rng::fork(std::string_view tag) const {
    uint64_t h = key_;
    for (char c : tag) h = mix(h ^ static_cast<uint64_t>(static_cast<unsigned char>(c)));
    return Rng(h, 0);
}

Rng Rng::fork(std::string_view tag, uint64_t index) const {
    return Rng(mix(fork(tag).key_ ^ index), 0);
}

} // namespace tb
