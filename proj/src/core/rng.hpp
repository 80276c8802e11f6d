#pragma once

#include <cstdint>
#include <string_view>

namespace tb {

// Counter-based generator so every consumer can carve out its own stream.
// One draw is one SplitMix64 mix of (key, counter); nothing here depends on
// platform libraries, so streams replay bit-for-bit anywhere.
//
//   Rng r(seed);          root stream for a run
//   r.fork("init")        independent child stream, same child every time
//   r.fork("batch", 3)    children may be indexed as well
//
// Forking mixes the tag into the key and leaves the parent untouched.
class Rng {
public:
    explicit Rng(uint64_t seed) : key_(mix(seed ^ KEY_SALT)), counter_(0) {}

    uint64_t next_u64() { return mix(key_ + GAMMA * ++counter_); }

    // Uniform on [0,1) with the full 53 bits of double precision.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller; the library never uses std::normal_distribution because its
    // output differs between standard libraries.
    double normal();

    // Fisher-Yates index permutation of [0, n).
    void shuffle_indices(uint64_t* idx, uint64_t n);

    Rng fork(std::string_view tag) const;
    Rng fork(std::string_view tag, uint64_t index) const;

    static uint64_t mix(uint64_t z);

private:
    Rng(uint64_t key, int) : key_(key), counter_(0) {}

    static constexpr uint64_t GAMMA = 0x9e3779b97f4a7c15ull;   // golden-ratio step
    static constexpr uint64_t KEY_SALT = 0x82f63b78ad9e1d5full;

    uint64_t key_;
    uint64_t counter_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace tb
