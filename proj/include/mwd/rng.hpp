#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace mwd {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Deterministic stream derivation: hash a base seed together with any
// number of stream identifiers (scenario index, replicate, wave, ...).
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> parts) {
    std::uint64_t s = base ^ 0xd1b54a32d192ed03ULL;
    splitmix64(s);
    for (std::uint64_t p : parts) {
        s ^= p + 0x9e3779b97f4a7c15ULL + (s << 6) + (s >> 2);
        splitmix64(s);
    }
    return splitmix64(s);
}

inline Rng make_rng(std::uint64_t base, std::initializer_list<std::uint64_t> parts) {
    return Rng(derive_seed(base, parts));
}

}  // namespace mwd
