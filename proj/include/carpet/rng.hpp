#pragma once
#include <cstdint>
#include <cmath>

// Counter-based random streams: every trajectory owns an independent stream
// derived from (master_seed, stream_index), so results do not depend on how
// trajectories are scheduled across worker threads.

namespace carpet::rng {

inline uint64_t splitmix64(uint64_t& s) {
    uint64_t z = (s += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// xoshiro256++ (Blackman/Vigna), state seeded through splitmix64.
class Stream {
public:
    Stream(uint64_t master_seed, uint64_t stream_index) {
        uint64_t s = master_seed;
        (void)splitmix64(s);
        s ^= 0xd1342543de82ef95ULL * (stream_index + 1);
        for (auto& w : state_) w = splitmix64(s);
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // uniform on (0,1), never returns 0 or 1
    double uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    // uniform on [0,n)
    uint64_t below(uint64_t n) {
        // multiply-shift; bias is negligible for n << 2^64 and irrelevant here
        return static_cast<uint64_t>((static_cast<__uint128_t>(next_u64()) * n) >> 64);
    }

    double exponential(double mean) { return -mean * std::log(uniform()); }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    uint64_t state_[4];
};

}  // namespace carpet::rng
