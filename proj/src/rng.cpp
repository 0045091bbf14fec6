#include "manydelta/rng.hpp"

#include <stdexcept>

namespace manydelta {

namespace {
constexpr std::uint32_t kM0 = 0xD2511F53u, kM1 = 0xCD9E8D57u;
constexpr std::uint32_t kW0 = 0x9E3779B9u, kW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    std::uint64_t p = std::uint64_t(a) * b;
    hi = std::uint32_t(p >> 32);
    lo = std::uint32_t(p);
}
}  // namespace

std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> c,
                                           std::array<std::uint32_t, 2> k) {
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            k[0] += kW0;
            k[1] += kW1;
        }
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kM0, c[0], hi0, lo0);
        mulhilo(kM1, c[2], hi1, lo1);
        c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    }
    return c;
}

PhiloxEngine::PhiloxEngine(const StreamKey& k)
    : key_{std::uint32_t(k.master_seed), std::uint32_t(k.master_seed >> 32)},
      ctr_{0u, static_cast<std::uint32_t>(k.substream), std::uint32_t(k.path_index),
           std::uint32_t(k.path_index >> 32)} {}

void PhiloxEngine::refill() {
    buf_ = philox4x32_10(ctr_, key_);
    if (++ctr_[0] == 0) throw std::overflow_error("random stream exhausted");
    pos_ = 0;
}

PhiloxEngine::result_type PhiloxEngine::operator()() {
    if (pos_ >= 4) refill();
    std::uint64_t v = std::uint64_t(buf_[pos_]) | (std::uint64_t(buf_[pos_ + 1]) << 32);
    pos_ += 2;
    return v;
}

}  // namespace manydelta
