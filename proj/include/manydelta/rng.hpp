#pragma once

#include <boost/random/exponential_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>

#include <array>
#include <cstdint>
#include <limits>

namespace manydelta {

enum class Substream : std::uint32_t {
    Noise = 0,
    Auxiliary = 1,
    Reference = 2,
};

struct StreamKey {
    std::uint64_t master_seed = 0;
    std::uint64_t path_index = 0;
    Substream substream = Substream::Noise;
};

// Philox4x32-10 bijection.
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                           std::array<std::uint32_t, 2> key);

// Counter-based engine: the key is the master seed, the counter packs
// (block, substream, path). Satisfies UniformRandomBitGenerator.
class PhiloxEngine {
public:
    using result_type = std::uint64_t;

    explicit PhiloxEngine(const StreamKey& k);

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
    result_type operator()();

private:
    void refill();

    std::array<std::uint32_t, 2> key_;
    std::array<std::uint32_t, 4> ctr_;
    std::array<std::uint32_t, 4> buf_{};
    int pos_ = 4;
};

class Stream {
public:
    explicit Stream(const StreamKey& k) : eng_(k) {}
    Stream(std::uint64_t seed, std::uint64_t path, Substream s = Substream::Noise)
        : eng_(StreamKey{seed, path, s}) {}

    double normal() { return normal_(eng_); }
    double uniform() { return uniform_(eng_); }
    double exponential(double rate) {
        return boost::random::exponential_distribution<double>(rate)(eng_);
    }
    PhiloxEngine& engine() { return eng_; }

private:
    PhiloxEngine eng_;
    boost::random::normal_distribution<double> normal_;
    boost::random::uniform_01<double> uniform_;
};

}  // namespace manydelta
