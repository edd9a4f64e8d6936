#pragma once

#include <array>
#include <cstdint>

namespace ergo {

/// Counter-based generator (Philox 4x32, 10 rounds). Every output is a pure
/// function of (seed, stream, counter), so draws are reproducible bit-exactly
/// and independent streams are cheap: same seed, distinct stream id.
class CounterRng {
  public:
    CounterRng() : CounterRng(0, 0) {}

    CounterRng(std::uint64_t seed, std::uint64_t stream)
        : seed_(seed), stream_(stream), counter_(0), buf_pos_(2) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }

    /// Number of 64-bit draws consumed so far.
    std::uint64_t draw_count() const { return counter_ * 2 - (2 - buf_pos_); }

    /// Jump directly to a block boundary; draw_count becomes 2*block.
    void seek_block(std::uint64_t block) {
        counter_ = block;
        buf_pos_ = 2;
    }

    std::uint64_t next_u64() {
        if (buf_pos_ >= 2) refill();
        return buf_[buf_pos_++];
    }

    /// Uniform double on the open interval (0,1).
    double uniform01() {
        const std::uint64_t bits = next_u64() >> 11;         // 53 random bits
        return (static_cast<double>(bits) + 0.5) * 0x1p-53;
    }

    /// Uniform double on (-1,1).
    double uniform_pm1() { return 2.0 * uniform01() - 1.0; }

    /// Uniform double on (lo,hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Uniform integer in [0, n).
    std::uint64_t uniform_index(std::uint64_t n) {
        // Rejection-free modulo is fine here: n is tiny against 2^64.
        return next_u64() % n;
    }

  private:
    static std::uint32_t mulhi(std::uint32_t a, std::uint32_t b) {
        return static_cast<std::uint32_t>(
            (static_cast<std::uint64_t>(a) * b) >> 32);
    }
    static std::uint32_t mullo(std::uint32_t a, std::uint32_t b) {
        return a * b;
    }

    void refill() {
        std::uint32_t x0 = static_cast<std::uint32_t>(counter_);
        std::uint32_t x1 = static_cast<std::uint32_t>(counter_ >> 32);
        std::uint32_t x2 = static_cast<std::uint32_t>(stream_);
        std::uint32_t x3 = static_cast<std::uint32_t>(stream_ >> 32);
        std::uint32_t k0 = static_cast<std::uint32_t>(seed_);
        std::uint32_t k1 = static_cast<std::uint32_t>(seed_ >> 32);
        for (int round = 0; round < 10; ++round) {
            const std::uint32_t hi0 = mulhi(0xD2511F53u, x0);
            const std::uint32_t lo0 = mullo(0xD2511F53u, x0);
            const std::uint32_t hi1 = mulhi(0xCD9E8D57u, x2);
            const std::uint32_t lo1 = mullo(0xCD9E8D57u, x2);
            const std::uint32_t y0 = hi1 ^ x1 ^ k0;
            const std::uint32_t y1 = lo1;
            const std::uint32_t y2 = hi0 ^ x3 ^ k1;
            const std::uint32_t y3 = lo0;
            x0 = y0; x1 = y1; x2 = y2; x3 = y3;
            k0 += 0x9E3779B9u;
            k1 += 0xBB67AE85u;
        }
        buf_[0] = (static_cast<std::uint64_t>(x1) << 32) | x0;
        buf_[1] = (static_cast<std::uint64_t>(x3) << 32) | x2;
        buf_pos_ = 0;
        ++counter_;
    }

    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t counter_;
    std::array<std::uint64_t, 2> buf_{};
    int buf_pos_;
};

} // namespace ergo
