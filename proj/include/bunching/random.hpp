#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace bunching {

/**
 * Philox4x32-10 counter-based generator (Salmon et al., "Parallel random
 * numbers: as easy as 1, 2, 3", SC'11).
 *
 * A block of four 32-bit outputs is a pure function of (key, counter), so any
 * draw of any stream can be regenerated without replaying its predecessors.
 */
class Philox4x32 {
public:
    using Block = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Block generate(Block counter, Key key) noexcept {
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += kWeyl0;
                key[1] += kWeyl1;
            }
            counter = single_round(counter, key);
        }
        return counter;
    }

private:
    static constexpr std::uint32_t kMul0 = 0xD2511F53u;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

    static Block single_round(const Block& c, const Key& k) noexcept {
        const std::uint64_t p0 = std::uint64_t{kMul0} * c[0];
        const std::uint64_t p1 = std::uint64_t{kMul1} * c[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const auto lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
        const auto lo1 = static_cast<std::uint32_t>(p1);
        return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    }
};

/**
 * One reproducible random stream identified by (seed, stream id).
 *
 * Draw i of stream s under seed x is Philox(key = x, counter = {i / 2, s})
 * lane i % 2, so the value depends only on (seed, stream, draw index).
 * Satisfies UniformRandomBitGenerator.
 */
class RandomStream {
public:
    using result_type = std::uint64_t;

    RandomStream(std::uint64_t seed, std::uint64_t stream, std::uint64_t position = 0) noexcept
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          stream_(stream),
          position_(position) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept {
        return std::numeric_limits<result_type>::max();
    }

    result_type operator()() noexcept {
        const std::uint64_t block = position_ >> 1;
        if (!cached_ || block != cached_block_) {
            const Philox4x32::Block counter{
                static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32),
                static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)};
            const auto out = Philox4x32::generate(counter, key_);
            words_[0] = std::uint64_t{out[0]} | (std::uint64_t{out[1]} << 32);
            words_[1] = std::uint64_t{out[2]} | (std::uint64_t{out[3]} << 32);
            cached_block_ = block;
            cached_ = true;
        }
        return words_[position_++ & 1];
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    std::uint64_t position() const noexcept { return position_; }
    std::uint64_t stream() const noexcept { return stream_; }

private:
    Philox4x32::Key key_;
    std::uint64_t stream_;
    std::uint64_t position_;
    std::uint64_t cached_block_ = 0;
    std::array<std::uint64_t, 2> words_{};
    bool cached_ = false;
};

}  // namespace bunching
