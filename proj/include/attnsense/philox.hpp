#ifndef ATTNSENSE_PHILOX_HPP
#define ATTNSENSE_PHILOX_HPP

// Philox4x32-10 counter-based generator (Salmon et al., SC'11). Each
// (key, counter) pair maps to four independent 32-bit words, so a value can
// be regenerated from its coordinates without replaying a stream.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace attnsense {

class Philox4x32 {
public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    explicit constexpr Philox4x32(Key key) : key_(key) {}

    constexpr Counter operator()(Counter ctr) const {
        Key key = key_;
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += kWeyl0;
                key[1] += kWeyl1;
            }
            const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
            const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
            ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
                   static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
        }
        return ctr;
    }

private:
    static constexpr std::uint32_t kMul0 = 0xD2511F53u;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

    Key key_;
};

/// Uniform in the open interval (0, 1) from two 32-bit words (53 bits).
inline double uniform_open(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t bits = ((std::uint64_t{hi} << 32) | lo) >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

/// Two standard normals from one Philox block via Box-Muller.
inline std::array<double, 2> box_muller(const Philox4x32::Counter& block) {
    const double u1 = uniform_open(block[0], block[1]);
    const double u2 = uniform_open(block[2], block[3]);
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    return {radius * std::cos(angle), radius * std::sin(angle)};
}

}  // namespace attnsense

#endif  // ATTNSENSE_PHILOX_HPP
