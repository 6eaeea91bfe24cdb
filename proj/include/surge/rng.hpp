#pragma once

// Counter-based random streams (Philox4x32-10). A draw is a pure function of
// (seed, stream id, position), so any particle's noise can be replayed in
// isolation and results do not depend on thread count or call order.

#include "surge/core.hpp"

#include <array>
#include <cstdint>

namespace surge {

namespace detail {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void philox_round(std::array<std::uint32_t, 4>& c, const std::array<std::uint32_t, 2>& k) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kPhiloxM0) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kPhiloxM1) * c[2];
    const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
    const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
}

}  // namespace detail

// One keyed block of the Philox4x32-10 bijection: 128-bit counter + 64-bit
// key -> four 32-bit words.
inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                               std::array<std::uint32_t, 2> key) {
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            key[0] += detail::kPhiloxW0;
            key[1] += detail::kPhiloxW1;
        }
        detail::philox_round(counter, key);
    }
    return counter;
}

// Identifies an independent stream. slot carries a domain tag in its high
// bits (see StreamDomain) so that, e.g., propagation noise and resampling
// draws never collide even for equal (t, k).
struct RngStream {
    std::uint64_t seed = 0;
    std::uint32_t slot = 0;  // domain-tagged unit index (particle, trajectory, ...)
    std::uint32_t t = 0;     // assimilation window index
    std::uint32_t k = 0;     // internal step index
};

enum class StreamDomain : std::uint32_t {
    noise = 0,         // particle propagation noise
    resample = 1,      // resampling draws
    init = 2,          // initial-ensemble draws
    scenario = 3,      // ground-truth process noise
    scenario_obs = 4,  // observation noise in generated scenarios
    perturb_obs = 5,   // perturbed observations (stochastic EnKF)
};

constexpr std::uint32_t kDomainShift = 28;

inline std::uint32_t tagged_slot(StreamDomain domain, std::uint32_t index) {
    if (index >= (1u << kDomainShift)) throw std::invalid_argument("stream index exceeds 2^28");
    return (static_cast<std::uint32_t>(domain) << kDomainShift) | index;
}

inline RngStream make_stream(std::uint64_t seed, StreamDomain domain, std::uint32_t index,
                             std::uint32_t t, std::uint32_t k) {
    return RngStream{seed, tagged_slot(domain, index), t, k};
}

namespace detail {

inline std::array<std::uint32_t, 4> stream_block(const RngStream& s, std::uint32_t block) {
    return philox4x32({block, s.slot, s.t, s.k},
                      {static_cast<std::uint32_t>(s.seed), static_cast<std::uint32_t>(s.seed >> 32)});
}

// Map 64 random bits to (0, 1): 53-bit mantissa shifted off zero so that
// log(u) is always finite.
inline double to_unit(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t x = (static_cast<std::uint64_t>(hi) << 32) | lo;
    return static_cast<double>(x >> 11) * 0x1.0p-53 + 0x1.0p-54;
}

}  // namespace detail

// dim i.i.d. U(0,1) variates; pure in (stream, dim).
inline Vec uniform_draw(const RngStream& stream, int dim) {
    if (dim < 1) throw std::invalid_argument("uniform_draw: dim must be >= 1");
    Vec out(dim);
    for (int i = 0; i < dim; i += 2) {
        const auto b = detail::stream_block(stream, static_cast<std::uint32_t>(i / 2));
        out[i] = detail::to_unit(b[0], b[1]);
        if (i + 1 < dim) out[i + 1] = detail::to_unit(b[2], b[3]);
    }
    return out;
}

// dim i.i.d. standard normal variates via Box-Muller; pure in (stream, dim).
inline Vec gaussian_draw(const RngStream& stream, int dim) {
    if (dim < 1) throw std::invalid_argument("gaussian_draw: dim must be >= 1");
    Vec out(dim);
    constexpr double two_pi = 6.283185307179586476925286766559;
    for (int i = 0; i < dim; i += 2) {
        const auto b = detail::stream_block(stream, static_cast<std::uint32_t>(i / 2));
        const double u1 = detail::to_unit(b[0], b[1]);
        const double u2 = detail::to_unit(b[2], b[3]);
        const double r = std::sqrt(-2.0 * std::log(u1));
        out[i] = r * std::cos(two_pi * u2);
        if (i + 1 < dim) out[i + 1] = r * std::sin(two_pi * u2);
    }
    return out;
}

}  // namespace surge
