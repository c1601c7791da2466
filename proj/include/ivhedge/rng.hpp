#pragma once

#include <cstdint>
#include <limits>

namespace ivhedge {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Counter-based random stream. The i-th output is a pure function of
/// (key, i), so streams derived from (seed, stream id) are independent of
/// how work is distributed across threads.
class RngStream {
public:
    using result_type = std::uint64_t;

    RngStream(std::uint64_t seed, std::uint64_t stream_id) noexcept
        : key_(mix64(mix64(seed + 0x9e3779b97f4a7c15ULL) ^ (stream_id * 0xd1b54a32d192ed03ULL + 1))) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept {
        return mix64(key_ + 0x9e3779b97f4a7c15ULL * ++counter_);
    }

    /// Uniform on the open interval (0, 1).
    double uniform() noexcept {
        return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Child stream keyed by this stream's key and `id`; does not advance this stream.
    [[nodiscard]] RngStream substream(std::uint64_t id) const noexcept {
        return RngStream(key_, id);
    }

    std::uint64_t counter() const noexcept { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace ivhedge
