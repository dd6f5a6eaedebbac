#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "saclab/field.hpp"

namespace saclab {

/// Deterministic random stream. Streams are derived from a master seed plus a
/// purpose tag and an index, so that ensembles can be distributed over any
/// number of workers while every trajectory sees the same increments.
///
/// Normal variates use an explicit Box-Muller pair cache; the whole stream is
/// reproducible bit-for-bit given (seed, purpose, id) and the draw sequence.
class RngStream {
public:
    RngStream() : RngStream(0, 0, 0) {}

    RngStream(std::uint64_t master_seed, std::uint64_t purpose, std::uint64_t id) {
        std::seed_seq seq{
            static_cast<std::uint32_t>(master_seed), static_cast<std::uint32_t>(master_seed >> 32),
            static_cast<std::uint32_t>(purpose), static_cast<std::uint32_t>(purpose >> 32),
            static_cast<std::uint32_t>(id), static_cast<std::uint32_t>(id >> 32)};
        gen_.seed(seq);
    }

    /// Uniform on (0,1), never exactly 0.
    double uniform() {
        const std::uint64_t r = gen_();
        return (static_cast<double>(r >> 11) + 0.5) * 0x1.0p-53;
    }

    double normal() {
        if (have_cache_) {
            have_cache_ = false;
            return cache_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double rad = std::sqrt(-2.0 * std::log(u1));
        const double ang = 6.283185307179586476925286766559 * u2;
        cache_ = rad * std::sin(ang);
        have_cache_ = true;
        return rad * std::cos(ang);
    }

    /// Vector of independent N(0, var) draws.
    Eigen::ArrayXd normals(int n, double var = 1.0) {
        Eigen::ArrayXd out(n);
        const double sd = std::sqrt(var);
        for (int i = 0; i < n; ++i) out[i] = sd * normal();
        return out;
    }

    std::uint64_t raw() { return gen_(); }

private:
    std::mt19937_64 gen_;
    double cache_ = 0.0;
    bool have_cache_ = false;
};

/// Stream purpose tags, kept distinct so experiments never share increments.
namespace stream {
inline constexpr std::uint64_t kTrajectory = 1;
inline constexpr std::uint64_t kGaussianField = 2;
inline constexpr std::uint64_t kInitialData = 3;
inline constexpr std::uint64_t kOuterSemigroup = 4;
} // namespace stream

} // namespace saclab
