#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>

namespace bpp {

using Rng = std::mt19937_64;

// Uniform double in [0,1) from the top 53 bits of the generator output.
// Avoids std::uniform_real_distribution, whose bit stream is
// implementation-defined.
inline double uniform01(Rng& rng)
{
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_in(Rng& rng, double lo, double hi)
{
    return lo + (hi - lo) * uniform01(rng);
}

// Standard normal via Box-Muller; consumes two uniforms per draw, no cached
// second value (keeps the stream position a pure function of call count).
inline double normal(Rng& rng)
{
    double u1 = 1.0 - uniform01(rng); // (0,1]
    double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

// Uniform on S^3 (normalized 4-vector of i.i.d. normals).
inline Eigen::Vector4d random_unit_4vec(Rng& rng)
{
    for (;;) {
        Eigen::Vector4d v(normal(rng), normal(rng), normal(rng), normal(rng));
        double n = v.norm();
        if (n > 1e-12)
            return v / n;
    }
}

// Uniform on S^2.
inline Eigen::Vector3d random_unit_3vec(Rng& rng)
{
    for (;;) {
        Eigen::Vector3d v(normal(rng), normal(rng), normal(rng));
        double n = v.norm();
        if (n > 1e-12)
            return v / n;
    }
}

} // namespace bpp
