#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "bpp/bingham.hpp"
#include "bpp/rng.hpp"
#include "bpp/rotmath.hpp"

namespace testsup {

// Rodrigues formula; independent route to a rotation matrix for oracles.
inline Eigen::Matrix3d axis_angle_rotmat(const Eigen::Vector3d& axis, double angle)
{
    Eigen::Vector3d a = axis.normalized();
    Eigen::Matrix3d k;
    k << 0, -a.z(), a.y(), a.z(), 0, -a.x(), -a.y(), a.x(), 0;
    return Eigen::Matrix3d::Identity() + std::sin(angle) * k +
           (1.0 - std::cos(angle)) * (k * k);
}

inline Eigen::Matrix3d random_rotation(bpp::Rng& rng)
{
    return bpp::quat_to_rotmat(bpp::random_unit_4vec(rng));
}

inline Eigen::Matrix4d random_ortho4(bpp::Rng& rng)
{
    Eigen::Matrix4d g;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            g(i, j) = bpp::normal(rng);
    Eigen::HouseholderQR<Eigen::Matrix4d> qr(g);
    return qr.householderQ();
}

// z entries log-uniform in magnitude over [10^-1, 10^log10_zmax], sorted.
inline bpp::DispersionDiag random_dispersion(bpp::Rng& rng, double log10_zmax)
{
    double z[3];
    for (double& v : z)
        v = -std::pow(10.0, bpp::uniform_in(rng, -1.0, log10_zmax));
    std::sort(z, z + 3);
    return bpp::DispersionDiag{z[0], z[1], z[2]};
}

inline bpp::BinghamParams random_params(bpp::Rng& rng, double log10_zmax)
{
    return bpp::BinghamParams{random_ortho4(rng), random_dispersion(rng, log10_zmax)};
}

// Two-sample Kolmogorov-Smirnov statistic.
inline double ks_statistic(std::vector<double> a, std::vector<double> b)
{
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double d = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] <= b[j])
            ++i;
        else
            ++j;
        double fa = static_cast<double>(i) / a.size();
        double fb = static_cast<double>(j) / b.size();
        d = std::max(d, std::abs(fa - fb));
    }
    return d;
}

// Critical value for the two-sample KS test at significance alpha.
inline double ks_critical(double alpha, std::size_t n1, std::size_t n2)
{
    double c = std::sqrt(-0.5 * std::log(alpha / 2.0));
    return c * std::sqrt(static_cast<double>(n1 + n2) /
                         (static_cast<double>(n1) * static_cast<double>(n2)));
}

inline double relative_error(double got, double want, double floor = 1e-8)
{
    return std::abs(got - want) / std::max({std::abs(got), std::abs(want), floor});
}

} // namespace testsup
