#pragma once

#include <Eigen/Dense>

#include "bpp/normconst.hpp"
#include "bpp/rotmath.hpp"

namespace bpp {

inline constexpr double kZClamp = 500.0; // |z_i| cap before provider calls

/// Dispersion diagonal of the Bingham density, stored ascending:
/// the full matrix is diag(z1, z2, z3, 0) with z1 <= z2 <= z3 <= 0.
struct DispersionDiag {
    double z1, z2, z3;

    Eigen::Vector4d diagonal() const { return Eigen::Vector4d(z1, z2, z3, 0.0); }
    bool ordered() const { return z1 <= z2 && z2 <= z3 && z3 <= 0.0; }
};

/// Orientation matrix + dispersion. M is orthogonal (M^T M = I within 1e-7);
/// column 4 is paired with the zero dispersion entry and is the mode.
/// Instances are value types; treat them as immutable once built.
struct BinghamParams {
    Eigen::Matrix4d M;
    DispersionDiag Z;
};

using RawPolicyVector = Eigen::Matrix<double, 19, 1>;

bool is_orthonormal(const Eigen::Matrix4d& m, double tol = 1e-7);

/// z_i = -sum_{k<=i} exp(v_k), emitted most-negative-first and clamped to
/// >= -500 (clamping a cumulative sum preserves the ordering).
DispersionDiag transform_z(double v1, double v2, double v3);

/// Classical Gram-Schmidt on the columns of V. Throws DegenerateBasisError
/// if any residual norm falls below 1e-8 before normalization.
Eigen::Matrix4d transform_m(const Eigen::Matrix4d& V);

/// Raw head output -> (M, Z). Layout: v[0..2] dispersion pre-activations,
/// v[3..18] four 4-vectors fed to Gram-Schmidt.
BinghamParams params_from_raw(const RawPolicyVector& v);

/// q^T M Z M^T q; always <= 0 for unit q.
double bingham_exponent(const BinghamParams& params, const Eigen::Vector4d& q);

/// log p(q) = q^T M Z M^T q - log N(Z). Even in q bit for bit.
double log_pdf(const BinghamParams& params, const UnitQuaternion& q,
               const NormConstProvider& provider);

/// H = log N(Z) - sum_i z_i * dlogN/dz_i. Depends on Z only; tends to
/// log(2 pi^2) as Z -> 0.
double entropy(const BinghamParams& params, const NormConstProvider& provider);

/// Density maximizer: the M column paired with the zero dispersion entry.
UnitQuaternion mode(const BinghamParams& params);

/// log p(q) as a function of the raw 19-vector through both transforms.
/// When `grad` is non-null it receives the analytic gradient (reverse mode
/// through Gram-Schmidt and the cumulative-exponential map; clamped
/// dispersion entries get zero gradient).
double log_pdf_raw(const RawPolicyVector& v, const Eigen::Vector4d& q,
                   const NormConstProvider& provider, RawPolicyVector* grad = nullptr);

/// dH/dz via one finite-difference pass over the provider's analytic
/// gradient (dH/dz_j = -sum_i z_i d2logN/dz_i dz_j).
Eigen::Vector3d entropy_grad_z(const DispersionDiag& Z, const NormConstProvider& provider,
                               double h = 1e-4);

} // namespace bpp
