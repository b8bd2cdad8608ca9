#pragma once

#include <Eigen/Dense>

#include "bpp/bingham.hpp"
#include "bpp/normconst.hpp"
#include "bpp/rng.hpp"

namespace bpp {

/// Angular-central-Gaussian proposal for exact Bingham rejection sampling.
/// Omega = I + 2 M Z M^T / b is positive definite (eigenvalues 1 + 2 z_i / b);
/// the normalization constant of the target cancels in the acceptance ratio,
/// so none of this touches N(Z).
struct ACGEnvelope {
    Eigen::Matrix4d A;        // M Z M^T
    Eigen::Matrix4d omega;    // I + 2 A / b
    Eigen::Matrix4d chol_u;   // upper Cholesky factor U with omega = U^T U
    double b = 4.0;
    double log_c_star = 0.0;  // includes the provider's bound margin
};

ACGEnvelope build_envelope(const BinghamParams& params, const BProvider& bprov);

/// Unit 4-vectors with density proportional to (x^T Omega x)^{-2}: normalized
/// draws from N(0, Omega^{-1}). Columns are samples.
Eigen::Matrix<double, 4, Eigen::Dynamic> sample_acg(const ACGEnvelope& env, Rng& rng,
                                                    int count);

/// log of f*(x) / (C* g*(x)); <= 0 for every unit x when the envelope bound
/// holds, with equality everywhere at Z = 0.
double log_accept_ratio(const ACGEnvelope& env, const Eigen::Vector4d& x);

inline constexpr int kProposalBatch = 10;
inline constexpr int kMaxBatches = 100;

struct SampleResult {
    UnitQuaternion q;
    int proposals_used = 0;
};

/// One exact draw. Proposes in batches of 10 and returns the first accepted
/// sample; throws SamplingFailedError after 100 batches (a bound violation,
/// which cannot happen with an exact b).
SampleResult sample_bingham(const BinghamParams& params, const ACGEnvelope& env, Rng& rng);

struct BatchSampleStats {
    Eigen::Matrix<double, 4, Eigen::Dynamic> samples;
    long total_proposals = 0;
    double acceptance_rate() const
    {
        return total_proposals == 0
                   ? 0.0
                   : static_cast<double>(samples.cols()) / static_cast<double>(total_proposals);
    }
};

BatchSampleStats sample_bingham_n(const BinghamParams& params, const ACGEnvelope& env,
                                  Rng& rng, int count);

} // namespace bpp
