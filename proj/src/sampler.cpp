#include "bpp/sampler.hpp"

#include <cmath>
#include <stdexcept>

#include "bpp/errors.hpp"

namespace bpp {

namespace {
constexpr double kDim = 4.0; // n in the envelope bound
}

ACGEnvelope build_envelope(const BinghamParams& params, const BProvider& bprov)
{
    const auto& Z = params.Z;
    ACGEnvelope env;
    env.b = bprov.b(Z.z1, Z.z2, Z.z3);

    const double eigs[4] = {1.0 + 2.0 * Z.z1 / env.b, 1.0 + 2.0 * Z.z2 / env.b,
                            1.0 + 2.0 * Z.z3 / env.b, 1.0};
    if (eigs[0] <= 0.0)
        throw std::invalid_argument("build_envelope: b below positive-definiteness floor");

    env.A = params.M * Z.diagonal().asDiagonal() * params.M.transpose();
    env.A = 0.5 * (env.A + env.A.transpose()).eval();
    env.omega = Eigen::Matrix4d::Identity() + (2.0 / env.b) * env.A;
    env.omega = 0.5 * (env.omega + env.omega.transpose()).eval();

    // |Omega| from the known eigenvalues (similarity through M).
    double log_det = 0.0;
    for (double e : eigs)
        log_det += std::log(e);

    env.log_c_star = -(kDim - env.b) / 2.0 + (kDim / 2.0) * std::log(kDim / env.b) -
                     0.5 * log_det + bprov.bound_margin();

    Eigen::LLT<Eigen::Matrix4d> llt(env.omega);
    if (llt.info() != Eigen::Success)
        throw std::invalid_argument("build_envelope: omega not positive definite");
    env.chol_u = llt.matrixU();
    return env;
}

Eigen::Matrix<double, 4, Eigen::Dynamic> sample_acg(const ACGEnvelope& env, Rng& rng,
                                                    int count)
{
    if (count < 1)
        throw std::invalid_argument("sample_acg: count must be >= 1");
    Eigen::Matrix<double, 4, Eigen::Dynamic> out(4, count);
    for (int i = 0; i < count; ++i) {
        for (;;) {
            Eigen::Vector4d u(normal(rng), normal(rng), normal(rng), normal(rng));
            // y = U^{-1} u has covariance Omega^{-1}.
            Eigen::Vector4d y = env.chol_u.triangularView<Eigen::Upper>().solve(u);
            double n = y.norm();
            if (n > 1e-12) {
                out.col(i) = y / n;
                break;
            }
        }
    }
    return out;
}

double log_accept_ratio(const ACGEnvelope& env, const Eigen::Vector4d& x)
{
    double exponent = x.dot(env.A * x);
    double s = x.dot(env.omega * x);
    return exponent - env.log_c_star + (kDim / 2.0) * std::log(s);
}

SampleResult sample_bingham(const BinghamParams& params, const ACGEnvelope& env, Rng& rng)
{
    (void)params;
    for (int batch = 0; batch < kMaxBatches; ++batch) {
        auto proposals = sample_acg(env, rng, kProposalBatch);
        for (int j = 0; j < kProposalBatch; ++j) {
            double ratio = log_accept_ratio(env, proposals.col(j));
            double w = uniform01(rng);
            if (std::log(w) <= ratio) {
                return SampleResult{UnitQuaternion::normalized(proposals.col(j)),
                                    batch * kProposalBatch + j + 1};
            }
        }
    }
    throw SamplingFailedError("sample_bingham: no acceptance in " +
                              std::to_string(kMaxBatches) + " batches (bound violated?)");
}

BatchSampleStats sample_bingham_n(const BinghamParams& params, const ACGEnvelope& env,
                                  Rng& rng, int count)
{
    BatchSampleStats stats;
    stats.samples.resize(4, count);
    for (int i = 0; i < count; ++i) {
        SampleResult r = sample_bingham(params, env, rng);
        stats.samples.col(i) = r.q.coeffs();
        stats.total_proposals += r.proposals_used;
    }
    return stats;
}

} // namespace bpp
