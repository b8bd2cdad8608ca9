#include "bpp/bingham.hpp"

#include <cmath>
#include <stdexcept>

#include "bpp/errors.hpp"

namespace bpp {

namespace {

constexpr double kGramSchmidtEps = 1e-8;

struct GramSchmidtTape {
    Eigen::Matrix4d V;    // inputs, columns
    Eigen::Matrix4d Mhat; // orthonormal columns
    Eigen::Matrix4d U;    // residuals before normalization
    double r[4][4];       // r[k][i] = <m_k, v_i> for k < i
};

Eigen::Matrix4d gram_schmidt(const Eigen::Matrix4d& V, GramSchmidtTape* tape)
{
    Eigen::Matrix4d M;
    Eigen::Matrix4d U;
    double r[4][4] = {};
    for (int i = 0; i < 4; ++i) {
        Eigen::Vector4d u = V.col(i);
        for (int k = 0; k < i; ++k) {
            r[k][i] = M.col(k).dot(V.col(i));
            u -= r[k][i] * M.col(k);
        }
        double norm = u.norm();
        if (norm < kGramSchmidtEps)
            throw DegenerateBasisError(
                "transform_m: residual norm below 1e-8 at column " + std::to_string(i));
        U.col(i) = u;
        M.col(i) = u / norm;
    }
    if (tape != nullptr) {
        tape->V = V;
        tape->Mhat = M;
        tape->U = U;
        for (int k = 0; k < 4; ++k)
            for (int i = 0; i < 4; ++i)
                tape->r[k][i] = r[k][i];
    }
    return M;
}

// Reverse-mode pass: given dL/dMhat (per column), accumulate dL/dV.
Eigen::Matrix4d gram_schmidt_backward(const GramSchmidtTape& tape,
                                      const Eigen::Matrix4d& dM)
{
    Eigen::Matrix4d dV = Eigen::Matrix4d::Zero();
    Eigen::Matrix4d acc = dM; // running cotangent on each m-hat column
    for (int i = 3; i >= 0; --i) {
        const Eigen::Vector4d m = tape.Mhat.col(i);
        const double unorm = tape.U.col(i).norm();
        // m = u / ||u||
        Eigen::Vector4d gu = (acc.col(i) - m * m.dot(acc.col(i))) / unorm;
        // u_i = v_i - sum_{k<i} <m_k, v_i> m_k
        Eigen::Vector4d gv = gu;
        for (int k = 0; k < i; ++k) {
            const Eigen::Vector4d mk = tape.Mhat.col(k);
            double mg = mk.dot(gu);
            gv -= mk * mg;
            acc.col(k) -= mg * tape.V.col(i) + tape.r[k][i] * gu;
        }
        dV.col(i) += gv;
    }
    return dV;
}

struct ZTape {
    double expv[3];   // e^{v1..v3}
    double cum[3];    // cumulative sums before clamping
    bool clamped[3];  // whether each cumulative sum hit -500
};

DispersionDiag transform_z_tape(double v1, double v2, double v3, ZTape* tape)
{
    const double v[3] = {v1, v2, v3};
    double expv[3], cum[3], z[3];
    bool clamped[3];
    double running = 0.0;
    for (int i = 0; i < 3; ++i) {
        expv[i] = std::exp(v[i]);
        running -= expv[i];
        cum[i] = running;
        clamped[i] = cum[i] < -kZClamp;
        z[i] = clamped[i] ? -kZClamp : cum[i];
    }
    if (tape != nullptr) {
        for (int i = 0; i < 3; ++i) {
            tape->expv[i] = expv[i];
            tape->cum[i] = cum[i];
            tape->clamped[i] = clamped[i];
        }
    }
    // Cumulative sums descend, so the ascending diagonal is (c3, c2, c1).
    return DispersionDiag{z[2], z[1], z[0]};
}

} // namespace

bool is_orthonormal(const Eigen::Matrix4d& m, double tol)
{
    return ((m.transpose() * m) - Eigen::Matrix4d::Identity()).cwiseAbs().maxCoeff() <= tol;
}

DispersionDiag transform_z(double v1, double v2, double v3)
{
    if (!std::isfinite(v1) || !std::isfinite(v2) || !std::isfinite(v3))
        throw std::invalid_argument("transform_z: non-finite input");
    return transform_z_tape(v1, v2, v3, nullptr);
}

Eigen::Matrix4d transform_m(const Eigen::Matrix4d& V)
{
    if (!V.allFinite())
        throw std::invalid_argument("transform_m: non-finite input");
    return gram_schmidt(V, nullptr);
}

BinghamParams params_from_raw(const RawPolicyVector& v)
{
    if (!v.allFinite())
        throw std::invalid_argument("params_from_raw: non-finite input");
    BinghamParams p;
    p.Z = transform_z(v[0], v[1], v[2]);
    Eigen::Matrix4d V;
    for (int i = 0; i < 4; ++i)
        V.col(i) = v.segment<4>(3 + 4 * i);
    p.M = transform_m(V);
    return p;
}

double bingham_exponent(const BinghamParams& params, const Eigen::Vector4d& q)
{
    const double z[3] = {params.Z.z1, params.Z.z2, params.Z.z3};
    double e = 0.0;
    for (int i = 0; i < 3; ++i) {
        double t = params.M.col(i).dot(q);
        e += z[i] * t * t;
    }
    return e;
}

double log_pdf(const BinghamParams& params, const UnitQuaternion& q,
               const NormConstProvider& provider)
{
    return bingham_exponent(params, q.coeffs()) -
           provider.log_N(params.Z.z1, params.Z.z2, params.Z.z3);
}

double entropy(const BinghamParams& params, const NormConstProvider& provider)
{
    const auto& Z = params.Z;
    double log_n = provider.log_N(Z.z1, Z.z2, Z.z3);
    Eigen::Vector3d g = provider.grad_log_N(Z.z1, Z.z2, Z.z3);
    return log_n - (Z.z1 * g[0] + Z.z2 * g[1] + Z.z3 * g[2]);
}

UnitQuaternion mode(const BinghamParams& params)
{
    return UnitQuaternion::normalized(params.M.col(3));
}

double log_pdf_raw(const RawPolicyVector& v, const Eigen::Vector4d& q,
                   const NormConstProvider& provider, RawPolicyVector* grad)
{
    if (!v.allFinite())
        throw std::invalid_argument("log_pdf_raw: non-finite input");

    ZTape ztape;
    DispersionDiag Z = transform_z_tape(v[0], v[1], v[2], &ztape);

    Eigen::Matrix4d V;
    for (int i = 0; i < 4; ++i)
        V.col(i) = v.segment<4>(3 + 4 * i);
    GramSchmidtTape gtape;
    Eigen::Matrix4d M = gram_schmidt(V, &gtape);

    const double z[3] = {Z.z1, Z.z2, Z.z3};
    double dots[3];
    double exponent = 0.0;
    for (int i = 0; i < 3; ++i) {
        dots[i] = M.col(i).dot(q);
        exponent += z[i] * dots[i] * dots[i];
    }
    double log_n = provider.log_N(z[0], z[1], z[2]);
    double lp = exponent - log_n;

    if (grad != nullptr) {
        Eigen::Vector3d gn = provider.grad_log_N(z[0], z[1], z[2]);
        // d(lp)/dz_i over the ascending diagonal.
        double dz[3];
        for (int i = 0; i < 3; ++i)
            dz[i] = dots[i] * dots[i] - gn[i];

        // Ascending diag (z1,z2,z3) = (clamp(c3), clamp(c2), clamp(c1)).
        double dcum[3];
        dcum[0] = ztape.clamped[0] ? 0.0 : dz[2];
        dcum[1] = ztape.clamped[1] ? 0.0 : dz[1];
        dcum[2] = ztape.clamped[2] ? 0.0 : dz[0];
        for (int j = 0; j < 3; ++j) {
            double acc = 0.0;
            for (int k = j; k < 3; ++k)
                acc += dcum[k];
            (*grad)[j] = -ztape.expv[j] * acc;
        }

        Eigen::Matrix4d dM = Eigen::Matrix4d::Zero();
        for (int i = 0; i < 3; ++i)
            dM.col(i) = 2.0 * z[i] * dots[i] * q;
        Eigen::Matrix4d dV = gram_schmidt_backward(gtape, dM);
        for (int i = 0; i < 4; ++i)
            grad->segment<4>(3 + 4 * i) = dV.col(i);
    }
    return lp;
}

Eigen::Vector3d entropy_grad_z(const DispersionDiag& Z, const NormConstProvider& provider,
                               double h)
{
    const Eigen::Vector3d z(Z.z1, Z.z2, Z.z3);
    Eigen::Vector3d out;
    for (int j = 0; j < 3; ++j) {
        // Central differences, shifted inward at the domain edges.
        double hj = h;
        double zp = std::min(z[j] + hj, 0.0);
        double zm = std::max(z[j] - hj, -kZClamp);
        Eigen::Vector3d ep = z, em = z;
        ep[j] = zp;
        em[j] = zm;
        Eigen::Vector3d gp = provider.grad_log_N(ep[0], ep[1], ep[2]);
        Eigen::Vector3d gm = provider.grad_log_N(em[0], em[1], em[2]);
        Eigen::Vector3d hess_col = (gp - gm) / (zp - zm);
        out[j] = -z.dot(hess_col);
    }
    return out;
}

} // namespace bpp
