#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

#include "bpp/diffnet.hpp"

namespace bpp {

inline constexpr double kLog2PiSq = 2.9826069522131206; // log(2*pi^2), surface area of S^3
inline constexpr double kZMin = -500.0;                 // dispersion domain lower edge

/// Normalization-constant provider for the Bingham density on S^3 with
/// dispersion diag(z1, z2, z3, 0), z_i in [-500, 0].
/// log_N is symmetric in its arguments; grad components are E[x_i^2] under
/// the distribution and live in (0, 1).
class NormConstProvider {
public:
    virtual ~NormConstProvider() = default;
    virtual double log_N(double z1, double z2, double z3) const = 0;
    virtual Eigen::Vector3d grad_log_N(double z1, double z2, double z3) const = 0;
};

/// Deterministic Gauss-Legendre product rule over 4D spherical coordinates
/// (fixed order per axis, default 64). Arguments are sorted internally, so
/// permutation invariance is exact. The integrand is exp(x^T Z x) with
/// z <= 0, hence bounded by 1; no overflow handling is needed.
class QuadratureNormConst final : public NormConstProvider {
public:
    explicit QuadratureNormConst(int order = 64);

    double log_N(double z1, double z2, double z3) const override;
    Eigen::Vector3d grad_log_N(double z1, double z2, double z3) const override;

    int order() const { return order_; }

private:
    void integrate(double z1, double z2, double z3, double* log_n,
                   Eigen::Vector3d* grad) const;

    int order_;
    // Per-axis tables; volume factor sin^2(phi1) sin(phi2) folded into weights.
    std::vector<double> s1_, w1_;        // sin^2 phi1, weight
    std::vector<double> s2_, c2_, w2_;   // sin^2 phi2, cos^2 phi2, weight
    std::vector<double> s3_, c3_, w3_;   // sin^2 phi3, cos^2 phi3, weight
};

struct BSolution {
    double b;
};

/// Root of sum_i 1/(b + 2 z_i) = 1 (z_4 = 0) on the branch where every
/// denominator is positive, i.e. b > -2 min(z). Residual <= 1e-10.
BSolution solve_b(double z1, double z2, double z3);

/// Envelope-constant source for the sampler. bound_margin() is added to the
/// log envelope constant; fitted solvers use it to absorb fit error.
class BProvider {
public:
    virtual ~BProvider() = default;
    virtual double b(double z1, double z2, double z3) const = 0;
    virtual double bound_margin() const { return 0.0; }
};

class ExactBProvider final : public BProvider {
public:
    double b(double z1, double z2, double z3) const override
    {
        return solve_b(z1, z2, z3).b;
    }
};

struct NormTableRow {
    double z1, z2, z3; // sorted ascending, in [-500, 0]
    double log_n;
};

struct NormTableMeta {
    int version = 1;
    std::string grid = "per-axis z = -(10^u - 1), u ~ U[0, log10(501)], sorted ascending";
    int quad_order = 64;
    std::uint64_t seed = 0;
    int count = 0;
};

struct NormTable {
    std::vector<NormTableRow> rows;
    NormTableMeta meta;
};

/// Deterministic dataset of (z triple, log N) rows. Triples are drawn
/// log-densely near zero (where N varies fastest) and sorted ascending.
/// Row evaluation is a parallel map with deterministic output ordering.
NormTable gen_norm_dataset(int count, std::uint64_t seed, const QuadratureNormConst& quad,
                           int threads = 1);

/// CSV with header z1,z2,z3,logN at 17 significant digits, plus a sidecar
/// metadata file at <path>.meta.json.
void save_norm_table(const NormTable& table, const std::filesystem::path& csv_path);
NormTable load_norm_table(const std::filesystem::path& csv_path);

struct FitConfig {
    std::vector<int> hidden = {128, 128};
    Activation activation = Activation::Softplus;
    int epochs = 400;
    int batch_size = 512;
    double lr_start = 1e-3;
    double lr_end = 1e-5;
    double holdout_frac = 0.1;
    std::uint64_t seed = 0;
};

struct FitReport {
    int rows = 0;
    int holdout_rows = 0;
    int epochs_run = 0;
    double max_abs_err = 0.0;    // held-out, in target units
    double median_abs_err = 0.0; // held-out
    double max_rel_err = 0.0;    // held-out, relative to target magnitude
    bool tolerance_met = false;
};

/// Fitted fast provider backed by a small MLP. Inputs are canonicalized
/// (sorted ascending, then warped u_i = log10(1 - z_i)) before the net's
/// affine normalization; gradients are chained through the warp, so the
/// provider exposes exact analytic input gradients of its own function.
class FittedNormConst final : public NormConstProvider {
public:
    FittedNormConst() = default;
    explicit FittedNormConst(DiffNet net) : net_(std::move(net)) {}

    double log_N(double z1, double z2, double z3) const override;
    Eigen::Vector3d grad_log_N(double z1, double z2, double z3) const override;

    const DiffNet& net() const { return net_; }
    void save(const std::filesystem::path& path) const { net_.save(path); }
    static FittedNormConst load(const std::filesystem::path& path);

private:
    DiffNet net_;
};

/// Fitted b solver: b(z) = max(4, -2 min(z)) + softplus(net(u(z))), which
/// keeps b above the positive-definiteness floor by construction.
class FittedBSolver final : public BProvider {
public:
    FittedBSolver() = default;
    explicit FittedBSolver(DiffNet net) : net_(std::move(net)) {}

    double b(double z1, double z2, double z3) const override;
    double bound_margin() const override { return 1e-3; }

    const DiffNet& net() const { return net_; }
    void save(const std::filesystem::path& path) const { net_.save(path); }
    static FittedBSolver load(const std::filesystem::path& path);

private:
    DiffNet net_;
};

inline constexpr double kFitFnTolMax = 0.05;     // nats, held-out max
inline constexpr double kFitFnTolMedian = 0.005; // nats, held-out median
inline constexpr double kFitFbTolRel = 1e-2;     // held-out max relative

/// Train f_N on a table. Throws FitFailedError (with the achieved error)
/// if the held-out max error exceeds tolerance after the epoch budget;
/// `report` is filled either way when non-null.
FittedNormConst fit_f_N(const NormTable& table, const FitConfig& cfg, FitReport* report);

struct BSample {
    double z1, z2, z3;
    double b;
};

/// Deterministic (z, b) training set using the dataset sampling scheme.
std::vector<BSample> gen_b_samples(int count, std::uint64_t seed);

FittedBSolver fit_f_b(const std::vector<BSample>& samples, const FitConfig& cfg,
                      FitReport* report);

} // namespace bpp
