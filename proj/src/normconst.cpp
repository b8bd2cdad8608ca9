#include "bpp/normconst.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "bpp/errors.hpp"
#include "bpp/rng.hpp"

namespace bpp {

namespace {

constexpr double kRangeSlack = 1e-9;
const double kUMax = std::log10(501.0);

void check_z_range(double z1, double z2, double z3)
{
    for (double z : {z1, z2, z3}) {
        if (!std::isfinite(z) || z < kZMin - 1e-6 || z > kRangeSlack)
            throw std::invalid_argument("dispersion entry outside [-500, 0]: z=" +
                                        std::to_string(z));
    }
}

struct GaussLegendre {
    std::vector<double> x, w; // nodes and weights on [-1, 1]
};

// Newton iteration on the Legendre recurrence; standard construction.
GaussLegendre gauss_legendre(int n)
{
    GaussLegendre gl;
    gl.x.resize(n);
    gl.w.resize(n);
    const int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p_prev = 1.0;
            double p_cur = x;
            for (int k = 2; k <= n; ++k) {
                double p_next = ((2.0 * k - 1.0) * x * p_cur - (k - 1.0) * p_prev) / k;
                p_prev = p_cur;
                p_cur = p_next;
            }
            dp = n * (x * p_cur - p_prev) / (x * x - 1.0);
            double dx = p_cur / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15)
                break;
        }
        gl.x[i] = -x;
        gl.x[n - 1 - i] = x;
        double w = 2.0 / ((1.0 - x * x) * dp * dp);
        gl.w[i] = w;
        gl.w[n - 1 - i] = w;
    }
    return gl;
}

std::string fmt17(double v)
{
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

double softplus(double x)
{
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double logistic(double x)
{
    return 1.0 / (1.0 + std::exp(-x));
}

// Ascending sort of three values with the permutation that produced it:
// sorted[m] == values[perm[m]].
void sort3(const double in[3], double out[3], int perm[3])
{
    perm[0] = 0;
    perm[1] = 1;
    perm[2] = 2;
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2 - a; ++b)
            if (in[perm[b]] > in[perm[b + 1]])
                std::swap(perm[b], perm[b + 1]);
    for (int m = 0; m < 3; ++m)
        out[m] = in[perm[m]];
}

Eigen::Vector3d warp_sorted(const double zs[3])
{
    return Eigen::Vector3d(std::log10(1.0 - zs[0]), std::log10(1.0 - zs[1]),
                           std::log10(1.0 - zs[2]));
}

void fisher_yates(std::vector<int>& idx, Rng& rng)
{
    for (std::size_t i = idx.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(idx[i - 1], idx[j]);
    }
}

double cosine_lr(double lr0, double lr1, int epoch, int total)
{
    if (total <= 1)
        return lr0;
    double t = static_cast<double>(epoch) / static_cast<double>(total - 1);
    return lr1 + 0.5 * (lr0 - lr1) * (1.0 + std::cos(M_PI * t));
}

} // namespace

QuadratureNormConst::QuadratureNormConst(int order) : order_(order)
{
    if (order < 8)
        throw std::invalid_argument("QuadratureNormConst: order too small");
    GaussLegendre gl = gauss_legendre(order);

    s1_.resize(order);
    w1_.resize(order);
    s2_.resize(order);
    c2_.resize(order);
    w2_.resize(order);
    s3_.resize(order);
    c3_.resize(order);
    w3_.resize(order);

    for (int i = 0; i < order; ++i) {
        // phi1, phi2 in [0, pi]; phi3 in [0, 2*pi]
        double phi1 = (gl.x[i] + 1.0) * M_PI / 2.0;
        double s1 = std::sin(phi1);
        s1_[i] = s1 * s1;
        w1_[i] = gl.w[i] * (M_PI / 2.0) * s1 * s1; // volume factor sin^2(phi1)

        double phi2 = phi1;
        double s2 = std::sin(phi2);
        double c2 = std::cos(phi2);
        s2_[i] = s2 * s2;
        c2_[i] = c2 * c2;
        w2_[i] = gl.w[i] * (M_PI / 2.0) * s2; // volume factor sin(phi2)

        double phi3 = (gl.x[i] + 1.0) * M_PI;
        double s3 = std::sin(phi3);
        double c3 = std::cos(phi3);
        s3_[i] = s3 * s3;
        c3_[i] = c3 * c3;
        w3_[i] = gl.w[i] * M_PI;
    }
}

void QuadratureNormConst::integrate(double z1, double z2, double z3, double* log_n,
                                    Eigen::Vector3d* grad) const
{
    check_z_range(z1, z2, z3);
    const double zin[3] = {std::min(z1, 0.0), std::min(z2, 0.0), std::min(z3, 0.0)};
    double zs[3];
    int perm[3];
    sort3(zin, zs, perm);

    const int n = order_;
    std::vector<double> t3(n);
    for (int k = 0; k < n; ++k)
        t3[k] = zs[0] * s3_[k] + zs[1] * c3_[k];

    double acc_n = 0.0, g1 = 0.0, g2 = 0.0, g3 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double a_s = s1_[i];
        const double a_w = w1_[i];
        for (int j = 0; j < n; ++j) {
            const double alpha = a_s * s2_[j];
            const double x3sq = a_s * c2_[j];
            const double beta = zs[2] * x3sq;
            const double wij = a_w * w2_[j];
            if (grad == nullptr) {
                double local = 0.0;
                for (int k = 0; k < n; ++k)
                    local += w3_[k] * std::exp(alpha * t3[k] + beta);
                acc_n += wij * local;
            } else {
                double ln = 0.0, l1 = 0.0, l2 = 0.0;
                for (int k = 0; k < n; ++k) {
                    double e = w3_[k] * std::exp(alpha * t3[k] + beta);
                    ln += e;
                    l1 += e * s3_[k];
                    l2 += e * c3_[k];
                }
                acc_n += wij * ln;
                g1 += wij * alpha * l1;
                g2 += wij * alpha * l2;
                g3 += wij * x3sq * ln;
            }
        }
    }

    *log_n = std::log(acc_n);
    if (grad != nullptr) {
        Eigen::Vector3d sorted_grad(g1 / acc_n, g2 / acc_n, g3 / acc_n);
        Eigen::Vector3d out;
        for (int m = 0; m < 3; ++m)
            out[perm[m]] = sorted_grad[m];
        *grad = out;
    }
}

double QuadratureNormConst::log_N(double z1, double z2, double z3) const
{
    double log_n = 0.0;
    integrate(z1, z2, z3, &log_n, nullptr);
    return log_n;
}

Eigen::Vector3d QuadratureNormConst::grad_log_N(double z1, double z2, double z3) const
{
    double log_n = 0.0;
    Eigen::Vector3d grad;
    integrate(z1, z2, z3, &log_n, &grad);
    return grad;
}

BSolution solve_b(double z1, double z2, double z3)
{
    check_z_range(z1, z2, z3);
    const double za = std::min(z1, 0.0), zb = std::min(z2, 0.0), zc = std::min(z3, 0.0);
    if (za == 0.0 && zb == 0.0 && zc == 0.0)
        return {4.0}; // 4/b = 1

    auto resid = [&](double b) {
        return 1.0 / (b + 2.0 * za) + 1.0 / (b + 2.0 * zb) + 1.0 / (b + 2.0 * zc) +
               1.0 / b - 1.0;
    };
    auto dresid = [&](double b) {
        auto sq = [](double x) { return x * x; };
        return -1.0 / sq(b + 2.0 * za) - 1.0 / sq(b + 2.0 * zb) - 1.0 / sq(b + 2.0 * zc) -
               1.0 / sq(b);
    };

    const double pole = -2.0 * std::min({za, zb, zc});
    double lo = pole + 1e-9 * (1.0 + pole); // resid > 0 here
    double hi = pole + 4.0;                 // every denominator >= 4 => resid <= 0
    for (int it = 0; it < 120 && (hi - lo) > 1e-15 * hi; ++it) {
        double mid = 0.5 * (lo + hi);
        if (resid(mid) > 0.0)
            lo = mid;
        else
            hi = mid;
    }
    // Newton polish from the right; the residual is convex on this branch.
    double b = hi;
    for (int it = 0; it < 50; ++it) {
        double f = resid(b);
        if (f == 0.0)
            break;
        double step = f / dresid(b);
        double next = b - step;
        if (!(next > pole))
            break;
        if (next == b)
            break;
        b = next;
    }
    return {b};
}

NormTable gen_norm_dataset(int count, std::uint64_t seed, const QuadratureNormConst& quad,
                           int threads)
{
    if (count < 1)
        throw std::invalid_argument("gen_norm_dataset: count must be >= 1");

    NormTable table;
    table.rows.resize(static_cast<std::size_t>(count));
    table.meta.quad_order = quad.order();
    table.meta.seed = seed;
    table.meta.count = count;

    // Draw all triples sequentially so the sample set is a pure function of
    // the seed, independent of the thread count.
    Rng rng(seed);
    for (int r = 0; r < count; ++r) {
        double z[3];
        for (double& v : z) {
            double u = uniform01(rng) * kUMax;
            v = -(std::pow(10.0, u) - 1.0);
        }
        std::sort(z, z + 3);
        auto& row = table.rows[static_cast<std::size_t>(r)];
        row.z1 = z[0];
        row.z2 = z[1];
        row.z3 = z[2];
    }

    int nthreads = std::max(1, std::min(threads, count));
    auto worker = [&table, &quad](int begin, int end) {
        for (int r = begin; r < end; ++r) {
            auto& row = table.rows[static_cast<std::size_t>(r)];
            row.log_n = quad.log_N(row.z1, row.z2, row.z3);
        }
    };
    if (nthreads == 1) {
        worker(0, count);
    } else {
        std::vector<std::thread> pool;
        int chunk = (count + nthreads - 1) / nthreads;
        for (int t = 0; t < nthreads; ++t) {
            int begin = t * chunk;
            int end = std::min(count, begin + chunk);
            if (begin < end)
                pool.emplace_back(worker, begin, end);
        }
        for (auto& th : pool)
            th.join();
    }
    return table;
}

void save_norm_table(const NormTable& table, const std::filesystem::path& csv_path)
{
    std::ofstream out(csv_path);
    if (!out)
        throw std::runtime_error("save_norm_table: cannot open " + csv_path.string());
    out << "z1,z2,z3,logN\n";
    for (const auto& row : table.rows)
        out << fmt17(row.z1) << ',' << fmt17(row.z2) << ',' << fmt17(row.z3) << ','
            << fmt17(row.log_n) << '\n';
    if (!out)
        throw std::runtime_error("save_norm_table: write failed");

    nlohmann::json meta;
    meta["version"] = table.meta.version;
    meta["grid"] = table.meta.grid;
    meta["quad_order"] = table.meta.quad_order;
    meta["seed"] = table.meta.seed;
    meta["count"] = table.meta.count;
    std::ofstream mout(csv_path.string() + ".meta.json");
    if (!mout)
        throw std::runtime_error("save_norm_table: cannot open metadata sidecar");
    mout << meta.dump(2) << "\n";
}

NormTable load_norm_table(const std::filesystem::path& csv_path)
{
    std::ifstream in(csv_path);
    if (!in)
        throw std::runtime_error("load_norm_table: cannot open " + csv_path.string());

    NormTable table;
    std::string line;
    if (!std::getline(in, line) || line != "z1,z2,z3,logN")
        throw std::runtime_error("load_norm_table: bad header in " + csv_path.string());

    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        std::array<double, 4> vals{};
        const char* p = line.data();
        const char* end = line.data() + line.size();
        for (int f = 0; f < 4; ++f) {
            auto res = std::from_chars(p, end, vals[static_cast<std::size_t>(f)]);
            if (res.ec != std::errc())
                throw std::runtime_error("load_norm_table: parse error: " + line);
            p = res.ptr;
            if (f < 3) {
                if (p == end || *p != ',')
                    throw std::runtime_error("load_norm_table: parse error: " + line);
                ++p;
            }
        }
        NormTableRow row{vals[0], vals[1], vals[2], vals[3]};
        if (!(row.z1 <= row.z2 && row.z2 <= row.z3 && row.z3 <= kRangeSlack))
            throw std::runtime_error("load_norm_table: row violates z ordering");
        if (!std::isfinite(row.log_n) || row.log_n > kLog2PiSq + 1e-9)
            throw std::runtime_error("load_norm_table: logN above uniform bound");
        table.rows.push_back(row);
    }

    std::ifstream min(csv_path.string() + ".meta.json");
    if (min) {
        nlohmann::json meta;
        min >> meta;
        table.meta.version = meta.value("version", 1);
        table.meta.grid = meta.value("grid", table.meta.grid);
        table.meta.quad_order = meta.value("quad_order", 0);
        table.meta.seed = meta.value("seed", std::uint64_t{0});
        table.meta.count = meta.value("count", static_cast<int>(table.rows.size()));
    } else {
        table.meta.count = static_cast<int>(table.rows.size());
    }
    return table;
}

FittedNormConst FittedNormConst::load(const std::filesystem::path& path)
{
    DiffNet net = DiffNet::load(path);
    if (net.input_dim() != 3 || net.output_dim() != 1)
        throw std::runtime_error("FittedNormConst::load: wrong net shape");
    if (!net.model_tag.empty() && net.model_tag != "f_N")
        throw std::runtime_error("FittedNormConst::load: file is not an f_N model");
    return FittedNormConst(std::move(net));
}

double FittedNormConst::log_N(double z1, double z2, double z3) const
{
    check_z_range(z1, z2, z3);
    const double zin[3] = {std::min(z1, 0.0), std::min(z2, 0.0), std::min(z3, 0.0)};
    double zs[3];
    int perm[3];
    sort3(zin, zs, perm);
    return net_.value(warp_sorted(zs));
}

Eigen::Vector3d FittedNormConst::grad_log_N(double z1, double z2, double z3) const
{
    check_z_range(z1, z2, z3);
    const double zin[3] = {std::min(z1, 0.0), std::min(z2, 0.0), std::min(z3, 0.0)};
    double zs[3];
    int perm[3];
    sort3(zin, zs, perm);
    Eigen::Vector3d gu = net_.input_gradient(warp_sorted(zs));
    Eigen::Vector3d out;
    for (int m = 0; m < 3; ++m) {
        double dudz = -1.0 / ((1.0 - zs[m]) * std::log(10.0));
        out[perm[m]] = gu[m] * dudz;
    }
    return out;
}

FittedBSolver FittedBSolver::load(const std::filesystem::path& path)
{
    DiffNet net = DiffNet::load(path);
    if (net.input_dim() != 3 || net.output_dim() != 1)
        throw std::runtime_error("FittedBSolver::load: wrong net shape");
    if (!net.model_tag.empty() && net.model_tag != "f_b")
        throw std::runtime_error("FittedBSolver::load: file is not an f_b model");
    return FittedBSolver(std::move(net));
}

double FittedBSolver::b(double z1, double z2, double z3) const
{
    check_z_range(z1, z2, z3);
    const double zin[3] = {std::min(z1, 0.0), std::min(z2, 0.0), std::min(z3, 0.0)};
    double zs[3];
    int perm[3];
    sort3(zin, zs, perm);
    double lower = std::max(4.0, -2.0 * zs[0]);
    return lower + softplus(net_.value(warp_sorted(zs)));
}

std::vector<BSample> gen_b_samples(int count, std::uint64_t seed)
{
    if (count < 1)
        throw std::invalid_argument("gen_b_samples: count must be >= 1");
    Rng rng(seed);
    std::vector<BSample> samples(static_cast<std::size_t>(count));
    for (auto& s : samples) {
        double z[3];
        for (double& v : z) {
            double u = uniform01(rng) * kUMax;
            v = -(std::pow(10.0, u) - 1.0);
        }
        std::sort(z, z + 3);
        s.z1 = z[0];
        s.z2 = z[1];
        s.z3 = z[2];
        s.b = solve_b(z[0], z[1], z[2]).b;
    }
    return samples;
}

namespace {

struct SplitIdx {
    std::vector<int> train, holdout;
};

SplitIdx split_indices(int n, double holdout_frac, Rng& rng)
{
    std::vector<int> idx(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        idx[static_cast<std::size_t>(i)] = i;
    fisher_yates(idx, rng);
    int nh = std::max(1, static_cast<int>(std::lround(holdout_frac * n)));
    SplitIdx s;
    s.holdout.assign(idx.begin(), idx.begin() + nh);
    s.train.assign(idx.begin() + nh, idx.end());
    return s;
}

void set_affine_from_stats(AffineMap& map, const Eigen::MatrixXd& data)
{
    const auto n = static_cast<double>(data.cols());
    map.offset = data.rowwise().mean();
    Eigen::VectorXd var =
        (data.colwise() - map.offset).array().square().rowwise().sum() / n;
    map.scale = var.array().sqrt().max(1e-9);
}

} // namespace

FittedNormConst fit_f_N(const NormTable& table, const FitConfig& cfg, FitReport* report)
{
    const int n = static_cast<int>(table.rows.size());
    if (n < 10000)
        throw std::invalid_argument("fit_f_N: need at least 10^4 rows");

    Eigen::MatrixXd U(3, n);
    Eigen::MatrixXd Y(1, n);
    for (int i = 0; i < n; ++i) {
        const auto& row = table.rows[static_cast<std::size_t>(i)];
        double zs[3] = {row.z1, row.z2, row.z3};
        U.col(i) = warp_sorted(zs);
        Y(0, i) = row.log_n;
    }

    Rng rng(cfg.seed);
    SplitIdx split = split_indices(n, cfg.holdout_frac, rng);
    const int ntr = static_cast<int>(split.train.size());

    Eigen::MatrixXd Utr(3, ntr), Ytr(1, ntr);
    for (int i = 0; i < ntr; ++i) {
        Utr.col(i) = U.col(split.train[static_cast<std::size_t>(i)]);
        Ytr(0, i) = Y(0, split.train[static_cast<std::size_t>(i)]);
    }

    std::vector<int> sizes;
    sizes.push_back(3);
    for (int h : cfg.hidden)
        sizes.push_back(h);
    sizes.push_back(1);
    DiffNet net = DiffNet::make_mlp(sizes, cfg.activation, cfg.seed);
    set_affine_from_stats(net.in_map, Utr);
    set_affine_from_stats(net.out_map, Ytr);
    net.model_tag = "f_N";

    AdamState opt = AdamState::for_net(net);
    std::vector<int> order(split.train.begin(), split.train.end());

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double lr = cosine_lr(cfg.lr_start, cfg.lr_end, epoch, cfg.epochs);
        fisher_yates(order, rng);
        for (int start = 0; start < ntr; start += cfg.batch_size) {
            int bs = std::min(cfg.batch_size, ntr - start);
            Eigen::MatrixXd Xb(3, bs), Tb(1, bs);
            for (int k = 0; k < bs; ++k) {
                int idx = order[static_cast<std::size_t>(start + k)];
                Xb.col(k) = U.col(idx);
                Tb(0, k) = Y(0, idx);
            }
            GradTape tape;
            Eigen::MatrixXd Yb = net.forward(Xb, tape);
            Eigen::MatrixXd dY = (Yb - Tb) / static_cast<double>(bs);
            ParamGrads grads;
            net.backward(tape, dY, grads);
            adam_step(net, grads, opt, lr);
        }
    }

    std::vector<double> errs;
    errs.reserve(split.holdout.size());
    for (int idx : split.holdout) {
        double pred = net.value(U.col(idx));
        errs.push_back(std::abs(pred - Y(0, idx)));
    }
    std::vector<double> sorted_errs = errs;
    std::sort(sorted_errs.begin(), sorted_errs.end());
    FitReport rep;
    rep.rows = n;
    rep.holdout_rows = static_cast<int>(split.holdout.size());
    rep.epochs_run = cfg.epochs;
    rep.max_abs_err = sorted_errs.empty() ? 0.0 : sorted_errs.back();
    rep.median_abs_err =
        sorted_errs.empty() ? 0.0 : sorted_errs[sorted_errs.size() / 2];
    rep.max_rel_err = rep.max_abs_err; // targets are O(1) nats; abs is the contract
    rep.tolerance_met =
        rep.max_abs_err <= kFitFnTolMax && rep.median_abs_err <= kFitFnTolMedian;
    if (report != nullptr)
        *report = rep;
    if (!rep.tolerance_met)
        throw FitFailedError("fit_f_N: held-out error above tolerance (max " +
                                 std::to_string(rep.max_abs_err) + " nats)",
                             rep.max_abs_err, kFitFnTolMax);
    return FittedNormConst(std::move(net));
}

FittedBSolver fit_f_b(const std::vector<BSample>& samples, const FitConfig& cfg,
                      FitReport* report)
{
    const int n = static_cast<int>(samples.size());
    if (n < 10000)
        throw std::invalid_argument("fit_f_b: need at least 10^4 samples");

    Eigen::MatrixXd U(3, n);
    Eigen::VectorXd B(n), lower(n);
    for (int i = 0; i < n; ++i) {
        const auto& s = samples[static_cast<std::size_t>(i)];
        double zs[3] = {s.z1, s.z2, s.z3};
        U.col(i) = warp_sorted(zs);
        B(i) = s.b;
        lower(i) = std::max(4.0, -2.0 * s.z1);
    }

    Rng rng(cfg.seed);
    SplitIdx split = split_indices(n, cfg.holdout_frac, rng);
    const int ntr = static_cast<int>(split.train.size());

    Eigen::MatrixXd Utr(3, ntr);
    for (int i = 0; i < ntr; ++i)
        Utr.col(i) = U.col(split.train[static_cast<std::size_t>(i)]);

    std::vector<int> sizes;
    sizes.push_back(3);
    for (int h : cfg.hidden)
        sizes.push_back(h);
    sizes.push_back(1);
    DiffNet net = DiffNet::make_mlp(sizes, cfg.activation, cfg.seed);
    set_affine_from_stats(net.in_map, Utr);
    net.model_tag = "f_b";

    AdamState opt = AdamState::for_net(net);
    std::vector<int> order(split.train.begin(), split.train.end());

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double lr = cosine_lr(cfg.lr_start, cfg.lr_end, epoch, cfg.epochs);
        fisher_yates(order, rng);
        for (int start = 0; start < ntr; start += cfg.batch_size) {
            int bs = std::min(cfg.batch_size, ntr - start);
            Eigen::MatrixXd Xb(3, bs);
            Eigen::VectorXd tb(bs), lb(bs);
            for (int k = 0; k < bs; ++k) {
                int idx = order[static_cast<std::size_t>(start + k)];
                Xb.col(k) = U.col(idx);
                tb(k) = B(idx);
                lb(k) = lower(idx);
            }
            GradTape tape;
            Eigen::MatrixXd raw = net.forward(Xb, tape);
            // b_hat = lower + softplus(raw); loss = mean 0.5 * ((b_hat - b)/b)^2
            Eigen::MatrixXd dRaw(1, bs);
            for (int k = 0; k < bs; ++k) {
                double bhat = lb(k) + softplus(raw(0, k));
                double e = (bhat - tb(k)) / tb(k);
                dRaw(0, k) = e / tb(k) * logistic(raw(0, k)) / static_cast<double>(bs);
            }
            ParamGrads grads;
            net.backward(tape, dRaw, grads);
            adam_step(net, grads, opt, lr);
        }
    }

    std::vector<double> rel_errs, abs_errs;
    rel_errs.reserve(split.holdout.size());
    for (int idx : split.holdout) {
        double bhat = lower(idx) + softplus(net.value(U.col(idx)));
        double err = std::abs(bhat - B(idx));
        abs_errs.push_back(err);
        rel_errs.push_back(err / B(idx));
    }
    std::sort(abs_errs.begin(), abs_errs.end());
    FitReport rep;
    rep.rows = n;
    rep.holdout_rows = static_cast<int>(split.holdout.size());
    rep.epochs_run = cfg.epochs;
    rep.max_abs_err = abs_errs.empty() ? 0.0 : abs_errs.back();
    rep.median_abs_err = abs_errs.empty() ? 0.0 : abs_errs[abs_errs.size() / 2];
    rep.max_rel_err = rel_errs.empty() ? 0.0 : *std::max_element(rel_errs.begin(), rel_errs.end());
    rep.tolerance_met = rep.max_rel_err <= kFitFbTolRel;
    if (report != nullptr)
        *report = rep;
    if (!rep.tolerance_met)
        throw FitFailedError("fit_f_b: held-out relative error above tolerance (max " +
                                 std::to_string(rep.max_rel_err) + ")",
                             rep.max_rel_err, kFitFbTolRel);
    return FittedBSolver(std::move(net));
}

} // namespace bpp
