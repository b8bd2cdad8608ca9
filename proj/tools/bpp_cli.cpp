// Command-line front end: dataset generation, approximator fitting,
// distribution self-tests, PPO training runs, and policy evaluation.
//
// Exit codes: 0 ok, 2 usage, 3 fit tolerance miss, 4 selfcheck failure,
// 1 anything else.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

#include "bpp/bingham.hpp"
#include "bpp/errors.hpp"
#include "bpp/normconst.hpp"
#include "bpp/rlkit.hpp"
#include "bpp/rotmath.hpp"
#include "bpp/sampler.hpp"
#include "bpp/wahba.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

json load_config_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw UsageError("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw UsageError("config parse error in " + path + ": " + e.what());
    }
    if (!j.is_object())
        throw UsageError("config file must hold a JSON object: " + path);
    return j;
}

void reject_unknown(const json& j, const std::set<std::string>& allowed,
                    const std::string& cmd)
{
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (allowed.find(it.key()) == allowed.end())
            throw UsageError("unknown config key for " + cmd + ": " + it.key());
    }
}

// JSON value wins only when the flag was not given on the command line.
template <typename T>
void cfg_get(const json& j, const char* key, const CLI::Option* opt, T& target)
{
    if (j.contains(key) && (opt == nullptr || opt->count() == 0))
        target = j.at(key).get<T>();
}

void write_resolved_config(const fs::path& dir, const json& resolved)
{
    fs::create_directories(dir);
    std::ofstream out(dir / "resolved_config.json");
    if (!out)
        throw std::runtime_error("cannot write resolved_config.json in " + dir.string());
    out << resolved.dump(2) << "\n";
}

fs::path resolve_weights_dir(const std::string& flag_value)
{
    if (!flag_value.empty())
        return flag_value;
    if (const char* env = std::getenv("BPP_WEIGHTS_DIR"))
        return env;
    return "weights";
}

template <typename F>
int run_guarded(F&& f)
{
    try {
        return f();
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const bpp::FitFailedError& e) {
        std::cerr << "fit failed: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

// ---------------------------------------------------------------- gen

struct GenOpts {
    int count = 100000;
    std::uint64_t seed = 0;
    std::string out;
    int quad_order = 64;
    int threads = 1;
    std::string config;
};

int cmd_gen(GenOpts& o, const CLI::App& sub)
{
    if (!o.config.empty()) {
        json j = load_config_file(o.config);
        reject_unknown(j, {"subcommand", "count", "seed", "out", "quad_order", "threads"},
                       "gen-norm-dataset");
        cfg_get(j, "count", sub.get_option("--count"), o.count);
        cfg_get(j, "seed", sub.get_option("--seed"), o.seed);
        cfg_get(j, "out", sub.get_option("--out"), o.out);
        cfg_get(j, "quad_order", sub.get_option("--quad-order"), o.quad_order);
        cfg_get(j, "threads", sub.get_option("--threads"), o.threads);
    }
    if (o.count < 1)
        throw UsageError("--count must be >= 1");
    if (o.out.empty())
        throw UsageError("--out is required");

    json resolved = {{"subcommand", "gen-norm-dataset"}, {"count", o.count},
                     {"seed", o.seed},                   {"out", o.out},
                     {"quad_order", o.quad_order},       {"threads", o.threads}};
    fs::path outp(o.out);
    fs::path dir = outp.has_parent_path() ? outp.parent_path() : fs::path(".");
    write_resolved_config(dir, resolved);

    bpp::QuadratureNormConst quad(o.quad_order);
    bpp::NormTable table = bpp::gen_norm_dataset(o.count, o.seed, quad, o.threads);
    bpp::save_norm_table(table, outp);
    std::cout << "wrote " << table.rows.size() << " rows to " << o.out << "\n";
    return 0;
}

// ---------------------------------------------------------------- fit

struct FitOpts {
    std::string dataset;
    std::string target;
    std::string out_weights;
    std::uint64_t seed = 0;
    int epochs = 0; // 0 = per-target default
    int batch_size = 512;
    double lr_start = 1e-3;
    double lr_end = 1e-5;
    double holdout_frac = 0.1;
    std::string config;
};

int cmd_fit(FitOpts& o, const CLI::App& sub)
{
    if (!o.config.empty()) {
        json j = load_config_file(o.config);
        reject_unknown(j,
                       {"subcommand", "dataset", "target", "out_weights", "seed", "epochs",
                        "batch_size", "lr_start", "lr_end", "holdout_frac"},
                       "fit");
        cfg_get(j, "dataset", sub.get_option("--dataset"), o.dataset);
        cfg_get(j, "target", sub.get_option("--target"), o.target);
        cfg_get(j, "out_weights", sub.get_option("--out-weights"), o.out_weights);
        cfg_get(j, "seed", sub.get_option("--seed"), o.seed);
        cfg_get(j, "epochs", sub.get_option("--epochs"), o.epochs);
        cfg_get(j, "batch_size", sub.get_option("--batch-size"), o.batch_size);
        cfg_get(j, "lr_start", sub.get_option("--lr-start"), o.lr_start);
        cfg_get(j, "lr_end", sub.get_option("--lr-end"), o.lr_end);
        cfg_get(j, "holdout_frac", sub.get_option("--holdout-frac"), o.holdout_frac);
    }
    if (o.target != "fN" && o.target != "fb")
        throw UsageError("--target must be fN or fb");
    if (o.out_weights.empty())
        throw UsageError("--out-weights is required");
    if (!fs::exists(o.dataset))
        throw UsageError("dataset not found: " + o.dataset);

    json resolved = {{"subcommand", "fit"},
                     {"dataset", o.dataset},
                     {"target", o.target},
                     {"out_weights", o.out_weights},
                     {"seed", o.seed},
                     {"epochs", o.epochs},
                     {"batch_size", o.batch_size},
                     {"lr_start", o.lr_start},
                     {"lr_end", o.lr_end},
                     {"holdout_frac", o.holdout_frac}};
    fs::path outp(o.out_weights);
    fs::path dir = outp.has_parent_path() ? outp.parent_path() : fs::path(".");
    write_resolved_config(dir, resolved);

    bpp::NormTable table = bpp::load_norm_table(o.dataset);

    bpp::FitConfig fc;
    fc.seed = o.seed;
    fc.batch_size = o.batch_size;
    fc.lr_start = o.lr_start;
    fc.lr_end = o.lr_end;
    fc.holdout_frac = o.holdout_frac;
    fc.epochs = o.epochs > 0 ? o.epochs : (o.target == "fN" ? 400 : 200);

    bpp::FitReport rep;
    auto write_report = [&](const char* target) {
        json r = {{"target", target},
                  {"rows", rep.rows},
                  {"holdout_rows", rep.holdout_rows},
                  {"epochs", rep.epochs_run},
                  {"max_abs_err", rep.max_abs_err},
                  {"median_abs_err", rep.median_abs_err},
                  {"max_rel_err", rep.max_rel_err},
                  {"tolerance_met", rep.tolerance_met}};
        std::ofstream out(o.out_weights + ".report.json");
        out << r.dump(2) << "\n";
    };

    if (o.target == "fN") {
        try {
            bpp::FittedNormConst fn = bpp::fit_f_N(table, fc, &rep);
            write_report("fN");
            fn.save(outp);
            std::cout << "f_N(0,0,0) = " << fn.log_N(0, 0, 0)
                      << " (expected " << bpp::kLog2PiSq << ")\n";
            std::cout << "held-out max " << rep.max_abs_err << " nats, median "
                      << rep.median_abs_err << " nats\n";
        } catch (const bpp::FitFailedError&) {
            write_report("fN");
            throw;
        }
    } else {
        std::vector<bpp::BSample> samples;
        samples.reserve(table.rows.size());
        for (const auto& row : table.rows)
            samples.push_back({row.z1, row.z2, row.z3,
                               bpp::solve_b(row.z1, row.z2, row.z3).b});
        try {
            bpp::FittedBSolver fb = bpp::fit_f_b(samples, fc, &rep);
            write_report("fb");
            fb.save(outp);
            std::cout << "f_b(0,0,0) = " << fb.b(0, 0, 0) << " (expected 4)\n";
            std::cout << "held-out max relative error " << rep.max_rel_err << "\n";
        } catch (const bpp::FitFailedError&) {
            write_report("fb");
            throw;
        }
    }
    return 0;
}

// ---------------------------------------------------------------- selfcheck

struct SelfcheckOpts {
    std::string weights_dir;
    bool skip_slow = false;
    std::uint64_t seed = 12345;
    std::string config;
};

struct CheckOutcome {
    bool ok;
    std::string detail;
};

bpp::BinghamParams random_params(bpp::Rng& rng, double log10_zmax)
{
    Eigen::Matrix4d g;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            g(i, j) = bpp::normal(rng);
    Eigen::HouseholderQR<Eigen::Matrix4d> qr(g);
    Eigen::Matrix4d M = qr.householderQ();

    double z[3];
    for (double& v : z)
        v = -std::pow(10.0, bpp::uniform_in(rng, -1.0, log10_zmax));
    std::sort(z, z + 3);
    return bpp::BinghamParams{M, bpp::DispersionDiag{z[0], z[1], z[2]}};
}

int cmd_selfcheck(SelfcheckOpts& o, const CLI::App& sub)
{
    if (!o.config.empty()) {
        json j = load_config_file(o.config);
        reject_unknown(j, {"subcommand", "weights_dir", "skip_slow", "seed"}, "selfcheck");
        cfg_get(j, "weights_dir", sub.get_option("--weights-dir"), o.weights_dir);
        cfg_get(j, "skip_slow", sub.get_option("--skip-slow"), o.skip_slow);
        cfg_get(j, "seed", sub.get_option("--seed"), o.seed);
    }
    fs::path wdir = resolve_weights_dir(o.weights_dir);

    bpp::QuadratureNormConst quad;
    bpp::FittedNormConst fn;
    bpp::FittedBSolver fb;
    bool weights_ok = false;

    std::vector<std::pair<std::string, std::function<CheckOutcome()>>> checks;

    checks.emplace_back("weights_load", [&]() -> CheckOutcome {
        try {
            fn = bpp::FittedNormConst::load(wdir / "f_N.json");
            fb = bpp::FittedBSolver::load(wdir / "f_b.json");
            weights_ok = true;
            return {true, wdir.string()};
        } catch (const std::exception& e) {
            return {false, e.what()};
        }
    });

    checks.emplace_back("quad_norm_zero", [&]() -> CheckOutcome {
        double err = std::abs(quad.log_N(0, 0, 0) - bpp::kLog2PiSq);
        return {err <= 1e-8, "err " + std::to_string(err)};
    });

    checks.emplace_back("quad_permutation", [&]() -> CheckOutcome {
        double err = std::abs(quad.log_N(-5, -2, -1) - quad.log_N(-1, -5, -2));
        return {err <= 1e-9, "err " + std::to_string(err)};
    });

    checks.emplace_back("quad_grad_zero", [&]() -> CheckOutcome {
        Eigen::Vector3d g = quad.grad_log_N(0, 0, 0);
        double err = (g - Eigen::Vector3d::Constant(0.25)).cwiseAbs().maxCoeff();
        return {err <= 1e-8, "err " + std::to_string(err)};
    });

    checks.emplace_back("b_closed_forms", [&]() -> CheckOutcome {
        if (bpp::solve_b(0, 0, 0).b != 4.0)
            return {false, "b(0) != 4"};
        double b1 = bpp::solve_b(-1, -1, -1).b;
        if (std::abs(b1 - (3.0 + std::sqrt(7.0))) > 1e-9)
            return {false, "b(-1,-1,-1) = " + std::to_string(b1)};
        double b500 = bpp::solve_b(-500, -500, -500).b;
        double ref = (1004.0 + std::sqrt(1004.0 * 1004.0 - 4000.0)) / 2.0;
        if (std::abs(b500 - ref) / ref > 1e-6)
            return {false, "b(-500^3) = " + std::to_string(b500)};
        return {true, ""};
    });

    checks.emplace_back("fitted_norm_zero", [&]() -> CheckOutcome {
        if (!weights_ok)
            return {false, "weights unavailable"};
        double err = std::abs(fn.log_N(0, 0, 0) - bpp::kLog2PiSq);
        return {err <= 0.01, "err " + std::to_string(err)};
    });

    checks.emplace_back("fitted_b_zero", [&]() -> CheckOutcome {
        if (!weights_ok)
            return {false, "weights unavailable"};
        double err = std::abs(fb.b(0, 0, 0) - 4.0);
        return {err <= 0.04, "err " + std::to_string(err)};
    });

    checks.emplace_back("fitted_norm_grad_fd", [&]() -> CheckOutcome {
        if (!weights_ok)
            return {false, "weights unavailable"};
        bpp::Rng rng(o.seed);
        double worst = 0.0;
        for (int t = 0; t < 20; ++t) {
            double z[3];
            for (double& v : z)
                v = -std::pow(10.0, bpp::uniform_in(rng, -0.5, 2.0));
            std::sort(z, z + 3);
            if (z[1] - z[0] < 1e-3 || z[2] - z[1] < 1e-3)
                continue; // keep clear of sort kinks for the FD probe
            Eigen::Vector3d g = fn.grad_log_N(z[0], z[1], z[2]);
            for (int i = 0; i < 3; ++i) {
                double h = 1e-5 * std::max(1.0, std::abs(z[i]));
                double zp[3] = {z[0], z[1], z[2]};
                double zm[3] = {z[0], z[1], z[2]};
                zp[i] += h;
                zm[i] -= h;
                double fd = (fn.log_N(zp[0], zp[1], zp[2]) - fn.log_N(zm[0], zm[1], zm[2])) /
                            (2 * h);
                double rel = std::abs(g[i] - fd) / std::max({std::abs(fd), std::abs(g[i]), 1e-8});
                worst = std::max(worst, rel);
            }
        }
        return {worst <= 1e-4, "max rel " + std::to_string(worst)};
    });

    if (!o.skip_slow) {
        checks.emplace_back("envelope_bound_audit", [&]() -> CheckOutcome {
            bpp::Rng rng(o.seed + 1);
            bpp::ExactBProvider exact_b;
            double worst = -1e300;
            for (int p = 0; p < 10; ++p) {
                bpp::BinghamParams params = random_params(rng, std::log10(500.0));
                bpp::ACGEnvelope env = bpp::build_envelope(params, exact_b);
                for (int s = 0; s < 20000; ++s)
                    worst = std::max(worst,
                                     bpp::log_accept_ratio(env, bpp::random_unit_4vec(rng)));
            }
            return {worst <= 1e-9, "max log ratio " + std::to_string(worst)};
        });

        checks.emplace_back("acceptance_rate", [&]() -> CheckOutcome {
            bpp::Rng rng(o.seed + 2);
            bpp::ExactBProvider exact_b;
            long proposals = 0;
            const int draws = 2000;
            for (int s = 0; s < draws; ++s) {
                bpp::BinghamParams params = random_params(rng, std::log10(50.0));
                bpp::ACGEnvelope env = bpp::build_envelope(params, exact_b);
                proposals += bpp::sample_bingham(params, env, rng).proposals_used;
            }
            double rate = static_cast<double>(draws) / static_cast<double>(proposals);
            return {rate >= 0.9, "rate " + std::to_string(rate)};
        });

        checks.emplace_back("moment_identity", [&]() -> CheckOutcome {
            bpp::Rng rng(o.seed + 3);
            bpp::ExactBProvider exact_b;
            double worst = 0.0;
            for (int p = 0; p < 2; ++p) {
                bpp::BinghamParams params = random_params(rng, std::log10(50.0));
                bpp::ACGEnvelope env = bpp::build_envelope(params, exact_b);
                auto stats = bpp::sample_bingham_n(params, env, rng, 200000);
                Eigen::Matrix4d scatter = stats.samples * stats.samples.transpose() /
                                          static_cast<double>(stats.samples.cols());
                Eigen::Vector3d g =
                    quad.grad_log_N(params.Z.z1, params.Z.z2, params.Z.z3);
                Eigen::Vector4d d(g[0], g[1], g[2], 1.0 - g.sum());
                Eigen::Matrix4d expected =
                    params.M * d.asDiagonal() * params.M.transpose();
                worst = std::max(worst, (scatter - expected).cwiseAbs().maxCoeff());
            }
            return {worst <= 0.01, "max entry err " + std::to_string(worst)};
        });

        checks.emplace_back("entropy_mc", [&]() -> CheckOutcome {
            bpp::Rng rng(o.seed + 4);
            bpp::ExactBProvider exact_b;
            for (int p = 0; p < 2; ++p) {
                bpp::BinghamParams params = random_params(rng, std::log10(50.0));
                double h = bpp::entropy(params, quad);
                bpp::ACGEnvelope env = bpp::build_envelope(params, exact_b);
                auto stats = bpp::sample_bingham_n(params, env, rng, 200000);
                double sum = 0.0, sum2 = 0.0;
                const int n = static_cast<int>(stats.samples.cols());
                for (int s = 0; s < n; ++s) {
                    double lp = bpp::bingham_exponent(params, stats.samples.col(s)) -
                                quad.log_N(params.Z.z1, params.Z.z2, params.Z.z3);
                    sum += -lp;
                    sum2 += lp * lp;
                }
                double mc = sum / n;
                double se = std::sqrt(std::max(0.0, sum2 / n - mc * mc) / n);
                if (std::abs(h - mc) > 3.0 * se + 1e-9)
                    return {false, "analytic " + std::to_string(h) + " vs mc " +
                                       std::to_string(mc)};
            }
            return {true, ""};
        });
    }

    int failures = 0;
    std::string first_failure;
    for (auto& [name, fnc] : checks) {
        CheckOutcome out = fnc();
        std::cout << (out.ok ? "ok   " : "FAIL ") << name;
        if (!out.detail.empty())
            std::cout << "  (" << out.detail << ")";
        std::cout << "\n";
        if (!out.ok) {
            ++failures;
            if (first_failure.empty())
                first_failure = name;
        }
    }
    if (failures > 0) {
        std::cerr << failures << " check(s) failed, first: " << first_failure << "\n";
        return 4;
    }
    return 0;
}

// ---------------------------------------------------------------- train

struct TrainOpts {
    std::string variant = "bpp";
    std::uint64_t seed = 0;
    long steps = 200000;
    std::string out_dir;
    int num_pairs = 50;
    double noise_sigma = 0.01;
    int batch_episodes = 256;
    double lr = 3e-4;
    double clip_eps = 0.2;
    int epochs_per_batch = 10;
    double entropy_coef = 0.0;
    double value_coef = 0.5;
    std::string weights_dir;
    bool timing = false;
    std::string config;
};

int cmd_train(TrainOpts& o, const CLI::App& sub)
{
    if (!o.config.empty()) {
        json j = load_config_file(o.config);
        reject_unknown(j,
                       {"subcommand", "variant", "seed", "steps", "out_dir", "num_pairs",
                        "noise_sigma", "batch_episodes", "lr", "clip_eps",
                        "epochs_per_batch", "entropy_coef", "value_coef", "weights_dir",
                        "timing"},
                       "train");
        cfg_get(j, "variant", sub.get_option("--variant"), o.variant);
        cfg_get(j, "seed", sub.get_option("--seed"), o.seed);
        cfg_get(j, "steps", sub.get_option("--steps"), o.steps);
        cfg_get(j, "out_dir", sub.get_option("--out-dir"), o.out_dir);
        cfg_get(j, "num_pairs", sub.get_option("--num-pairs"), o.num_pairs);
        cfg_get(j, "noise_sigma", sub.get_option("--noise-sigma"), o.noise_sigma);
        cfg_get(j, "batch_episodes", sub.get_option("--batch-episodes"), o.batch_episodes);
        cfg_get(j, "lr", sub.get_option("--lr"), o.lr);
        cfg_get(j, "clip_eps", sub.get_option("--clip-eps"), o.clip_eps);
        cfg_get(j, "epochs_per_batch", sub.get_option("--epochs-per-batch"),
                o.epochs_per_batch);
        cfg_get(j, "entropy_coef", sub.get_option("--entropy-coef"), o.entropy_coef);
        cfg_get(j, "value_coef", sub.get_option("--value-coef"), o.value_coef);
        cfg_get(j, "weights_dir", sub.get_option("--weights-dir"), o.weights_dir);
        cfg_get(j, "timing", sub.get_option("--timing"), o.timing);
    }
    bpp::PolicyVariant variant = bpp::variant_from_name(o.variant); // throws on bogus
    if (o.steps < 1)
        throw UsageError("--steps must be >= 1");
    if (o.out_dir.empty())
        throw UsageError("--out-dir is required");

    json resolved = {{"subcommand", "train"},
                     {"variant", o.variant},
                     {"seed", o.seed},
                     {"steps", o.steps},
                     {"out_dir", o.out_dir},
                     {"num_pairs", o.num_pairs},
                     {"noise_sigma", o.noise_sigma},
                     {"batch_episodes", o.batch_episodes},
                     {"lr", o.lr},
                     {"clip_eps", o.clip_eps},
                     {"epochs_per_batch", o.epochs_per_batch},
                     {"entropy_coef", o.entropy_coef},
                     {"value_coef", o.value_coef},
                     {"weights_dir", o.weights_dir},
                     {"timing", o.timing}};
    write_resolved_config(o.out_dir, resolved);

    bpp::WahbaConfig env_cfg;
    env_cfg.num_pairs = o.num_pairs;
    env_cfg.noise_sigma = o.noise_sigma;
    env_cfg.seed = o.seed;

    bpp::PPOConfig ppo_cfg;
    ppo_cfg.clip_eps = o.clip_eps;
    ppo_cfg.lr = o.lr;
    ppo_cfg.epochs_per_batch = o.epochs_per_batch;
    ppo_cfg.batch_episodes = o.batch_episodes;
    ppo_cfg.entropy_coef = o.entropy_coef;
    ppo_cfg.value_coef = o.value_coef;
    ppo_cfg.total_steps = o.steps;
    ppo_cfg.seed = o.seed;

    bpp::FittedNormConst fn;
    bpp::FittedBSolver fb;
    const bpp::NormConstProvider* fnp = nullptr;
    const bpp::BProvider* fbp = nullptr;
    if (variant == bpp::PolicyVariant::Bpp) {
        fs::path wdir = resolve_weights_dir(o.weights_dir);
        try {
            fn = bpp::FittedNormConst::load(wdir / "f_N.json");
            fb = bpp::FittedBSolver::load(wdir / "f_b.json");
        } catch (const std::exception& e) {
            throw UsageError(std::string("bpp training needs fitted weights (") + e.what() +
                             "); run `bpp fit` or set BPP_WEIGHTS_DIR");
        }
        fnp = &fn;
        fbp = &fb;
    }

    std::ofstream csv(fs::path(o.out_dir) / "training_log.csv");
    if (!csv)
        throw std::runtime_error("cannot open training_log.csv for writing");
    bpp::TrainResult result =
        bpp::train(env_cfg, ppo_cfg, variant, fnp, fbp, &csv, o.timing);

    bpp::save_policy(result.policy, fs::path(o.out_dir) / "policy.json");
    result.value_net.save(fs::path(o.out_dir) / "value.json");

    const auto& last = result.log.back();
    std::cout << "finished " << last.step << " steps; final batch mean reward "
              << last.mean_reward << ", mean geodesic " << last.mean_geodesic_deg
              << " deg\n";
    if (result.entropy_check_violations > 0)
        std::cerr << "warning: " << result.entropy_check_violations
                  << " entropy consistency violations during training\n";
    return 0;
}

// ---------------------------------------------------------------- eval

struct EvalOpts {
    std::string policy_weights;
    int episodes = 0;
    std::uint64_t seed = 0;
    int num_pairs = 50;
    double noise_sigma = 0.01;
    std::string out_dir;
    std::string weights_dir;
    std::string config;
};

int cmd_eval(EvalOpts& o, const CLI::App& sub)
{
    if (!o.config.empty()) {
        json j = load_config_file(o.config);
        reject_unknown(j,
                       {"subcommand", "policy_weights", "episodes", "seed", "num_pairs",
                        "noise_sigma", "out_dir", "weights_dir"},
                       "eval");
        cfg_get(j, "policy_weights", sub.get_option("--policy-weights"), o.policy_weights);
        cfg_get(j, "episodes", sub.get_option("--episodes"), o.episodes);
        cfg_get(j, "seed", sub.get_option("--seed"), o.seed);
        cfg_get(j, "num_pairs", sub.get_option("--num-pairs"), o.num_pairs);
        cfg_get(j, "noise_sigma", sub.get_option("--noise-sigma"), o.noise_sigma);
        cfg_get(j, "out_dir", sub.get_option("--out-dir"), o.out_dir);
        cfg_get(j, "weights_dir", sub.get_option("--weights-dir"), o.weights_dir);
    }
    if (o.episodes < 1)
        throw UsageError("--episodes must be >= 1");
    if (o.policy_weights.empty())
        throw UsageError("--policy-weights is required (path or 'oracle')");

    bpp::WahbaConfig env_cfg;
    env_cfg.num_pairs = o.num_pairs;
    env_cfg.noise_sigma = o.noise_sigma;
    env_cfg.seed = o.seed;

    bpp::EvalResult r;
    if (o.policy_weights == "oracle") {
        r = bpp::evaluate_oracle(env_cfg, o.episodes, o.seed);
    } else {
        if (!fs::exists(o.policy_weights))
            throw UsageError("policy weights not found: " + o.policy_weights);
        bpp::PolicyHead policy = bpp::load_policy(o.policy_weights);
        bpp::FittedNormConst fn;
        bpp::FittedBSolver fb;
        bpp::QuadratureNormConst quad_fallback;
        bpp::ExactBProvider exact_fallback;
        const bpp::NormConstProvider* fnp = nullptr;
        const bpp::BProvider* fbp = nullptr;
        if (policy.variant == bpp::PolicyVariant::Bpp) {
            fs::path wdir = resolve_weights_dir(o.weights_dir);
            try {
                fn = bpp::FittedNormConst::load(wdir / "f_N.json");
                fb = bpp::FittedBSolver::load(wdir / "f_b.json");
                fnp = &fn;
                fbp = &fb;
            } catch (const std::exception&) {
                std::cerr << "note: fitted weights unavailable, using quadrature + exact "
                             "b-solver for evaluation\n";
                fnp = &quad_fallback;
                fbp = &exact_fallback;
            }
        }
        r = bpp::evaluate_policy(policy, env_cfg, o.episodes, o.seed, fnp, fbp);
    }

    json out = {{"mean_reward", r.mean_reward},
                {"mean_geodesic_deg", r.mean_geodesic_deg},
                {"std", r.std_reward}};
    std::cout << out.dump(2) << "\n";

    if (!o.out_dir.empty()) {
        json resolved = {{"subcommand", "eval"},
                         {"policy_weights", o.policy_weights},
                         {"episodes", o.episodes},
                         {"seed", o.seed},
                         {"num_pairs", o.num_pairs},
                         {"noise_sigma", o.noise_sigma},
                         {"out_dir", o.out_dir},
                         {"weights_dir", o.weights_dir}};
        write_resolved_config(o.out_dir, resolved);
        std::ofstream f(fs::path(o.out_dir) / "eval.json");
        f << out.dump(2) << "\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Bingham policy parameterization toolkit"};
    app.require_subcommand(1);

    GenOpts gen;
    CLI::App* gen_cmd = app.add_subcommand("gen-norm-dataset",
                                           "Generate the (z, log N) quadrature dataset");
    gen_cmd->add_option("--count", gen.count, "Number of rows");
    gen_cmd->add_option("--seed", gen.seed, "RNG seed");
    gen_cmd->add_option("--out", gen.out, "Output CSV path");
    gen_cmd->add_option("--quad-order", gen.quad_order, "Gauss-Legendre order per axis");
    gen_cmd->add_option("--threads", gen.threads, "Worker threads");
    gen_cmd->add_option("--config", gen.config, "JSON config (flags win)");

    FitOpts fit;
    CLI::App* fit_cmd = app.add_subcommand("fit", "Fit f_N or f_b to a dataset");
    fit_cmd->add_option("--dataset", fit.dataset, "NormTable CSV");
    fit_cmd->add_option("--target", fit.target, "fN or fb");
    fit_cmd->add_option("--out-weights", fit.out_weights, "Output weight JSON");
    fit_cmd->add_option("--seed", fit.seed, "RNG seed");
    fit_cmd->add_option("--epochs", fit.epochs, "Epoch budget (0 = default)");
    fit_cmd->add_option("--batch-size", fit.batch_size, "Minibatch size");
    fit_cmd->add_option("--lr-start", fit.lr_start, "Initial learning rate");
    fit_cmd->add_option("--lr-end", fit.lr_end, "Final learning rate");
    fit_cmd->add_option("--holdout-frac", fit.holdout_frac, "Held-out fraction");
    fit_cmd->add_option("--config", fit.config, "JSON config (flags win)");

    SelfcheckOpts selfcheck;
    CLI::App* selfcheck_cmd =
        app.add_subcommand("selfcheck", "Run the distribution invariant suite");
    selfcheck_cmd->add_option("--weights-dir", selfcheck.weights_dir,
                              "Directory with f_N.json / f_b.json");
    selfcheck_cmd->add_flag("--skip-slow", selfcheck.skip_slow,
                            "Only run the analytic checks");
    selfcheck_cmd->add_option("--seed", selfcheck.seed, "RNG seed");
    selfcheck_cmd->add_option("--config", selfcheck.config, "JSON config (flags win)");

    TrainOpts train;
    CLI::App* train_cmd = app.add_subcommand("train", "PPO on the Wahba environment");
    train_cmd->add_option("--variant", train.variant, "bpp or gpp");
    train_cmd->add_option("--seed", train.seed, "RNG seed");
    train_cmd->add_option("--steps", train.steps, "Total environment steps");
    train_cmd->add_option("--out-dir", train.out_dir, "Output directory");
    train_cmd->add_option("--num-pairs", train.num_pairs, "Vector pairs per episode");
    train_cmd->add_option("--noise-sigma", train.noise_sigma, "Observation noise sigma");
    train_cmd->add_option("--batch-episodes", train.batch_episodes, "Episodes per update");
    train_cmd->add_option("--lr", train.lr, "Learning rate");
    train_cmd->add_option("--clip-eps", train.clip_eps, "PPO clip range");
    train_cmd->add_option("--epochs-per-batch", train.epochs_per_batch,
                          "Gradient passes per batch");
    train_cmd->add_option("--entropy-coef", train.entropy_coef, "Entropy bonus coefficient");
    train_cmd->add_option("--value-coef", train.value_coef, "Value loss coefficient");
    train_cmd->add_option("--weights-dir", train.weights_dir,
                          "Directory with f_N.json / f_b.json");
    train_cmd->add_flag("--timing", train.timing,
                        "Record wall-clock ms in the log (breaks byte reproducibility)");
    train_cmd->add_option("--config", train.config, "JSON config (flags win)");

    EvalOpts eval;
    CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a trained policy");
    eval_cmd->add_option("--policy-weights", eval.policy_weights,
                         "policy.json path, or 'oracle'");
    eval_cmd->add_option("--episodes", eval.episodes, "Evaluation episodes");
    eval_cmd->add_option("--seed", eval.seed, "RNG seed");
    eval_cmd->add_option("--num-pairs", eval.num_pairs, "Vector pairs per episode");
    eval_cmd->add_option("--noise-sigma", eval.noise_sigma, "Observation noise sigma");
    eval_cmd->add_option("--out-dir", eval.out_dir, "Optional output directory");
    eval_cmd->add_option("--weights-dir", eval.weights_dir,
                         "Directory with f_N.json / f_b.json");
    eval_cmd->add_option("--config", eval.config, "JSON config (flags win)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (gen_cmd->parsed())
        return run_guarded([&] { return cmd_gen(gen, *gen_cmd); });
    if (fit_cmd->parsed())
        return run_guarded([&] { return cmd_fit(fit, *fit_cmd); });
    if (selfcheck_cmd->parsed())
        return run_guarded([&] { return cmd_selfcheck(selfcheck, *selfcheck_cmd); });
    if (train_cmd->parsed())
        return run_guarded([&] { return cmd_train(train, *train_cmd); });
    if (eval_cmd->parsed())
        return run_guarded([&] { return cmd_eval(eval, *eval_cmd); });
    return 2;
}
