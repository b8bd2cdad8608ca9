#include "bpp/rlkit.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <stdexcept>

#include "bpp/errors.hpp"

namespace bpp {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

std::string fmt_double(double v)
{
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

RawPolicyVector raw19(const Eigen::VectorXd& v)
{
    if (v.size() != 19)
        throw std::invalid_argument("expected a 19-dimensional head output");
    RawPolicyVector r;
    for (int i = 0; i < 19; ++i)
        r[i] = v[i];
    return r;
}

struct GppParams {
    Eigen::Vector4d mean;
    Eigen::Vector4d logstd; // clamped
    Eigen::Vector4d clamped_low, clamped_high;
};

GppParams gpp_params(const Eigen::VectorXd& raw)
{
    if (raw.size() != 8)
        throw std::invalid_argument("expected an 8-dimensional head output");
    GppParams p;
    for (int j = 0; j < 4; ++j) {
        p.mean[j] = raw[j];
        double ls = raw[4 + j];
        p.clamped_low[j] = ls < kGppLogStdMin ? 1.0 : 0.0;
        p.clamped_high[j] = ls > kGppLogStdMax ? 1.0 : 0.0;
        p.logstd[j] = std::clamp(ls, kGppLogStdMin, kGppLogStdMax);
    }
    return p;
}

double gpp_log_prob(const GppParams& p, const Eigen::Vector4d& s)
{
    double lp = 0.0;
    for (int j = 0; j < 4; ++j) {
        double sd = std::exp(p.logstd[j]);
        double t = (s[j] - p.mean[j]) / sd;
        lp += -0.5 * t * t - p.logstd[j] - 0.5 * kLog2Pi;
    }
    return lp;
}

double gpp_entropy(const GppParams& p)
{
    return p.logstd.sum() + 2.0 * (1.0 + kLog2Pi);
}

// Shared by act and the update path so recomputed log-probs are bit-exact.
double bpp_log_prob_vec(const BinghamParams& params, const Eigen::Vector4d& q,
                        const NormConstProvider& fn)
{
    return bingham_exponent(params, q) - fn.log_N(params.Z.z1, params.Z.z2, params.Z.z3);
}

BinghamParams params_with_retry(Eigen::VectorXd& raw, Rng& rng)
{
    try {
        return params_from_raw(raw19(raw));
    } catch (const DegenerateBasisError&) {
        for (int k = 3; k < 19; ++k)
            raw[k] += uniform_in(rng, -1e-6, 1e-6);
        return params_from_raw(raw19(raw));
    }
}

} // namespace

PolicyVariant variant_from_name(const std::string& name)
{
    if (name == "bpp")
        return PolicyVariant::Bpp;
    if (name == "gpp")
        return PolicyVariant::Gpp;
    throw std::invalid_argument("unknown policy variant: " + name);
}

std::string variant_name(PolicyVariant v)
{
    return v == PolicyVariant::Bpp ? "bpp" : "gpp";
}

PolicyHead make_policy(PolicyVariant variant, int obs_dim, std::uint64_t seed)
{
    PolicyHead p;
    p.variant = variant;
    p.trunk = DiffNet::make_mlp({obs_dim, 256, 256}, Activation::Tanh, seed);
    // Trunk output passes through tanh too, so both trunk layers are hidden.
    p.trunk.layers.back().act = Activation::Tanh;
    int head_out = variant == PolicyVariant::Bpp ? 19 : 8;
    p.head = DiffNet::make_mlp({256, head_out}, Activation::Identity, seed + 7);
    return p;
}

DiffNet make_value_net(int obs_dim, std::uint64_t seed)
{
    return DiffNet::make_mlp({obs_dim, 64, 64, 1}, Activation::Tanh, seed);
}

void save_policy(const PolicyHead& policy, const std::filesystem::path& path)
{
    nlohmann::json j;
    j["version"] = 1;
    j["variant"] = variant_name(policy.variant);
    j["trunk"] = policy.trunk.to_json();
    j["head"] = policy.head.to_json();
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("save_policy: cannot open " + path.string());
    out << j.dump(2) << "\n";
}

PolicyHead load_policy(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("load_policy: cannot open " + path.string());
    nlohmann::json j;
    in >> j;
    PolicyHead p;
    p.variant = variant_from_name(j.at("variant").get<std::string>());
    p.trunk = DiffNet::from_json(j.at("trunk"));
    p.head = DiffNet::from_json(j.at("head"));
    return p;
}

ActResult act(const PolicyHead& policy, const Eigen::VectorXd& obs, Rng& rng,
              const NormConstProvider* fn, const BProvider* fb)
{
    Eigen::VectorXd raw = policy.head.forward(policy.trunk.forward(obs)).col(0);
    ActResult res;

    if (policy.variant == PolicyVariant::Bpp) {
        if (fn == nullptr || fb == nullptr)
            throw std::invalid_argument("act: Bingham policy needs both providers");
        BinghamParams params = params_with_retry(raw, rng);
        ACGEnvelope env = build_envelope(params, *fb);
        SampleResult s = sample_bingham(params, env, rng);
        res.action = s.q;
        res.raw_sample = s.q.coeffs();
        res.proposals_used = s.proposals_used;
        res.log_prob = bpp_log_prob_vec(params, res.raw_sample, *fn);
        res.entropy = entropy(params, *fn);
    } else {
        GppParams p = gpp_params(raw);
        Eigen::Vector4d s;
        for (;;) {
            for (int j = 0; j < 4; ++j)
                s[j] = p.mean[j] + std::exp(p.logstd[j]) * normal(rng);
            if (s.norm() > 1e-9)
                break;
        }
        res.raw_sample = s;
        res.action = UnitQuaternion::normalized(s);
        res.proposals_used = 1;
        res.log_prob = gpp_log_prob(p, s);
        res.entropy = gpp_entropy(p);
    }
    res.raw_output = raw;
    return res;
}

double policy_log_prob(PolicyVariant variant, const Eigen::VectorXd& raw_output,
                       const Eigen::Vector4d& raw_sample, const NormConstProvider* fn)
{
    if (variant == PolicyVariant::Bpp) {
        if (fn == nullptr)
            throw std::invalid_argument("policy_log_prob: Bingham policy needs a provider");
        BinghamParams params = params_from_raw(raw19(raw_output));
        return bpp_log_prob_vec(params, raw_sample, *fn);
    }
    return gpp_log_prob(gpp_params(raw_output), raw_sample);
}

double clipped_objective(double ratio, double advantage, double clip_eps)
{
    double clipped = std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps);
    return std::min(ratio * advantage, clipped * advantage);
}

AdamBundle AdamBundle::make(const PolicyHead& policy, const DiffNet& value_net)
{
    AdamBundle b;
    b.trunk = AdamState::for_net(policy.trunk);
    b.head = AdamState::for_net(policy.head);
    b.value = AdamState::for_net(value_net);
    return b;
}

UpdateDiagnostics ppo_update(PolicyHead& policy, DiffNet& value_net, AdamBundle& opt,
                             const std::vector<Transition>& batch, const PPOConfig& cfg,
                             const NormConstProvider* fn, Rng& degen_rng)
{
    const int n = static_cast<int>(batch.size());
    if (n == 0)
        throw std::invalid_argument("ppo_update: empty batch");
    const bool bpp = policy.variant == PolicyVariant::Bpp;
    if (bpp && fn == nullptr)
        throw std::invalid_argument("ppo_update: Bingham policy needs a provider");

    const int obs_dim = static_cast<int>(batch.front().observation.size());
    Eigen::MatrixXd X(obs_dim, n);
    Eigen::VectorXd adv(n), rewards(n);
    for (int i = 0; i < n; ++i) {
        X.col(i) = batch[static_cast<std::size_t>(i)].observation;
        rewards(i) = batch[static_cast<std::size_t>(i)].reward;
        adv(i) = rewards(i) - batch[static_cast<std::size_t>(i)].value_estimate;
    }
    if (cfg.normalize_advantages) {
        double mean = adv.mean();
        double sd = std::sqrt((adv.array() - mean).square().mean());
        adv = (adv.array() - mean) / (sd + 1e-8);
    }

    UpdateDiagnostics diag;
    double entropy_diag = 0.0;

    for (int epoch = 0; epoch < cfg.epochs_per_batch; ++epoch) {
        GradTape trunk_tape, head_tape;
        Eigen::MatrixXd H = policy.trunk.forward(X, trunk_tape);
        Eigen::MatrixXd V = policy.head.forward(H, head_tape);
        Eigen::MatrixXd dV = Eigen::MatrixXd::Zero(V.rows(), n);

        double obj_sum = 0.0, ratio_sum = 0.0;
        for (int i = 0; i < n; ++i) {
            const Transition& tr = batch[static_cast<std::size_t>(i)];
            double lp_new = 0.0;
            if (bpp) {
                RawPolicyVector vr = raw19(V.col(i));
                RawPolicyVector g;
                try {
                    lp_new = log_pdf_raw(vr, tr.raw_sample, *fn, &g);
                } catch (const DegenerateBasisError&) {
                    for (int k = 3; k < 19; ++k)
                        vr[k] += uniform_in(degen_rng, -1e-6, 1e-6);
                    lp_new = log_pdf_raw(vr, tr.raw_sample, *fn, &g);
                }
                double ratio = std::exp(lp_new - tr.log_prob);
                ratio_sum += ratio;
                obj_sum += clipped_objective(ratio, adv(i), cfg.clip_eps);
                bool active = adv(i) >= 0.0 ? ratio <= 1.0 + cfg.clip_eps
                                            : ratio >= 1.0 - cfg.clip_eps;
                double coeff = active ? -adv(i) * ratio / n : 0.0;
                for (int k = 0; k < 19; ++k)
                    dV(k, i) = coeff * g[k];
                if (cfg.entropy_coef > 0.0) {
                    // Entropy depends only on the dispersion part; chain the
                    // z-gradient back through the cumulative-exp transform.
                    BinghamParams params = params_from_raw(vr);
                    Eigen::Vector3d dhdz = entropy_grad_z(params.Z, *fn);
                    double e1 = std::exp(vr[0]), e2 = std::exp(vr[1]), e3 = std::exp(vr[2]);
                    // ascending diag (z1,z2,z3) = (c3,c2,c1)
                    double dc1 = dhdz[2], dc2 = dhdz[1], dc3 = dhdz[0];
                    double dv1 = -e1 * (dc1 + dc2 + dc3);
                    double dv2 = -e2 * (dc2 + dc3);
                    double dv3 = -e3 * dc3;
                    double ec = -cfg.entropy_coef / n;
                    dV(0, i) += ec * dv1;
                    dV(1, i) += ec * dv2;
                    dV(2, i) += ec * dv3;
                }
                if (epoch == 0)
                    entropy_diag += entropy(params_from_raw(vr), *fn);
            } else {
                GppParams p = gpp_params(V.col(i));
                lp_new = gpp_log_prob(p, tr.raw_sample);
                double ratio = std::exp(lp_new - tr.log_prob);
                ratio_sum += ratio;
                obj_sum += clipped_objective(ratio, adv(i), cfg.clip_eps);
                bool active = adv(i) >= 0.0 ? ratio <= 1.0 + cfg.clip_eps
                                            : ratio >= 1.0 - cfg.clip_eps;
                double coeff = active ? -adv(i) * ratio / n : 0.0;
                for (int j = 0; j < 4; ++j) {
                    double sd = std::exp(p.logstd[j]);
                    double t = (tr.raw_sample[j] - p.mean[j]) / sd;
                    bool inside = p.clamped_low[j] == 0.0 && p.clamped_high[j] == 0.0;
                    dV(j, i) = coeff * t / sd;
                    dV(4 + j, i) = inside ? coeff * (t * t - 1.0) : 0.0;
                    if (cfg.entropy_coef > 0.0 && inside)
                        dV(4 + j, i) += -cfg.entropy_coef / n;
                }
                if (epoch == 0)
                    entropy_diag += gpp_entropy(p);
            }
        }

        double surrogate = -obj_sum / n;
        if (!std::isfinite(surrogate))
            throw UpdateAbortedError("ppo_update: non-finite surrogate loss at epoch " +
                                     std::to_string(epoch));
        diag.surrogate += surrogate;
        diag.mean_ratio += ratio_sum / n;

        ParamGrads head_grads, trunk_grads;
        Eigen::MatrixXd dH = policy.head.backward(head_tape, dV, head_grads);
        policy.trunk.backward(trunk_tape, dH, trunk_grads);
        adam_step(policy.head, head_grads, opt.head, cfg.lr);
        adam_step(policy.trunk, trunk_grads, opt.trunk, cfg.lr);

        GradTape value_tape;
        Eigen::MatrixXd vp = value_net.forward(X, value_tape);
        Eigen::VectorXd verr = vp.row(0).transpose() - rewards;
        double vloss = verr.squaredNorm() / n;
        if (!std::isfinite(vloss))
            throw UpdateAbortedError("ppo_update: non-finite value loss at epoch " +
                                     std::to_string(epoch));
        diag.value_loss += vloss;
        Eigen::MatrixXd dvp = (cfg.value_coef * 2.0 / n) * verr.transpose();
        ParamGrads value_grads;
        value_net.backward(value_tape, dvp, value_grads);
        adam_step(value_net, value_grads, opt.value, cfg.lr);
    }

    diag.surrogate /= cfg.epochs_per_batch;
    diag.value_loss /= cfg.epochs_per_batch;
    diag.mean_ratio /= cfg.epochs_per_batch;
    diag.entropy = entropy_diag / n;
    return diag;
}

void write_train_log_header(std::ostream& out)
{
    out << "step,mean_reward,mean_geodesic_deg,entropy,accept_rate,wall_ms\n";
}

void write_train_log_row(std::ostream& out, const TrainLogRow& row)
{
    out << row.step << ',' << fmt_double(row.mean_reward) << ','
        << fmt_double(row.mean_geodesic_deg) << ',' << fmt_double(row.entropy) << ','
        << fmt_double(row.accept_rate) << ',' << row.wall_ms << '\n';
}

TrainResult train(const WahbaConfig& env_cfg, const PPOConfig& ppo_cfg,
                  PolicyVariant variant, const NormConstProvider* fn, const BProvider* fb,
                  std::ostream* csv, bool timing)
{
    const int obs_dim = 6 * env_cfg.num_pairs;
    if (variant == PolicyVariant::Bpp && (fn == nullptr || fb == nullptr))
        throw std::invalid_argument("train: Bingham variant needs both providers");

    TrainResult res;
    res.policy = make_policy(variant, obs_dim, ppo_cfg.seed);
    res.value_net = make_value_net(obs_dim, ppo_cfg.seed + 1);
    AdamBundle opt = AdamBundle::make(res.policy, res.value_net);

    Rng env_rng(env_cfg.seed);
    Rng policy_rng(ppo_cfg.seed + 0x9E3779B97F4A7C15ULL);
    Rng degen_rng(ppo_cfg.seed + 0xD1B54A32D192ED03ULL);

    const auto t0 = std::chrono::steady_clock::now();
    if (csv != nullptr)
        write_train_log_header(*csv);

    long done = 0;
    long next_entropy_check = 10000;
    while (done < ppo_cfg.total_steps) {
        const int bn = static_cast<int>(
            std::min<long>(ppo_cfg.batch_episodes, ppo_cfg.total_steps - done));
        std::vector<Transition> batch;
        batch.reserve(static_cast<std::size_t>(bn));

        double sum_reward = 0.0, sum_geo = 0.0, sum_entropy = 0.0;
        long sum_proposals = 0;
        std::vector<double> entropy_residuals(static_cast<std::size_t>(bn));
        for (int e = 0; e < bn; ++e) {
            WahbaEpisode ep = wahba_reset(env_cfg, env_rng);
            ActResult ar = act(res.policy, ep.observation, policy_rng, fn, fb);
            WahbaStepResult st = wahba_step(ep, ar.action);

            Transition tr;
            tr.observation = ep.observation;
            tr.raw_output = ar.raw_output;
            tr.action = ar.action.coeffs();
            tr.raw_sample = ar.raw_sample;
            tr.log_prob = ar.log_prob;
            tr.reward = st.reward;
            tr.value_estimate = res.value_net.value(ep.observation);
            tr.proposals_used = ar.proposals_used;
            batch.push_back(std::move(tr));

            sum_reward += st.reward;
            sum_geo += geodesic_angle(quat_to_rotmat(ar.action), ep.true_rotation) *
                       (180.0 / M_PI);
            sum_entropy += ar.entropy;
            sum_proposals += ar.proposals_used;
            entropy_residuals[static_cast<std::size_t>(e)] = ar.entropy + ar.log_prob;
        }
        done += bn;

        TrainLogRow row;
        row.step = done;
        row.mean_reward = sum_reward / bn;
        row.mean_geodesic_deg = sum_geo / bn;
        row.entropy = sum_entropy / bn;
        row.accept_rate = variant == PolicyVariant::Bpp
                              ? static_cast<double>(bn) / static_cast<double>(sum_proposals)
                              : 1.0;
        row.wall_ms = timing
                          ? std::chrono::duration_cast<std::chrono::milliseconds>(
                                std::chrono::steady_clock::now() - t0)
                                .count()
                          : 0;
        res.log.push_back(row);
        if (csv != nullptr)
            write_train_log_row(*csv, row);

        if (done >= next_entropy_check) {
            // E[H + log p] = 0 per sample; a drifting f_N breaks it.
            double mean_r = 0.0;
            for (double d : entropy_residuals)
                mean_r += d;
            mean_r /= bn;
            double var = 0.0;
            for (double d : entropy_residuals)
                var += (d - mean_r) * (d - mean_r);
            double se = std::sqrt(var / bn) / std::sqrt(static_cast<double>(bn));
            if (std::abs(mean_r) > 3.0 * se + 1e-9) {
                res.entropy_check_violations += 1;
                std::cerr << "train: entropy consistency check failed at step " << done
                          << " (residual " << mean_r << ", 3se " << 3.0 * se << ")\n";
            }
            next_entropy_check += 10000;
        }

        ppo_update(res.policy, res.value_net, opt, batch, ppo_cfg, fn, degen_rng);
    }
    return res;
}

EvalResult evaluate_policy(const PolicyHead& policy, const WahbaConfig& env_cfg,
                           int episodes, std::uint64_t seed, const NormConstProvider* fn,
                           const BProvider* fb)
{
    if (episodes < 1)
        throw std::invalid_argument("evaluate_policy: episodes must be >= 1");
    Rng env_rng(seed);
    Rng policy_rng(seed + 0x9E3779B97F4A7C15ULL);
    double sum_r = 0.0, sum_r2 = 0.0, sum_geo = 0.0;
    for (int e = 0; e < episodes; ++e) {
        WahbaEpisode ep = wahba_reset(env_cfg, env_rng);
        ActResult ar = act(policy, ep.observation, policy_rng, fn, fb);
        WahbaStepResult st = wahba_step(ep, ar.action);
        sum_r += st.reward;
        sum_r2 += st.reward * st.reward;
        sum_geo += geodesic_angle(quat_to_rotmat(ar.action), ep.true_rotation) *
                   (180.0 / M_PI);
    }
    EvalResult res;
    res.mean_reward = sum_r / episodes;
    res.mean_geodesic_deg = sum_geo / episodes;
    double var = sum_r2 / episodes - res.mean_reward * res.mean_reward;
    res.std_reward = std::sqrt(std::max(0.0, var));
    return res;
}

EvalResult evaluate_oracle(const WahbaConfig& env_cfg, int episodes, std::uint64_t seed)
{
    if (episodes < 1)
        throw std::invalid_argument("evaluate_oracle: episodes must be >= 1");
    Rng env_rng(seed);
    double sum_r = 0.0, sum_r2 = 0.0, sum_geo = 0.0;
    for (int e = 0; e < episodes; ++e) {
        WahbaEpisode ep = wahba_reset(env_cfg, env_rng);
        UnitQuaternion action = rotmat_to_quat(ep.true_rotation);
        WahbaStepResult st = wahba_step(ep, action);
        sum_r += st.reward;
        sum_r2 += st.reward * st.reward;
        sum_geo += geodesic_angle(quat_to_rotmat(action), ep.true_rotation) *
                   (180.0 / M_PI);
    }
    EvalResult res;
    res.mean_reward = sum_r / episodes;
    res.mean_geodesic_deg = sum_geo / episodes;
    double var = sum_r2 / episodes - res.mean_reward * res.mean_reward;
    res.std_reward = std::sqrt(std::max(0.0, var));
    return res;
}

} // namespace bpp
