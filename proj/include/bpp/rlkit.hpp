#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "bpp/bingham.hpp"
#include "bpp/diffnet.hpp"
#include "bpp/normconst.hpp"
#include "bpp/rng.hpp"
#include "bpp/sampler.hpp"
#include "bpp/wahba.hpp"

namespace bpp {

enum class PolicyVariant { Bpp, Gpp };

PolicyVariant variant_from_name(const std::string& name);
std::string variant_name(PolicyVariant v);

/// Shared trunk (obs -> 256 -> 256, tanh) plus a linear head: 19 outputs for
/// the Bingham parameterization, 8 (4 means + 4 log-stds) for the Gaussian
/// baseline. Gaussian log-stds are clamped to [-5, 2] wherever they are used.
struct PolicyHead {
    PolicyVariant variant = PolicyVariant::Bpp;
    DiffNet trunk;
    DiffNet head;
};

inline constexpr double kGppLogStdMin = -5.0;
inline constexpr double kGppLogStdMax = 2.0;

PolicyHead make_policy(PolicyVariant variant, int obs_dim, std::uint64_t seed);
DiffNet make_value_net(int obs_dim, std::uint64_t seed);

void save_policy(const PolicyHead& policy, const std::filesystem::path& path);
PolicyHead load_policy(const std::filesystem::path& path);

/// One environment step. log_prob is the density of the sampled raw variable
/// under the policy that produced it: the quaternion itself for the Bingham
/// head, the pre-normalization Gaussian draw for the Gaussian head.
struct Transition {
    Eigen::VectorXd observation;
    Eigen::VectorXd raw_output;  // head output actually used (post any retry perturbation)
    Eigen::Vector4d action;      // unit quaternion (w,x,y,z)
    Eigen::Vector4d raw_sample;  // Gaussian draw for GPP; equals action for BPP
    double log_prob = 0.0;
    double reward = 0.0;
    double value_estimate = 0.0;
    int proposals_used = 1;
};

struct PPOConfig {
    double clip_eps = 0.2;
    double lr = 3e-4;
    int epochs_per_batch = 10;
    int batch_episodes = 256;
    double entropy_coef = 0.0;
    double value_coef = 0.5;
    long total_steps = 200000;
    std::uint64_t seed = 0;
    bool normalize_advantages = true;
};

struct ActResult {
    UnitQuaternion action;
    double log_prob = 0.0;
    Eigen::VectorXd raw_output;
    Eigen::Vector4d raw_sample;
    int proposals_used = 1;
    double entropy = 0.0; // analytic distribution entropy at this head output
};

/// Sample an action. The Bingham path needs both providers; the Gaussian
/// path ignores them. A degenerate Gram-Schmidt basis is retried once after
/// adding uniform noise of 1e-6 to the direction block.
ActResult act(const PolicyHead& policy, const Eigen::VectorXd& obs, Rng& rng,
              const NormConstProvider* fn, const BProvider* fb);

/// Density of `raw_sample` given the head output; the exact code path `act`
/// and `ppo_update` share, so recomputation is bit-identical.
double policy_log_prob(PolicyVariant variant, const Eigen::VectorXd& raw_output,
                       const Eigen::Vector4d& raw_sample, const NormConstProvider* fn);

/// min(ratio * adv, clip(ratio, 1-eps, 1+eps) * adv)
double clipped_objective(double ratio, double advantage, double clip_eps);

struct UpdateDiagnostics {
    double surrogate = 0.0;  // -mean of the clipped objective
    double value_loss = 0.0; // mean squared value error (without coefficient)
    double entropy = 0.0;    // mean analytic entropy of the batch
    double mean_ratio = 0.0;
};

struct AdamBundle {
    AdamState trunk, head, value;

    static AdamBundle make(const PolicyHead& policy, const DiffNet& value_net);
};

/// epochs_per_batch full-batch gradient passes over policy and value nets.
/// Throws UpdateAbortedError when a loss goes non-finite. `degen_rng` only
/// advances on Gram-Schmidt retries.
UpdateDiagnostics ppo_update(PolicyHead& policy, DiffNet& value_net, AdamBundle& opt,
                             const std::vector<Transition>& batch, const PPOConfig& cfg,
                             const NormConstProvider* fn, Rng& degen_rng);

struct TrainLogRow {
    long step = 0;
    double mean_reward = 0.0;
    double mean_geodesic_deg = 0.0;
    double entropy = 0.0;
    double accept_rate = 1.0;
    long wall_ms = 0;
};

void write_train_log_header(std::ostream& out);
void write_train_log_row(std::ostream& out, const TrainLogRow& row);

struct TrainResult {
    std::vector<TrainLogRow> log;
    PolicyHead policy;
    DiffNet value_net;
    int entropy_check_violations = 0; // analytic-vs-sampled entropy guard trips
};

/// PPO on the Wahba environment. Rows are logged per collected batch, before
/// the update, so row 1 describes the untrained policy. With `timing` false
/// (the default) wall_ms is written as 0 and the log is byte-reproducible.
TrainResult train(const WahbaConfig& env_cfg, const PPOConfig& ppo_cfg,
                  PolicyVariant variant, const NormConstProvider* fn, const BProvider* fb,
                  std::ostream* csv = nullptr, bool timing = false);

struct EvalResult {
    double mean_reward = 0.0;
    double mean_geodesic_deg = 0.0;
    double std_reward = 0.0;
};

EvalResult evaluate_policy(const PolicyHead& policy, const WahbaConfig& env_cfg,
                           int episodes, std::uint64_t seed, const NormConstProvider* fn,
                           const BProvider* fb);

/// Cheating reference that answers with the hidden rotation; mean reward is
/// exactly 0 at sigma = 0.
EvalResult evaluate_oracle(const WahbaConfig& env_cfg, int episodes, std::uint64_t seed);

} // namespace bpp
