#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "bpp/rng.hpp"
#include "bpp/rotmath.hpp"

namespace bpp {

struct WahbaConfig {
    int num_pairs = 50;
    double noise_sigma = 0.01;
    std::uint64_t seed = 0;
};

/// One-step episode: observation stacks (u_i, v_i) pairs with
/// v_i = R u_i + eps_i; the generating rotation stays hidden from the agent
/// and only enters through the reward.
struct WahbaEpisode {
    Eigen::VectorXd observation; // length 6 * num_pairs
    RotationMatrix true_rotation;
};

struct WahbaStepResult {
    double reward; // -chordal_sq(action, true rotation), in [-8, 0]
    bool done;     // always true
};

WahbaEpisode wahba_reset(const WahbaConfig& cfg, Rng& rng);

WahbaStepResult wahba_step(const WahbaEpisode& ep, const UnitQuaternion& action);

/// Raw-vector overload; throws std::invalid_argument for non-unit actions
/// (tolerance 1e-6 on the norm).
WahbaStepResult wahba_step(const WahbaEpisode& ep, const Eigen::Vector4d& action_wxyz);

} // namespace bpp
