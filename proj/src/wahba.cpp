#include "bpp/wahba.hpp"

#include <stdexcept>

namespace bpp {

WahbaEpisode wahba_reset(const WahbaConfig& cfg, Rng& rng)
{
    if (cfg.num_pairs < 1)
        throw std::invalid_argument("wahba_reset: num_pairs must be >= 1");
    if (cfg.noise_sigma < 0.0)
        throw std::invalid_argument("wahba_reset: noise_sigma must be >= 0");

    WahbaEpisode ep;
    ep.true_rotation = quat_to_rotmat(UnitQuaternion::normalized(random_unit_4vec(rng)));
    ep.observation.resize(6 * cfg.num_pairs);
    for (int i = 0; i < cfg.num_pairs; ++i) {
        Eigen::Vector3d u = random_unit_3vec(rng);
        Eigen::Vector3d eps(normal(rng), normal(rng), normal(rng));
        Eigen::Vector3d v = ep.true_rotation * u + cfg.noise_sigma * eps;
        ep.observation.segment<3>(6 * i) = u;
        ep.observation.segment<3>(6 * i + 3) = v;
    }
    return ep;
}

WahbaStepResult wahba_step(const WahbaEpisode& ep, const UnitQuaternion& action)
{
    RotationMatrix r = quat_to_rotmat(action);
    return WahbaStepResult{-chordal_sq(r, ep.true_rotation), true};
}

WahbaStepResult wahba_step(const WahbaEpisode& ep, const Eigen::Vector4d& action_wxyz)
{
    if (std::abs(action_wxyz.norm() - 1.0) > 1e-6)
        throw std::invalid_argument("wahba_step: action is not a unit quaternion");
    return wahba_step(ep, UnitQuaternion::normalized(action_wxyz));
}

} // namespace bpp
