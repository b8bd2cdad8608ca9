#pragma once

#include <Eigen/Dense>

namespace bpp {

/// Unit-norm quaternion stored as (w, x, y, z). Construction normalizes, so
/// instances always satisfy ||q|| = 1 to machine precision. q and -q denote
/// the same rotation; nothing in this type collapses that redundancy.
class UnitQuaternion {
public:
    UnitQuaternion() : wxyz_(1.0, 0.0, 0.0, 0.0) {}
    UnitQuaternion(double w, double x, double y, double z);

    /// Normalize an arbitrary nonzero 4-vector (w,x,y,z) onto S^3.
    static UnitQuaternion normalized(const Eigen::Vector4d& wxyz);

    double w() const { return wxyz_[0]; }
    double x() const { return wxyz_[1]; }
    double y() const { return wxyz_[2]; }
    double z() const { return wxyz_[3]; }

    const Eigen::Vector4d& coeffs() const { return wxyz_; }

    UnitQuaternion negated() const;

private:
    Eigen::Vector4d wxyz_;
};

using RotationMatrix = Eigen::Matrix3d;

/// R^T R = I and det R = +1, both within tol.
bool is_rotation(const RotationMatrix& r, double tol = 1e-9);

RotationMatrix quat_to_rotmat(const UnitQuaternion& q);

/// Raw-vector overload; throws std::invalid_argument if |  ||q|| - 1 | > 1e-6.
RotationMatrix quat_to_rotmat(const Eigen::Vector4d& wxyz);

/// Squared chordal distance ||Ra - Rb||_F^2 = 6 - 2 tr(Ra^T Rb), in [0, 8].
double chordal_sq(const RotationMatrix& ra, const RotationMatrix& rb);

/// Relative rotation angle acos((tr(Ra^T Rb) - 1)/2), clamped to [0, pi].
double geodesic_angle(const RotationMatrix& ra, const RotationMatrix& rb);

/// Quaternion extraction (Shepperd's max-pivot method). Not used by the
/// runtime pipeline; provided for tests and the evaluation oracle.
UnitQuaternion rotmat_to_quat(const RotationMatrix& r);

} // namespace bpp
