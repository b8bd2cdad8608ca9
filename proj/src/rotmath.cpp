#include "bpp/rotmath.hpp"

#include <cmath>
#include <stdexcept>

namespace bpp {

UnitQuaternion::UnitQuaternion(double w, double x, double y, double z)
    : wxyz_(w, x, y, z)
{
    double n = wxyz_.norm();
    if (n < 1e-12)
        throw std::invalid_argument("UnitQuaternion: zero-norm input");
    wxyz_ /= n;
}

UnitQuaternion UnitQuaternion::normalized(const Eigen::Vector4d& wxyz)
{
    return UnitQuaternion(wxyz[0], wxyz[1], wxyz[2], wxyz[3]);
}

UnitQuaternion UnitQuaternion::negated() const
{
    UnitQuaternion q(*this);
    q.wxyz_ = -q.wxyz_;
    return q;
}

bool is_rotation(const RotationMatrix& r, double tol)
{
    Eigen::Matrix3d gram = r.transpose() * r;
    if ((gram - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > tol)
        return false;
    return std::abs(r.determinant() - 1.0) <= tol;
}

RotationMatrix quat_to_rotmat(const UnitQuaternion& q)
{
    return quat_to_rotmat(q.coeffs());
}

RotationMatrix quat_to_rotmat(const Eigen::Vector4d& wxyz)
{
    double n = wxyz.norm();
    if (std::abs(n - 1.0) > 1e-6)
        throw std::invalid_argument("quat_to_rotmat: input norm deviates from 1 beyond 1e-6");

    const double w = wxyz[0], x = wxyz[1], y = wxyz[2], z = wxyz[3];
    RotationMatrix r;
    // Every entry is quadratic in q, so r(q) == r(-q) bit for bit.
    r(0, 0) = 1.0 - 2.0 * (y * y + z * z);
    r(0, 1) = 2.0 * (x * y - w * z);
    r(0, 2) = 2.0 * (x * z + w * y);
    r(1, 0) = 2.0 * (x * y + w * z);
    r(1, 1) = 1.0 - 2.0 * (x * x + z * z);
    r(1, 2) = 2.0 * (y * z - w * x);
    r(2, 0) = 2.0 * (x * z - w * y);
    r(2, 1) = 2.0 * (y * z + w * x);
    r(2, 2) = 1.0 - 2.0 * (x * x + y * y);
    return r;
}

double chordal_sq(const RotationMatrix& ra, const RotationMatrix& rb)
{
    double tr = (ra.transpose() * rb).trace();
    return 6.0 - 2.0 * tr;
}

double geodesic_angle(const RotationMatrix& ra, const RotationMatrix& rb)
{
    double tr = (ra.transpose() * rb).trace();
    double c = (tr - 1.0) / 2.0;
    c = std::clamp(c, -1.0, 1.0);
    return std::acos(c);
}

UnitQuaternion rotmat_to_quat(const RotationMatrix& r)
{
    // Shepperd: pick the largest of {w,x,y,z} as pivot for stability.
    const double t = r.trace();
    double w, x, y, z;
    if (t > r(0, 0) && t > r(1, 1) && t > r(2, 2)) {
        double s = std::sqrt(1.0 + t) * 2.0;
        w = 0.25 * s;
        x = (r(2, 1) - r(1, 2)) / s;
        y = (r(0, 2) - r(2, 0)) / s;
        z = (r(1, 0) - r(0, 1)) / s;
    } else if (r(0, 0) > r(1, 1) && r(0, 0) > r(2, 2)) {
        double s = std::sqrt(1.0 + r(0, 0) - r(1, 1) - r(2, 2)) * 2.0;
        w = (r(2, 1) - r(1, 2)) / s;
        x = 0.25 * s;
        y = (r(0, 1) + r(1, 0)) / s;
        z = (r(0, 2) + r(2, 0)) / s;
    } else if (r(1, 1) > r(2, 2)) {
        double s = std::sqrt(1.0 + r(1, 1) - r(0, 0) - r(2, 2)) * 2.0;
        w = (r(0, 2) - r(2, 0)) / s;
        x = (r(0, 1) + r(1, 0)) / s;
        y = 0.25 * s;
        z = (r(1, 2) + r(2, 1)) / s;
    } else {
        double s = std::sqrt(1.0 + r(2, 2) - r(0, 0) - r(1, 1)) * 2.0;
        w = (r(1, 0) - r(0, 1)) / s;
        x = (r(0, 2) + r(2, 0)) / s;
        y = (r(1, 2) + r(2, 1)) / s;
        z = 0.25 * s;
    }
    return UnitQuaternion(w, x, y, z);
}

} // namespace bpp
