#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "bpp/rotmath.hpp"
#include "test_support.hpp"

using namespace bpp;

TEST_CASE("identity quaternion maps to the identity matrix")
{
    RotationMatrix r = quat_to_rotmat(UnitQuaternion(1, 0, 0, 0));
    CHECK((r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("half turn about z")
{
    RotationMatrix r = quat_to_rotmat(UnitQuaternion(0, 0, 0, 1));
    Eigen::Matrix3d want = Eigen::Vector3d(-1, -1, 1).asDiagonal();
    CHECK((r - want).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("quarter turn about z matches the axis-angle construction")
{
    double s = std::sqrt(0.5);
    RotationMatrix r = quat_to_rotmat(UnitQuaternion(s, 0, 0, s));
    Eigen::Matrix3d want = testsup::axis_angle_rotmat({0, 0, 1}, M_PI / 2);
    CHECK((r - want).cwiseAbs().maxCoeff() < 1e-15);
    // column pattern (cos 90, sin 90, 0)
    CHECK(r(0, 0) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(r(1, 0) == doctest::Approx(1.0));
    CHECK(r(2, 0) == doctest::Approx(0.0));
}

TEST_CASE("raw-vector conversion rejects non-unit input")
{
    Eigen::Vector4d bad(1.0, 0.0, 0.1, 0.0);
    CHECK_THROWS_AS(quat_to_rotmat(bad), std::invalid_argument);
    Eigen::Vector4d nearly(1.0 + 5e-7, 0.0, 0.0, 0.0);
    CHECK_NOTHROW(quat_to_rotmat(nearly));
}

TEST_CASE("antipodal quaternions convert identically, bit for bit")
{
    Rng rng(7);
    for (int i = 0; i < 200; ++i) {
        UnitQuaternion q = UnitQuaternion::normalized(random_unit_4vec(rng));
        RotationMatrix a = quat_to_rotmat(q);
        RotationMatrix b = quat_to_rotmat(q.negated());
        CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("chordal distance closed forms")
{
    Eigen::Matrix3d id = Eigen::Matrix3d::Identity();
    CHECK(chordal_sq(id, id) == 0.0);
    Eigen::Matrix3d half_turn = Eigen::Vector3d(-1, -1, 1).asDiagonal();
    CHECK(chordal_sq(id, half_turn) == doctest::Approx(8.0)); // 6 - 2*(-1)
}

TEST_CASE("chordal distance is symmetric and within range")
{
    Rng rng(11);
    for (int i = 0; i < 100; ++i) {
        RotationMatrix a = testsup::random_rotation(rng);
        RotationMatrix b = testsup::random_rotation(rng);
        double ab = chordal_sq(a, b);
        CHECK(ab == doctest::Approx(chordal_sq(b, a)).epsilon(1e-12));
        CHECK(ab >= -1e-12);
        CHECK(ab <= 8.0 + 1e-12);
    }
}

TEST_CASE("geodesic angle closed forms")
{
    Eigen::Matrix3d id = Eigen::Matrix3d::Identity();
    CHECK(geodesic_angle(id, id) == 0.0);
    Eigen::Matrix3d half_turn = Eigen::Vector3d(-1, -1, 1).asDiagonal();
    CHECK(geodesic_angle(id, half_turn) == doctest::Approx(M_PI));
}

TEST_CASE("chordal_sq equals 8 sin^2(theta/2)")
{
    Rng rng(13);
    for (int i = 0; i < 100; ++i) {
        RotationMatrix a = testsup::random_rotation(rng);
        RotationMatrix b = testsup::random_rotation(rng);
        double theta = geodesic_angle(a, b);
        double s = std::sin(theta / 2);
        CHECK(chordal_sq(a, b) == doctest::Approx(8.0 * s * s).epsilon(1e-9));
    }
}

TEST_CASE("quaternion-matrix round trip")
{
    Rng rng(17);
    for (int i = 0; i < 200; ++i) {
        UnitQuaternion q = UnitQuaternion::normalized(random_unit_4vec(rng));
        RotationMatrix r = quat_to_rotmat(q);
        CHECK(is_rotation(r));
        RotationMatrix r2 = quat_to_rotmat(rotmat_to_quat(r));
        CHECK((r - r2).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("zero-norm quaternion input is rejected")
{
    CHECK_THROWS_AS(UnitQuaternion(0, 0, 0, 0), std::invalid_argument);
}
