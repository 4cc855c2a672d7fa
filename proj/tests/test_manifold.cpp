#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "rio/manifold.hpp"

using namespace rio;

namespace {

Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return Vec3(n(rng), n(rng), n(rng)).normalized();
}

}  // namespace

TEST(Skew, Examples)
{
  EXPECT_TRUE(skew(Vec3::Zero()).isZero(0.0));
  EXPECT_TRUE((skew(Vec3::UnitX()) * Vec3::UnitY()).isApprox(Vec3::UnitZ()));
  const Mat3 s = skew(Vec3(1, 2, 3));
  EXPECT_TRUE(s.transpose().isApprox(-s));
}

TEST(Rotation, StaysUnitAndInverts)
{
  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) {
    const Rotation a = so3_exp(2.0 * random_unit(rng));
    const Rotation b = so3_exp(3.0 * random_unit(rng));
    const Rotation c = so3_exp(0.1 * random_unit(rng));
    EXPECT_NEAR((a * b).quaternion().norm(), 1.0, 1e-12);
    EXPECT_TRUE(((a * b) * c).matrix().isApprox((a * (b * c)).matrix(), 1e-12));
    EXPECT_TRUE((a * a.inverse()).matrix().isIdentity(1e-12));
  }
}

TEST(So3, Examples)
{
  EXPECT_TRUE(so3_exp(Vec3::Zero()).matrix().isIdentity(0.0));
  const Vec3 y = so3_exp(Vec3(0, 0, oracle::kPi / 2)) * Vec3::UnitX();
  EXPECT_NEAR((y - Vec3::UnitY()).norm(), 0.0, 1e-15);
}

TEST(So3, ExpMatchesRodrigues)
{
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> angle(0.0, 3.1);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 phi = angle(rng) * random_unit(rng);
    EXPECT_LT((so3_exp(phi).matrix() - oracle::rotation_vector(phi)).norm(), 1e-12);
  }
  const Vec3 tiny(3e-8, -1e-8, 2e-8);
  EXPECT_LT((so3_exp(tiny).matrix() - oracle::rotation_vector(tiny)).norm(), 1e-15);
}

TEST(So3, LogRoundTrip)
{
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> angle(0.0, oracle::kPi - 1e-3);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 phi = angle(rng) * random_unit(rng);
    EXPECT_LT((so3_log(so3_exp(phi)) - phi).norm(), 1e-10);
  }
  for (double a : {1e-12, 1e-9, 1e-7, 1e-5}) {
    const Vec3 phi = a * Vec3(1, -2, 0.5).normalized();
    EXPECT_LT((so3_log(so3_exp(phi)) - phi).norm(), 1e-18 + 1e-9 * a);
  }
}

TEST(So3, PreservesNorms)
{
  std::mt19937_64 rng(9);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 v = 10.0 * random_unit(rng);
    const Rotation r = so3_exp(3.0 * random_unit(rng));
    EXPECT_NEAR((r * v).norm(), v.norm(), 1e-12);
  }
}

TEST(So3, RightJacobianInverse)
{
  std::mt19937_64 rng(11);
  for (int i = 0; i < 100; ++i) {
    const Vec3 phi = 2.5 * random_unit(rng);
    EXPECT_TRUE((so3_right_jacobian(phi) * so3_right_jacobian_inverse(phi)).isIdentity(1e-10));
    // Exp(phi + d) ~ Exp(phi) Exp(Jr d)
    const Vec3 d = 1e-6 * random_unit(rng);
    const Mat3 lhs = so3_exp(phi + d).matrix();
    const Mat3 rhs = (so3_exp(phi) * so3_exp(so3_right_jacobian(phi) * d)).matrix();
    EXPECT_LT((lhs - rhs).norm(), 1e-11);
  }
}

TEST(TangentBasis, Examples)
{
  const Mat32 up = tangent_basis(Bearing(Vec3::UnitZ()));
  EXPECT_TRUE(up.col(0).isApprox(Vec3::UnitX()));
  EXPECT_TRUE(up.col(1).isApprox(Vec3::UnitY()));

  const Mat32 fwd = tangent_basis(Bearing(Vec3::UnitX()));
  const auto expected = oracle::minimal_rotation_basis(Vec3::UnitX());
  EXPECT_LT((fwd - expected).norm(), 1e-15);
  EXPECT_LT((fwd.col(0) - Vec3(0, 0, -1)).norm(), 1e-15);
  EXPECT_LT((fwd.col(1) - Vec3(0, 1, 0)).norm(), 1e-15);
}

TEST(TangentBasis, MatchesRodriguesOracle)
{
  std::mt19937_64 rng(13);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 w = random_unit(rng);
    if (w.z() < -0.999) continue;
    EXPECT_LT((tangent_basis(Bearing(w)) - oracle::minimal_rotation_basis(w)).norm(), 1e-10);
  }
}

TEST(TangentBasis, OrthonormalProperty)
{
  std::mt19937_64 rng(17);
  for (int i = 0; i < 10000; ++i) {
    const Bearing w(random_unit(rng));
    const Mat32 n = tangent_basis(w);
    ASSERT_TRUE((n.transpose() * n).isIdentity(1e-10));
    ASSERT_LT((n.transpose() * w.vector()).norm(), 1e-10);
  }
}

TEST(TangentBasis, AntipodeIsFixedAndStable)
{
  const Mat32 n = tangent_basis(Bearing(-Vec3::UnitZ()));
  EXPECT_TRUE(n.col(0).isApprox(Vec3::UnitX()));
  EXPECT_TRUE(n.col(1).isApprox(-Vec3::UnitY()));
  for (double e : {1e-3, 1e-6, 1e-8}) {
    const Bearing w(Vec3(e, 0.3 * e, -1.0));
    const Mat32 b = tangent_basis(w);
    EXPECT_TRUE((b.transpose() * b).isIdentity(1e-10));
    EXPECT_LT((b.transpose() * w.vector()).norm(), 1e-10);
  }
}

TEST(Bearing, UnitNorm)
{
  const Bearing b(Vec3(3, 4, 12));
  EXPECT_NEAR(b.vector().norm(), 1.0, 1e-12);
}

TEST(Boxplus, Examples)
{
  const Bearing w(Vec3(0.2, -0.5, 0.8));
  EXPECT_TRUE(boxplus(w, Vec2::Zero()).vector().isApprox(w.vector()));

  const Vec3 out = boxplus(Bearing(Vec3::UnitZ()), Vec2(oracle::kPi / 2, 0.0)).vector();
  const Vec3 expected = oracle::rodrigues(Vec3::UnitX(), oracle::kPi / 2) * Vec3::UnitZ();
  EXPECT_LT((out - expected).norm(), 1e-15);
  EXPECT_LT((out - Vec3(0, -1, 0)).norm(), 1e-15);
}

TEST(Boxplus, StaysOnSphere)
{
  std::mt19937_64 rng(19);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const Bearing w(random_unit(rng));
    const Vec2 d(n(rng), n(rng));
    EXPECT_NEAR(boxplus(w, d).vector().norm(), 1.0, 1e-12);
  }
}

// The retraction moves along the tangent direction -Omega^ N delta = N delta x Omega.
TEST(Boxplus, FirstOrderQuadraticDecay)
{
  std::mt19937_64 rng(23);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const Bearing w(random_unit(rng));
    const Vec2 d = Vec2(n(rng), n(rng)).normalized();
    const Vec3 tangent = -skew(w.vector()) * tangent_basis(w) * d;
    double previous = 0.0;
    for (double eps : {1e-2, 1e-3, 1e-4}) {
      const double err = (boxplus(w, eps * d).vector() - (w.vector() + eps * tangent)).norm();
      EXPECT_LE(err, 1.0 * eps * eps);
      if (previous > 0.0) {
        const double ratio = previous / err;
        EXPECT_GT(ratio, 80.0);
        EXPECT_LT(ratio, 120.0);
      }
      previous = err;
    }
  }
}
