#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "ktopo/body_field.hpp"
#include "ktopo/errors.hpp"
#include "ktopo/fixtures.hpp"
#include "ktopo/simd/kernels.hpp"
#include "ktopo/text_io.hpp"
#include "support.hpp"

namespace ktopo {
namespace {

/// Direct evaluation of the IMLS quotient over every source, no spatial index.
struct BruteField {
  std::vector<Vec3> p, n;
  std::vector<double> h;

  explicit BruteField(const SurfaceMesh& m) : p(m.vertices()), n(m.normals()) {
    std::vector<std::set<int>> ring(m.vertex_count());
    for (const Face& f : m.faces()) {
      for (int k = 0; k < 3; ++k) {
        ring[f[k]].insert(f[(k + 1) % 3]);
        ring[f[k]].insert(f[(k + 2) % 3]);
      }
    }
    for (int i = 0; i < m.vertex_count(); ++i) {
      double s = 0.0;
      for (int j : ring[i]) s += (p[j] - p[i]).norm();
      h.push_back(2.0 * s / ring[i].size());
    }
  }

  bool eval(const Vec3& x, double& value) const {
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double r2 = (x - p[k]).squaredNorm();
      if (r2 >= h[k] * h[k]) continue;
      const double w = std::pow(1.0 - r2 / (h[k] * h[k]), 4);
      num += n[k].dot(x - p[k]) * w;
      den += w;
    }
    if (den <= 0.0) return false;
    value = num / den;
    return true;
  }
};

/// Equilateral triangle lattice with side s in z = 0.
SurfaceMesh equilateral_lattice(int nx, int ny, double s) {
  std::vector<Vec3> v;
  for (int j = 0; j <= ny; ++j) {
    for (int i = 0; i <= nx; ++i) {
      v.emplace_back(s * (i + 0.5 * (j % 2)), s * j * std::sqrt(3.0) / 2.0, 0.0);
    }
  }
  std::vector<Face> f;
  const auto id = [&](int i, int j) { return j * (nx + 1) + i; };
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      if (j % 2 == 0) {
        f.push_back({id(i, j), id(i + 1, j), id(i, j + 1)});
        f.push_back({id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)});
      } else {
        f.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
        f.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      }
    }
  }
  return SurfaceMesh(std::move(v), std::move(f));
}

TEST(BuildField, UniformLatticeRadiusIsTwiceEdge) {
  const ImlsField f = build_field(equilateral_lattice(8, 8, 0.01));
  for (double h : f.support_radii()) EXPECT_NEAR(h, 0.02, 1e-12);
}

TEST(BuildField, EquilateralTriangle) {
  const double s = 0.3;
  const SurfaceMesh m({Vec3(0, 0, 0), Vec3(s, 0, 0), Vec3(s / 2, s * std::sqrt(3.0) / 2, 0)},
                      {{0, 1, 2}});
  const ImlsField f = build_field(m);
  for (double h : f.support_radii()) EXPECT_NEAR(h, 2 * s, 1e-12);
}

TEST(BuildField, IcosphereRadiiMatchBruteForceOneRing) {
  const SurfaceMesh m = test::icosphere(2);
  const BruteField oracle(m);
  const ImlsField f = build_field(m);
  double lo = 1e9, hi = 0.0;
  for (const Face& t : m.faces()) {
    for (int k = 0; k < 3; ++k) {
      const double e = (m.vertices()[t[k]] - m.vertices()[t[(k + 1) % 3]]).norm();
      lo = std::min(lo, e);
      hi = std::max(hi, e);
    }
  }
  for (int i = 0; i < m.vertex_count(); ++i) {
    const double h = f.support_radii()[i];
    EXPECT_GT(h, 0.0);
    EXPECT_GE(h, 2 * lo - 1e-15);
    EXPECT_LE(h, 2 * hi + 1e-15);
    EXPECT_NEAR(h, oracle.h[i], 1e-12);
  }
}

TEST(BuildField, IsolatedVertexIsRejected) {
  const SurfaceMesh m({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(3, 3, 3)}, {{0, 1, 2}});
  EXPECT_THROW(build_field(m), TopologyError);
}

TEST(Phi, PlanarTriangleIsExactPlaneDistance) {
  const SurfaceMesh m({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)}, {{0, 1, 2}});
  const ImlsField f = build_field(m);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-0.5, 0.8);
  for (int k = 0; k < 100; ++k) {
    const Vec3 x(u(rng), u(rng), u(rng));
    const auto s = f.eval(x);
    if (!s.supported) continue;
    EXPECT_NEAR(s.value, x.z(), 1e-14);
    EXPECT_LT((s.gradient - Vec3::UnitZ()).norm(), 1e-12);
  }
}

TEST(Phi, ZeroOnSourceVertexOfPlanarPatch) {
  const SurfaceMesh m = test::planar_grid(6, 0.01);
  const ImlsField f = build_field(m);
  for (const Vec3& v : m.vertices()) {
    const auto s = f.eval(v);
    ASSERT_TRUE(s.supported);
    EXPECT_EQ(s.value, 0.0);
  }
}

TEST(Phi, HeightAbovePlanarInterior) {
  const ImlsField f = build_field(test::planar_grid(10, 0.01));
  for (const Vec3 x : {Vec3(0.05, 0.05, 0.003), Vec3(0.031, 0.067, 0.003), Vec3(0.05, 0.05, -0.003)}) {
    const auto s = f.eval(x);
    ASSERT_TRUE(s.supported);
    EXPECT_NEAR(s.value, x.z(), 1e-9);
  }
}

TEST(Phi, NoSupportFarAway) {
  const ImlsField f = build_field(test::icosphere(3));
  const auto s = f.eval(Vec3(10, 0, 0));
  EXPECT_FALSE(s.supported);
  EXPECT_EQ(s.support, 0);
  EXPECT_FALSE(f.eval(Vec3(0, 0, 0)).supported);  // centre of a unit sphere, inside but unsupported
  EXPECT_FALSE(f.eval(Vec3(NAN, 0, 0)).supported);
}

TEST(Phi, MatchesBruteForceQuotientAndGradient) {
  const Fixture fx = make_cylinder_bend({});
  const ImlsField f = build_field(fx.target);
  const BruteField oracle(fx.target);
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> pick(0, fx.target.vertex_count() - 1);
  std::normal_distribution<double> n(0.0, 0.004);
  int checked = 0;
  for (int k = 0; k < 400; ++k) {
    const Vec3 x = fx.target.vertices()[pick(rng)] + Vec3(n(rng), n(rng), n(rng));
    double ref = 0.0;
    const bool ok = oracle.eval(x, ref);
    const auto s = f.eval(x);
    ASSERT_EQ(ok, s.supported);
    if (!ok) continue;
    ++checked;
    EXPECT_NEAR(s.value, ref, 1e-12);
    const double h = 1e-7;
    Vec3 fd;
    for (int a = 0; a < 3; ++a) {
      double vp = 0.0, vm = 0.0;
      Vec3 xp = x, xm = x;
      xp[a] += h;
      xm[a] -= h;
      oracle.eval(xp, vp);
      oracle.eval(xm, vm);
      fd[a] = (vp - vm) / (2 * h);
    }
    EXPECT_LT((fd - s.gradient).norm(), 1e-6 * std::max(1.0, fd.norm()));
  }
  EXPECT_GT(checked, 300);
}

TEST(Phi, RigidMotionInvariance) {
  std::mt19937_64 rng(11);
  const Fixture fx = make_cylinder_bend({});
  const ImlsField a = build_field(fx.target);
  const Eigen::Matrix3d r = test::random_rotation(rng);
  const Vec3 t(0.4, -0.2, 1.0);
  std::vector<Vec3> moved;
  for (const Vec3& v : fx.target.vertices()) moved.push_back(r * v + t);
  const ImlsField b = build_field(fx.target.with_vertices(moved));
  std::normal_distribution<double> n(0.0, 0.003);
  for (int k = 0; k < 200; ++k) {
    const Vec3 x = fx.target.vertices()[(k * 37) % fx.target.vertex_count()] + Vec3(n(rng), n(rng), n(rng));
    const auto sa = a.eval(x);
    const auto sb = b.eval(r * x + t);
    ASSERT_EQ(sa.supported, sb.supported);
    if (!sa.supported) continue;
    EXPECT_NEAR(sa.value, sb.value, 1e-10);
    EXPECT_LT((r * sa.gradient - sb.gradient).norm(), 1e-8);
  }
}

TEST(BodyPenalty, AllOutsideIsZero) {
  const ImlsField f = build_field(test::planar_grid(10, 0.01));
  Dofs x(9);
  x << 0.02, 0.02, 0.001, 0.05, 0.05, 0.004, 0.07, 0.03, 0.0;
  const PenaltyResult r = body_penalty(f, x);
  EXPECT_EQ(r.energy, 0.0);
  EXPECT_EQ(r.gradient.norm(), 0.0);
  EXPECT_EQ(r.penetrating, 0);
}

TEST(BodyPenalty, SingleVertexArithmetic) {
  const ImlsField f = build_field(test::planar_grid(4, 0.5));
  Dofs x(3);
  x << 1.0, 1.0, -0.2;
  const PenaltyResult r = body_penalty(f, x);
  EXPECT_NEAR(r.energy, 0.04, 1e-14);
  EXPECT_NEAR(r.gradient[2], -0.4, 1e-13);
  EXPECT_EQ(r.penetrating, 1);
  EXPECT_NEAR(r.min_phi, -0.2, 1e-14);
}

TEST(BodyPenalty, UnsupportedVerticesContributeNothing) {
  const ImlsField f = build_field(test::planar_grid(4, 0.01));
  Dofs x(6);
  x << 0.02, 0.02, -0.001, 5.0, 5.0, -5.0;
  const PenaltyResult r = body_penalty(f, x);
  EXPECT_EQ(r.unsupported, 1);
  EXPECT_NEAR(r.energy, 1e-6, 1e-15);
  EXPECT_EQ(r.gradient.segment<3>(3).norm(), 0.0);
  EXPECT_TRUE(std::isnan(r.phi[1]));
}

Dofs perturbed_garment(const SurfaceMesh& body, std::mt19937_64& rng, int count, double sigma) {
  std::uniform_int_distribution<int> pick(0, body.vertex_count() - 1);
  std::normal_distribution<double> n(0.0, sigma);
  Dofs x(3 * count);
  for (int i = 0; i < count; ++i) {
    const int k = pick(rng);
    x.segment<3>(3 * i) = body.vertices()[k] + body.normals()[k] * n(rng) +
                          Vec3(n(rng), n(rng), n(rng)) * 0.3;
  }
  return x;
}

TEST(BodyPenalty, GradientMatchesCentralDifferencesNearBentCylinder) {
  const Fixture fx = make_cylinder_bend({});
  const ImlsField f = build_field(fx.target);
  std::mt19937_64 rng(5);
  const Dofs x = perturbed_garment(fx.target, rng, 60, 0.002);
  const auto energy = [&](const Eigen::VectorXd& y) { return body_penalty(f, y).energy; };
  const Eigen::VectorXd fd = test::central_difference(energy, x, 1e-7);
  const Dofs g = body_penalty(f, x).gradient;
  EXPECT_LT(test::relative_error(g, fd), 1e-6);
}

TEST(BodyPenalty, GradientConsistencyAtManyConfigurations) {
  const SurfaceMesh body = test::icosphere(3, 0.1);
  const ImlsField f = build_field(body);
  std::mt19937_64 rng(9);
  int nontrivial = 0;
  for (int c = 0; c < 100; ++c) {
    const Dofs x = perturbed_garment(body, rng, 10, 0.004);
    const auto energy = [&](const Eigen::VectorXd& y) { return body_penalty(f, y).energy; };
    const Dofs g = body_penalty(f, x).gradient;
    if (g.norm() == 0.0) continue;
    ++nontrivial;
    const Eigen::VectorXd fd = test::central_difference(energy, x, 1e-7);
    EXPECT_LT(test::relative_error(g, fd), 1e-5) << "configuration " << c;
  }
  EXPECT_GT(nontrivial, 90);
}

TEST(BodyPenalty, UnilateralMonotoneAlongNormal) {
  const SurfaceMesh body = test::icosphere(3, 0.1);
  const ImlsField f = build_field(body);
  const Vec3 v = body.vertices()[17], n = body.normals()[17];
  double prev = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= 40; ++k) {
    const Vec3 x = v + n * (-0.004 + 0.0002 * k);
    Dofs d(3);
    d = x;
    const double e = body_penalty(f, d).energy;
    EXPECT_LE(e, prev);
    prev = e;
    if (f.eval(x).value >= 0.0) EXPECT_EQ(e, 0.0);
  }
}

TEST(BodyPenalty, GradientVanishesAtTheClamp) {
  const SurfaceMesh body = test::icosphere(3, 0.1);
  const ImlsField f = build_field(body);
  const Vec3 v = body.vertices()[5], n = body.normals()[5];
  // Find the zero crossing along the normal, then approach it from inside.
  double lo = -0.003, hi = 0.003;
  for (int k = 0; k < 80; ++k) {
    const double mid = 0.5 * (lo + hi);
    (f.eval(v + n * mid).value < 0.0 ? lo : hi) = mid;
  }
  double prev = std::numeric_limits<double>::infinity();
  for (double d : {1e-3, 1e-4, 1e-5, 1e-6, 1e-7}) {
    Dofs x(3);
    x = v + n * (lo - d);
    const double g = body_penalty(f, x).gradient.norm();
    EXPECT_LT(g, prev);
    EXPECT_LT(g, 4.0 * d);
    prev = g;
  }
}

TEST(Phi, ScalarAndAvx2FieldsAgree) {
  if (!simd::avx2_supported()) GTEST_SKIP() << "AVX2 not available";
  const Fixture fx = make_cylinder_bend({});
  const ImlsField f = build_field(fx.target);
  std::mt19937_64 rng(21);
  const Dofs x = perturbed_garment(fx.target, rng, 500, 0.003);
  const simd::Isa before = simd::active_isa();
  simd::set_isa(simd::Isa::Scalar);
  const PenaltyResult a = body_penalty(f, x);
  simd::set_isa(simd::Isa::Avx2);
  const PenaltyResult b = body_penalty(f, x);
  simd::set_isa(before);
  EXPECT_NEAR(a.energy, b.energy, 1e-12 * a.energy);
  EXPECT_LT(test::relative_error(a.gradient, b.gradient), 1e-12);
  EXPECT_EQ(a.penetrating, b.penetrating);
}

TEST(DumpPhi, WritesSupportedSamples) {
  test::TempDir dir;
  const ImlsField f = build_field(test::planar_grid(4, 0.01));
  dump_phi_csv(f, Vec3(0, 0, -0.005), Vec3(0.04, 0.04, 0.005), 5, dir / "phi.csv");
  const std::string text = read_text_file(dir / "phi.csv");
  EXPECT_EQ(text.rfind("x,y,z,phi\n", 0), 0u);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1 + 125);
  EXPECT_THROW(dump_phi_csv(f, Vec3::Zero(), Vec3::Ones(), 1, dir / "x.csv"), ConfigError);
}

}  // namespace
}  // namespace ktopo
