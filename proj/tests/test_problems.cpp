#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "metarule/metarule.hpp"

using namespace metarule;

namespace {

double at(BaseFunction f, std::vector<double> x) { return make_base(f)(x); }

}  // namespace

TEST(Functions, BentCigarUnitVectors) {
  EXPECT_EQ(at(BaseFunction::BentCigar, {1.0, 0.0, 0.0}), 1.0);
  EXPECT_EQ(at(BaseFunction::BentCigar, {0.0, 1.0, 0.0}), 1e6);
  EXPECT_EQ(at(BaseFunction::BentCigar, {0.0, 0.0, 0.0}), 0.0);
}

TEST(Functions, RastriginOriginAndLattice) {
  EXPECT_EQ(at(BaseFunction::Rastrigin, {0.0, 0.0}), 0.0);
  // input is scaled by 0.0512; 19.53125 maps to z = 1
  // integer lattice in z: cos term is 1, only z^2 remains
  EXPECT_NEAR(at(BaseFunction::Rastrigin, {19.53125, -39.0625}), 5.0, 1e-9);
  // half-integer z: cos term is -1
  EXPECT_NEAR(at(BaseFunction::Rastrigin, {9.765625, 0.0}), 0.25 + 20.0, 1e-9);
}

TEST(Functions, SphereIsSquaredNorm) { EXPECT_EQ(at(BaseFunction::Sphere, {3.0, 4.0}), 25.0); }

TEST(Functions, SchwefelTextbookMinimum) {
  const std::vector<double> x(5, 420.9687);
  EXPECT_LT(std::abs(functions::schwefel_standard(x)), 1e-3);
  // the modified form puts that minimum at the origin
  EXPECT_LT(std::abs(at(BaseFunction::Schwefel, std::vector<double>(5, 0.0))), 1e-3);
}

TEST(Functions, OriginIsBestAmongProbes) {
  Rng rng(5);
  for (BaseFunction f : kAllBaseFunctions) {
    const double y0 = make_base(f).optimum(4);
    for (int n = 0; n < 2000; ++n) {
      std::vector<double> x(4);
      for (double& v : x) v = uniform(rng, -100.0, 100.0);
      EXPECT_GE(make_base(f)(x), y0 - 1e-9) << name_of(f);
    }
  }
}

TEST(Functions, NamesRoundTrip) {
  for (BaseFunction f : kAllBaseFunctions) EXPECT_EQ(base_from_name(name_of(f)), f);
  EXPECT_FALSE(base_from_name("ackley"));
  EXPECT_THROW(make_base("ackley"), ContractError);
}

TEST(Instance, RotationIsOrthogonal) {
  for (int d : {1, 2, 5, 10, 30}) {
    Rng rng(static_cast<std::uint64_t>(d));
    const Eigen::MatrixXd q = random_rotation(d, rng);
    EXPECT_LT((q.transpose() * q - Eigen::MatrixXd::Identity(d, d)).cwiseAbs().maxCoeff(), 1e-10) << d;
  }
}

TEST(Instance, OptimumAtNegatedShift) {
  for (BaseFunction f : kAllBaseFunctions) {
    for (std::uint64_t seed : {1ull, 2ull, 99ull}) {
      const ProblemInstance p = make_instance(f, 10, seed);
      const Vector x = p.optimum_position();
      EXPECT_NEAR(p(RowVector(x.transpose())), p.y_opt, 1e-6) << name_of(f);
      EXPECT_LE(x.cwiseAbs().maxCoeff(), 80.0);
    }
  }
}

TEST(Instance, DeterministicInSeed) {
  const ProblemInstance a = make_instance(BaseFunction::Rastrigin, 6, 11);
  const ProblemInstance b = make_instance(BaseFunction::Rastrigin, 6, 11);
  const ProblemInstance c = make_instance(BaseFunction::Rastrigin, 6, 12);
  EXPECT_EQ(a.shift, b.shift);
  EXPECT_EQ(a.rotation, b.rotation);
  EXPECT_NE(a.shift, c.shift);
}

TEST(Instance, BatchMatchesSingle) {
  const ProblemInstance p = make_instance(BaseFunction::LunacekBiRastrigin, 7, 3);
  Rng rng(8);
  const Matrix xs = uniform_positions(50, 7, p.bounds, rng);
  const Vector v = p.evaluate(xs);
  for (Eigen::Index i = 0; i < xs.rows(); ++i) EXPECT_EQ(v[i], p(RowVector(xs.row(i))));
}

TEST(Instance, DimensionMismatch) {
  const ProblemInstance p = make_instance(BaseFunction::Sphere, 3, 1);
  EXPECT_THROW(p(std::vector<double>{1.0, 2.0}), DimensionError);
  EXPECT_THROW(p.evaluate(Matrix::Zero(4, 2)), DimensionError);
  EXPECT_THROW(make_instance(BaseFunction::Sphere, 0, 1), ContractError);
}

TEST(Manifest, RoundTrip) {
  const auto m = generate_manifest(40, 10, 17, kAllBaseFunctions);
  std::stringstream ss;
  write_manifest(ss, m);
  const auto back = read_manifest(ss);
  ASSERT_EQ(back.size(), m.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    EXPECT_EQ(back[i].base, m[i].base);
    EXPECT_EQ(back[i].seed, m[i].seed);
    EXPECT_EQ(back[i].dim, m[i].dim);
  }
  const auto a = instantiate(m);
  const auto b = instantiate(back);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].shift, b[i].shift);
}

TEST(Manifest, RestrictedBases) {
  const std::array<BaseFunction, 2> two = {BaseFunction::Sphere, BaseFunction::Rastrigin};
  for (const auto& e : generate_manifest(100, 2, 3, two)) {
    EXPECT_TRUE(e.base == BaseFunction::Sphere || e.base == BaseFunction::Rastrigin);
  }
  EXPECT_THROW(generate_manifest(3, 2, 3, std::span<const BaseFunction>{}), ContractError);
}

TEST(Manifest, BadLines) {
  std::stringstream a("index,base,seed,dim\n0,ackley,1,2\n");
  EXPECT_THROW(read_manifest(a), ParseError);
  std::stringstream b("index,base,seed,dim\n0,sphere,1\n");
  EXPECT_THROW(read_manifest(b), ParseError);
  std::stringstream c("index,base,seed,dim\n0,sphere,x,2\n");
  EXPECT_THROW(read_manifest(c), ParseError);
  EXPECT_THROW(read_manifest_file("/nonexistent/manifest.csv"), IoError);
}
