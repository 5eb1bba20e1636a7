#include <doctest.h>

#include <Eigen/LU>
#include <algorithm>
#include <cmath>

#include "dibc/conditionals.hpp"
#include "dibc/distributions.hpp"
#include "dibc/error.hpp"
#include "dibc/local_sampler.hpp"
#include "dibc/model.hpp"
#include "support/oracles.hpp"

using namespace dibc;

namespace {

ModelParams random_params(int K, int L, int d, std::uint64_t seed) {
  Rng rng(seed);
  Matrix S = Matrix::Identity(d, d);
  if (d > 1) S(0, 1) = S(1, 0) = 0.3;
  const auto hp = elicit_priors(Vector::Zero(d), S, 0.5, 0.1, K, L);
  auto p = sample_prior(hp, K, L, rng);
  return p;
}

double normal_pdf(double x, double m, double v) {
  return std::exp(-0.5 * (x - m) * (x - m) / v) / std::sqrt(2 * 3.14159265358979323846 * v);
}

}  // namespace

TEST_CASE("elicited hyperparameters") {
  Matrix S(2, 2);
  S << 2.0, 0.4, 0.4, 1.0;
  Vector m(2);
  m << 1.0, -3.0;
  const auto hp = elicit_priors(m, S, 0.5, 0.1, 10, 3);
  CHECK(hp.c0 == 4.0);
  CHECK(hp.g0 == 4.0);
  CHECK(hp.e0 == 0.01);
  CHECK(hp.d0 == 4.0);
  CHECK(hp.nu == 10.0);
  CHECK((hp.m0 - m).norm() == 0.0);
  CHECK((hp.M0 - 10.0 * S).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((hp.B0 - 0.05 * S).cwiseAbs().maxCoeff() < 1e-14);
  const Matrix within = 0.9 * 0.5 * S;
  CHECK((hp.G0 - 4.0 / (4.0 - 2 - 1) * within.inverse()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK_NOTHROW(hp.validate());

  const auto unit = elicit_priors(Vector::Zero(3), Matrix::Identity(3, 3), 0.5, 0.1, 10, 3);
  CHECK((unit.B0 - 0.05 * Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-15);
  CHECK_THROWS_AS(elicit_priors(m, S, 1.0, 0.1, 10, 3), ParameterError);
  CHECK_THROWS_AS(elicit_priors(m, S, 0.5, 0.0, 10, 3), ParameterError);
}

TEST_CASE("sparsity condition") {
  const auto hp = elicit_priors(Vector::Zero(2), Matrix::Identity(2, 2), 0.5, 0.1, 10, 3);
  CHECK(cluster_parameter_dimension(2, 3) == 3 * (2 + 3) + 2);
  CHECK(sparsity_condition_holds(hp, 3));
  auto loose = hp;
  loose.e0 = 100.0;
  CHECK_FALSE(sparsity_condition_holds(loose, 3));
}

TEST_CASE("prior draws of cluster centers spread like M0") {
  Rng rng(3);
  Matrix S(2, 2);
  S << 3.0, 0.5, 0.5, 1.0;
  const auto hp = elicit_priors(Vector::Zero(2), S, 0.5, 0.1, 1, 3);
  const int n = 10000;
  Matrix acc = Matrix::Zero(2, 2);
  for (int i = 0; i < n; ++i) {
    const auto p = sample_prior(hp, 1, 3, rng);
    acc += p.clusters[0].b0 * p.clusters[0].b0.transpose();
  }
  acc /= n;
  for (int j = 0; j < 2; ++j) {
    CHECK(acc(j, j) > 0.5 * hp.M0(j, j));
    CHECK(acc(j, j) < 2.0 * hp.M0(j, j));
  }
}

TEST_CASE("mixture log density") {
  SUBCASE("single component is the gaussian") {
    const auto p = random_params(1, 1, 2, 4);
    Vector y(2);
    y << 0.4, -0.7;
    CHECK(mixture_logdensity(y, p) ==
          doctest::Approx(stats::mvn_logpdf(y, p.clusters[0].mu[0], p.clusters[0].sigma[0])).epsilon(1e-13));
  }
  SUBCASE("direct summation in one dimension") {
    auto p = random_params(2, 1, 1, 5);
    p.eta << 0.3, 0.7;
    for (double x = -5; x <= 5; x += 0.25) {
      double direct = 0;
      for (int k = 0; k < 2; ++k) direct += p.eta[k] * normal_pdf(x, p.clusters[k].mu[0][0], p.clusters[k].sigma[0](0, 0));
      CHECK(std::abs(mixture_logdensity(Vector::Constant(1, x), p) - std::log(direct)) < 1e-12);
    }
  }
  SUBCASE("permutation invariance") {
    auto p = random_params(3, 3, 2, 6);
    Vector y(2);
    y << 0.1, 0.2;
    const double base = mixture_logdensity(y, p);
    auto q = p;
    std::swap(q.clusters[0], q.clusters[2]);
    std::swap(q.eta[0], q.eta[2]);
    CHECK(std::abs(mixture_logdensity(y, q) - base) < 1e-12);
    auto& cl = q.clusters[1];
    std::swap(cl.mu[0], cl.mu[1]);
    std::swap(cl.sigma[0], cl.sigma[1]);
    std::swap(cl.precision[0], cl.precision[1]);
    std::swap(cl.omega[0], cl.omega[1]);
    CHECK(std::abs(mixture_logdensity(y, q) - base) < 1e-12);
  }
}

TEST_CASE("kernel table matches weighted gaussian densities") {
  const auto p = random_params(3, 2, 2, 7);
  const KernelTable table(p);
  Vector y(2);
  y << 0.5, 1.5;
  std::vector<double> out(6);
  table.evaluate(y.data(), out);
  for (int k = 0; k < 3; ++k) {
    for (int l = 0; l < 2; ++l) {
      const auto& cl = p.clusters[k];
      const double want = std::log(p.eta[k] * cl.omega[l]) + stats::mvn_logpdf(y, cl.mu[l], cl.sigma[l]);
      CHECK(std::abs(out[k * 2 + l] - want) < 1e-10);
    }
  }
}

TEST_CASE("model validation") {
  auto p = random_params(2, 2, 2, 8);
  CHECK_NOTHROW(p.validate());
  p.eta[0] = 0.9;
  p.eta[1] = 0.9;
  CHECK_THROWS_AS(p.validate(), ParameterError);
  auto hp = elicit_priors(Vector::Zero(2), Matrix::Identity(2, 2), 0.5, 0.1, 2, 2);
  hp.c0 = 0.5;
  CHECK_THROWS_AS(hp.validate(), ParameterError);
}

TEST_CASE("conjugate updates match closed forms") {
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto o = check::conjugate_updates(seed);
    CAPTURE(o.detail);
    CHECK(o.pass);
  }
}

TEST_CASE("empty subcomponent reduces to the prior") {
  const std::vector<double> counts{0.0, 0.0, 0.0};
  const Vector a = conditional::weight_concentration(counts, 0.01);
  CHECK((a.array() == 0.01).all());
  const auto wp = conditional::precision_posterior(4.0, Matrix::Identity(2, 2), 0.0, Matrix::Zero(2, 2));
  CHECK(wp.df == 4.0);
  CHECK((wp.inverse_scale - Matrix::Identity(2, 2)).norm() == 0.0);
  Vector b0(2);
  b0 << 1.0, 2.0;
  const auto np = conditional::mean_posterior(b0, Matrix::Identity(2, 2), Matrix::Identity(2, 2), 0.0, Vector::Zero(2));
  CHECK((np.mean - b0).norm() < 1e-14);
  CHECK((np.cov - Matrix::Identity(2, 2)).norm() < 1e-14);
}

TEST_CASE("eta draws with no data reproduce the dirichlet prior") {
  Rng rng(9);
  const int K = 4, n = 100000;
  const double e0 = 0.5;
  const std::vector<double> zeros(K, 0.0);
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double w = stats::sample_dirichlet(conditional::weight_concentration(zeros, e0), rng)[0];
    s += w;
    s2 += w * w;
  }
  const double mean = 1.0 / K, var = mean * (1 - mean) / (K * e0 + 1);
  CHECK(std::abs(s / n - mean) < 4 * std::sqrt(var / n));
  CHECK(std::abs(s2 / n - s * s / n / n - var) < 0.05 * var);
}

TEST_CASE("allocation probabilities are normalized and label-equivariant") {
  const auto p = random_params(3, 2, 2, 10);
  Vector y(2);
  y << 0.2, -0.1;
  const auto a = allocation_probabilities(y, p);
  CHECK(std::abs(a.cluster.sum() - 1.0) < 1e-12);
  for (int k = 0; k < 3; ++k) CHECK(std::abs(a.subcomponent.row(k).sum() - 1.0) < 1e-12);

  auto q = p;
  std::swap(q.clusters[0], q.clusters[2]);
  std::swap(q.eta[0], q.eta[2]);
  const auto b = allocation_probabilities(y, q);
  CHECK(std::abs(b.cluster[0] - a.cluster[2]) < 1e-14);
  CHECK(std::abs(b.cluster[2] - a.cluster[0]) < 1e-14);
  CHECK(std::abs(b.cluster[1] - a.cluster[1]) < 1e-14);
  CHECK((b.subcomponent.row(0) - a.subcomponent.row(2)).norm() < 1e-14);
}
