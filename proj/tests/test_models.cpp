#include <cmath>
#include <memory>
#include <random>

#include <Eigen/Dense>

#include "doctest.h"
#include "streamem/mixture.hpp"
#include "streamem/ppca1.hpp"
#include "test_support.hpp"

using namespace streamem;
using namespace test_support;

namespace {

void check_close_vec(const Vector& got, const Vector& want, double tol) {
  REQUIRE(got.size() == want.size());
  for (Eigen::Index j = 0; j < got.size(); ++j)
    CHECK(got[j] == doctest::Approx(want[j]).epsilon(tol).scale(1.0));
}

Vector random_gaussian(std::mt19937_64& rng, int d, double scale = 2.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Vector y(d);
  for (int j = 0; j < d; ++j) y[j] = normal(rng);
  return y;
}

// Admissible statistics arise as convex mixes of E-step outputs; averaging a
// few keeps the tests inside the region without assuming the closed forms.
SufficientStat random_ppca_stat(std::mt19937_64& rng, const Ppca1Model& model) {
  const ParameterPoint theta = random_ppca_theta(rng, model.dim());
  SufficientStat s = SufficientStat::Zero(model.stat_dim());
  for (int k = 0; k < 5; ++k) s += model.estep(theta, random_gaussian(rng, model.dim()));
  return s / 5.0;
}

}  // namespace

TEST_CASE("ppca1 dimensions and packing") {
  const Ppca1Model model(4);
  CHECK(model.name() == "ppca1");
  CHECK(model.stat_dim() == 6);
  CHECK(model.param_dim() == 5);
  CHECK(model.obs_dim() == 4);
  CHECK(model.reduced_dim() == 5);
  CHECK(model.has_gradients());

  Vector u(4);
  u << 1.0, -2.0, 0.5, 0.0;
  const ParameterPoint theta = model.pack(u, 0.7);
  CHECK(model.factor_loading(theta) == u);
  CHECK(model.noise_variance(theta) == 0.7);
  CHECK(model.to_reduced(theta) == theta);
  CHECK(model.from_reduced(theta) == theta);

  const auto names = model.param_names();
  REQUIRE(names.size() == 5);
  CHECK(names.front() == "u1");
  CHECK(names[3] == "u4");
  CHECK(names.back() == "lambda");
}

TEST_CASE("ppca1 estep matches dense gaussian conditioning") {
  SUBCASE("worked two-dimensional point") {
    const Ppca1Model model(2);
    Vector u(2);
    u << 1.0, 0.0;
    Vector y(2);
    y << 2.0, 0.0;
    const SufficientStat s = model.estep(model.pack(u, 1.0), y);
    // g = 2, E[x|y] = 1, Var[x|y] = 1/2; every value is a dyadic rational.
    CHECK(s[0] == 4.0);
    CHECK(s[1] == 2.0);
    CHECK(s[2] == 0.0);
    CHECK(s[3] == 1.5);
  }

  SUBCASE("zero loading decouples the latent variable") {
    const Ppca1Model model(3);
    Vector y(3);
    y << 1.0, -2.0, 0.5;
    const SufficientStat s = model.estep(model.pack(Vector::Zero(3), 2.5), y);
    CHECK(s[0] == y.squaredNorm());
    CHECK(s.segment(1, 3).norm() == 0.0);
    CHECK(s[4] == 1.0);  // posterior equals the prior
  }

  SUBCASE("random points against the conditioning oracle") {
    std::mt19937_64 rng(20240101);
    for (int d : {1, 2, 5, 8}) {
      const Ppca1Model model(d);
      for (int rep = 0; rep < 25; ++rep) {
        const ParameterPoint theta = random_ppca_theta(rng, d);
        const Vector y = random_gaussian(rng, d);
        const SufficientStat s = model.estep(theta, y);
        const PpcaMoments want =
            oracle_ppca_estep(model.factor_loading(theta), model.noise_variance(theta), y);
        CHECK(s[0] == doctest::Approx(want.s0).epsilon(1e-10));
        check_close_vec(s.segment(1, d), want.s1, 1e-10);
        CHECK(s[d + 1] == doctest::Approx(want.s2).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("ppca1 mstep maximizes the complete-data objective") {
  SUBCASE("worked two-dimensional point") {
    const Ppca1Model model(2);
    SufficientStat s(4);
    s << 4.0, 2.0, 0.0, 1.5;
    const ParameterPoint theta = model.mstep(s);
    CHECK(theta[0] == doctest::Approx(4.0 / 3.0).epsilon(1e-15));
    CHECK(theta[1] == 0.0);
    CHECK(theta[2] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  }

  SUBCASE("zero cross moment gives the isotropic fit") {
    const Ppca1Model model(5);
    SufficientStat s = SufficientStat::Zero(7);
    s[0] = 10.0;
    s[6] = 1.0;
    const ParameterPoint theta = model.mstep(s);
    CHECK(theta.head(5).norm() == 0.0);
    CHECK(theta[5] == doctest::Approx(2.0).epsilon(1e-15));  // s0 / d
  }

  SUBCASE("matches the numeric maximizer") {
    std::mt19937_64 rng(404);
    for (int d : {1, 3, 6}) {
      const Ppca1Model model(d);
      for (int rep = 0; rep < 7; ++rep) {
        const SufficientStat s = random_ppca_stat(rng, model);
        REQUIRE(model.admissible(s));
        const ParameterPoint got = model.mstep(s);
        const ParameterPoint want = oracle_ppca_mstep(d, s);
        // The golden sections resolve the flat top of the objective to about
        // sqrt(machine eps).
        check_close_vec(got, want, 2e-6);
      }
    }
  }

  SUBCASE("beats random competitors on the objective") {
    std::mt19937_64 rng(405);
    const Ppca1Model model(4);
    const SufficientStat s = random_ppca_stat(rng, model);
    const ParameterPoint best = model.mstep(s);
    const double top = ppca_complete_objective(4, s, best);
    for (int rep = 0; rep < 100; ++rep) {
      const ParameterPoint rival = random_ppca_theta(rng, 4);
      CHECK(ppca_complete_objective(4, s, rival) <= top + 1e-12);
    }
  }
}

TEST_CASE("ppca1 mstep rejects boundary statistics") {
  const Ppca1Model model(3);

  SufficientStat tiny = SufficientStat::Zero(5);
  tiny[0] = 1.0;
  tiny[4] = 1e-13;  // below the second-moment threshold
  CHECK_FALSE(model.admissible(tiny));
  CHECK_THROWS_AS(model.mstep(tiny), InadmissibleStatError);

  SufficientStat zero_noise(5);
  zero_noise << 4.0, 2.0, 0.0, 0.0, 1.0;  // s0 == |s1|^2 / s2 exactly
  CHECK_FALSE(model.admissible(zero_noise));
  CHECK_THROWS_AS(model.mstep(zero_noise), InadmissibleStatError);

  SufficientStat bad = SufficientStat::Ones(5);
  bad[2] = std::nan("");
  CHECK_THROWS_AS(model.mstep(bad), InadmissibleStatError);
  // The boundary error is also catchable as the general domain error.
  CHECK_THROWS_AS(model.mstep(tiny), DomainError);

  // An all-zero observation pins the noise variance at zero.
  const SufficientStat at_zero = model.estep(model.pack(Vector::Ones(3), 1.0), Vector::Zero(3));
  CHECK_FALSE(model.admissible(at_zero));
}

TEST_CASE("ppca1 log likelihood matches the dense gaussian density") {
  SUBCASE("worked two-dimensional point") {
    const Ppca1Model model(2);
    Vector u(2);
    u << 1.0, 0.0;
    Vector y(2);
    y << 2.0, 0.0;
    const double got = model.log_likelihood(model.pack(u, 1.0), y);
    const double want = -std::log(2.0 * std::acos(-1.0)) - 0.5 * std::log(2.0) - 1.0;
    CHECK(got == doctest::Approx(want).epsilon(1e-14));
  }

  SUBCASE("zero loading reduces to the isotropic gaussian") {
    const Ppca1Model model(4);
    Vector y(4);
    y << 0.5, -1.0, 2.0, 0.0;
    const double lambda = 1.7;
    const double got = model.log_likelihood(model.pack(Vector::Zero(4), lambda), y);
    const double want = -0.5 * (4.0 * std::log(2.0 * std::acos(-1.0) * lambda) +
                                y.squaredNorm() / lambda);
    CHECK(got == doctest::Approx(want).epsilon(1e-14));
  }

  SUBCASE("random points against the dense oracle") {
    std::mt19937_64 rng(71);
    for (int d : {1, 2, 5, 8}) {
      const Ppca1Model model(d);
      for (int rep = 0; rep < 25; ++rep) {
        const ParameterPoint theta = random_ppca_theta(rng, d);
        const Vector y = random_gaussian(rng, d);
        const double got = model.log_likelihood(theta, y);
        const double want =
            oracle_ppca_loglik(model.factor_loading(theta), model.noise_variance(theta), y);
        CHECK(got == doctest::Approx(want).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("rank-one covariance inverse identities") {
  std::mt19937_64 rng(9001);
  for (int rep = 0; rep < 10; ++rep) {
    const int d = 5;
    const Vector u = random_gaussian(rng, d);
    std::uniform_real_distribution<double> noise(0.3, 3.0);
    const double lambda = noise(rng);
    const double g = lambda + u.squaredNorm();

    // Woodbury form of the marginal precision.
    const Matrix sigma = u * u.transpose() + lambda * Matrix::Identity(d, d);
    const Matrix inv = Matrix::Identity(d, d) / lambda - u * u.transpose() / (lambda * g);
    CHECK((inv * sigma - Matrix::Identity(d, d)).cwiseAbs().maxCoeff() < 1e-12);

    // Block precision of the joint (x, y) covariance: the Y block of the
    // joint precision is I / lambda, which is not the marginal precision.
    Matrix prec(d + 1, d + 1);
    prec(0, 0) = 1.0 + u.squaredNorm() / lambda;
    prec.block(1, 0, d, 1) = -u / lambda;
    prec.block(0, 1, 1, d) = -u.transpose() / lambda;
    prec.block(1, 1, d, d) = Matrix::Identity(d, d) / lambda;
    const Matrix joint = ppca_joint_cov(u, lambda);
    CHECK((prec * joint - Matrix::Identity(d + 1, d + 1)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("ppca1 score matches finite differences") {
  std::mt19937_64 rng(512);
  for (int d : {1, 2, 6}) {
    const Ppca1Model model(d);
    for (int rep = 0; rep < 34; ++rep) {
      const ParameterPoint theta = random_ppca_theta(rng, d);
      const Vector y = random_gaussian(rng, d);
      const Vector got = model.score(theta, y);
      const Vector want = fd_gradient(
          [&](const Vector& r) { return model.log_likelihood(model.from_reduced(r), y); },
          model.to_reduced(theta));
      CHECK((got - want).norm() <= 1e-5 * (1.0 + want.norm()));
    }
  }

  SUBCASE("closed form at zero loading") {
    const Ppca1Model model(3);
    Vector y(3);
    y << 1.0, 2.0, -1.0;
    const double lambda = 0.9;
    const Vector got = model.score(model.pack(Vector::Zero(3), lambda), y);
    // The u gradient (Sigma^{-1} y y' Sigma^{-1} - Sigma^{-1}) u vanishes at u = 0.
    CHECK(got.head(3).norm() == 0.0);
    const double want_lambda =
        -3.0 / (2.0 * lambda) + y.squaredNorm() / (2.0 * lambda * lambda);
    CHECK(got[3] == doctest::Approx(want_lambda).epsilon(1e-13));
  }
}

TEST_CASE("ppca1 complete information matches monte carlo") {
  const int d = 3;
  const Ppca1Model model(d);
  Vector u(d);
  u << 1.0, -0.5, 2.0;
  const double lambda = 0.8;
  const ParameterPoint theta = model.pack(u, lambda);
  const Matrix info = model.complete_fisher(theta);

  REQUIRE(info.rows() == d + 1);
  CHECK((info - info.transpose()).cwiseAbs().maxCoeff() == 0.0);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(info);
  CHECK(eig.eigenvalues().minCoeff() > 0.0);

  // Average the exact negative Hessian of the complete-data log density over
  // simulated complete draws.
  std::mt19937_64 rng(777);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int n = 200000;
  Matrix mc = Matrix::Zero(d + 1, d + 1);
  for (int k = 0; k < n; ++k) {
    const double x = normal(rng);
    Vector y(d);
    for (int j = 0; j < d; ++j) y[j] = u[j] * x + std::sqrt(lambda) * normal(rng);
    const Vector resid = y - u * x;
    mc.topLeftCorner(d, d) += (x * x / lambda) * Matrix::Identity(d, d);
    mc.block(0, d, d, 1) += x * resid / (lambda * lambda);
    mc.block(d, 0, 1, d) += x * resid.transpose() / (lambda * lambda);
    mc(d, d) += resid.squaredNorm() / (lambda * lambda * lambda) -
                d / (2.0 * lambda * lambda);
  }
  mc /= n;
  CHECK((mc - info).cwiseAbs().maxCoeff() < 0.02 * (1.0 + info.cwiseAbs().maxCoeff()));
}

TEST_CASE("ppca1 estep statistics are admissible") {
  std::mt19937_64 rng(31337);
  const Ppca1Model model(4);
  for (int rep = 0; rep < 100; ++rep) {
    const ParameterPoint theta = random_ppca_theta(rng, 4);
    Vector y = random_gaussian(rng, 4);
    if (y.norm() == 0.0) y[0] = 1.0;
    const SufficientStat s = model.estep(theta, y);
    CHECK(model.admissible(s));
    CHECK_NOTHROW(model.mstep(s));
  }
}

TEST_CASE("ppca1 input validation") {
  const Ppca1Model model(3);
  const ParameterPoint ok = model.pack(Vector::Ones(3), 1.0);
  Vector y = Vector::Ones(3);

  CHECK_THROWS_AS(Ppca1Model(0), std::invalid_argument);
  CHECK_THROWS_AS(model.estep(model.pack(Vector::Ones(3), -1.0), y), DomainError);
  CHECK_THROWS_AS(model.estep(model.pack(Vector::Ones(3), 0.0), y), DomainError);
  CHECK_THROWS_AS(model.estep(ok, Vector::Ones(2)), DomainError);
  Vector bad = y;
  bad[1] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(model.log_likelihood(ok, bad), DomainError);
  ParameterPoint nan_theta = ok;
  nan_theta[0] = std::nan("");
  CHECK_FALSE(model.valid_parameter(nan_theta));
  CHECK_THROWS_AS(model.score(nan_theta, y), DomainError);

  ParameterPoint clamped = model.pack(Vector::Ones(3), 1e-12);
  CHECK(model.project_interior(clamped, 1e-8));
  CHECK(clamped[3] == 1e-8);
  CHECK_FALSE(model.project_interior(clamped, 1e-8));
}

TEST_CASE("poisson family density, gradient, information") {
  const PoissonFamily family;
  Vector beta(1);
  beta << 2.0;
  Vector y(1);
  y << 3.0;

  const double want = -2.0 + 3.0 * std::log(2.0) - std::log(6.0);
  CHECK(family.log_density(beta, y) == doctest::Approx(want).epsilon(1e-14));

  SUBCASE("densities sum to one over the support") {
    Vector b(1);
    b << 3.7;
    double total = 0.0;
    for (int k = 0; k <= 200; ++k) {
      Vector obs(1);
      obs << static_cast<double>(k);
      total += std::exp(family.log_density(b, obs));
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }

  SUBCASE("mle is the mean statistic") {
    Vector mean(1);
    mean << 2.5;
    CHECK(family.mle(mean)[0] == 2.5);
    Vector zero(1);
    zero << 0.0;
    CHECK_THROWS_AS(family.mle(zero), InadmissibleStatError);
  }

  SUBCASE("gradient matches finite differences") {
    std::mt19937_64 rng(88);
    std::uniform_real_distribution<double> mean(0.3, 8.0);
    for (int rep = 0; rep < 50; ++rep) {
      Vector b(1);
      b << mean(rng);
      const Vector obs = random_count(rng);
      const Vector got = family.log_density_grad(b, obs);
      const Vector fd = fd_gradient(
          [&](const Vector& v) { return family.log_density(v, obs); }, b);
      CHECK(got[0] == doctest::Approx(fd[0]).epsilon(1e-6).scale(1.0));
    }
  }

  SUBCASE("information equals the score variance") {
    // E[(y / beta - 1)^2] = Var(y) / beta^2 = 1 / beta for a Poisson mean.
    Vector b(1);
    b << 4.2;
    CHECK(family.fisher(b)(0, 0) == doctest::Approx(1.0 / 4.2).epsilon(1e-14));
    std::mt19937_64 rng(99);
    std::poisson_distribution<long> pois(4.2);
    double acc = 0.0;
    const int n = 200000;
    for (int k = 0; k < n; ++k) {
      const double yy = static_cast<double>(pois(rng));
      const double sc = yy / 4.2 - 1.0;
      acc += sc * sc;
    }
    CHECK(acc / n == doctest::Approx(1.0 / 4.2).epsilon(0.02));
  }
}

TEST_CASE("poisson family rejects bad observations and parameters") {
  const PoissonFamily family;
  Vector beta(1);
  beta << 1.0;
  Vector y(1);

  y << -1.0;
  CHECK_THROWS_AS(family.log_density(beta, y), DomainError);
  y << 2.5;
  CHECK_THROWS_AS(family.log_density(beta, y), DomainError);
  y << std::nan("");
  CHECK_THROWS_AS(family.log_density(beta, y), DomainError);
  y << 3.0;
  Vector bad(1);
  bad << 0.0;
  CHECK_THROWS_AS(family.log_density(bad, y), DomainError);
  bad << -2.0;
  CHECK_THROWS_AS(family.log_density_grad(bad, y), DomainError);
}

TEST_CASE("mixture posteriors match direct computation") {
  const MixtureModel model = make_poisson_mixture(2);
  Vector w(2);
  w << 0.8, 0.2;
  Matrix betas(2, 1);
  betas << 1.0, 3.0;
  const ParameterPoint theta = model.pack(w, betas);

  SUBCASE("worked point at y = 0") {
    Vector y(1);
    y << 0.0;
    const Vector p = model.posteriors(theta, y);
    const double a = 0.8 * std::exp(-1.0);
    const double b = 0.2 * std::exp(-3.0);
    CHECK(p[0] == doctest::Approx(a / (a + b)).epsilon(1e-14));
    CHECK(p[1] == doctest::Approx(b / (a + b)).epsilon(1e-14));
  }

  SUBCASE("random points, scalar reference computation") {
    std::mt19937_64 rng(606);
    for (int m : {2, 4}) {
      const MixtureModel mix = make_poisson_mixture(m);
      for (int rep = 0; rep < 50; ++rep) {
        const ParameterPoint t = random_mixture_theta(rng, m);
        const Vector y = random_count(rng);
        const Vector p = mix.posteriors(t, y);
        Vector want(m);
        double total = 0.0;
        for (int i = 0; i < m; ++i) {
          want[i] = t[i] * std::exp(-t[m + i]) * std::pow(t[m + i], y[0]) /
                    std::tgamma(y[0] + 1.0);
          total += want[i];
        }
        want /= total;
        check_close_vec(p, want, 1e-12);
        CHECK(std::abs(p.sum() - 1.0) <= 1e-12);
      }
    }
  }

  SUBCASE("identical components split evenly") {
    const MixtureModel mix = make_poisson_mixture(3);
    Vector ww(3);
    ww << 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0;
    ww[2] = 1.0 - ww[0] - ww[1];
    Matrix bb(3, 1);
    bb << 2.0, 2.0, 2.0;
    Vector y(1);
    y << 5.0;
    const Vector p = mix.posteriors(mix.pack(ww, bb), y);
    for (int i = 0; i < 3; ++i) CHECK(p[i] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  }

  SUBCASE("zero-weight component gets zero posterior") {
    Vector ww(2);
    ww << 1.0, 0.0;
    Matrix bb(2, 1);
    bb << 2.0, 3.0;
    Vector y(1);
    y << 1.0;
    const Vector p = model.posteriors(model.pack(ww, bb), y);
    CHECK(p[0] == 1.0);
    CHECK(p[1] == 0.0);
  }
}

TEST_CASE("mixture estep stacks posteriors and weighted statistics") {
  std::mt19937_64 rng(607);
  const MixtureModel model = make_poisson_mixture(3);
  for (int rep = 0; rep < 50; ++rep) {
    const ParameterPoint theta = random_mixture_theta(rng, 3);
    const Vector y = random_count(rng);
    const SufficientStat s = model.estep(theta, y);
    const Vector p = model.posteriors(theta, y);
    check_close_vec(s.head(3), p, 1e-15);
    for (int i = 0; i < 3; ++i) CHECK(s[3 + i] == p[i] * y[0]);
  }
}

TEST_CASE("mixture mstep matches the weighted maximum likelihood") {
  const MixtureModel model = make_poisson_mixture(2);

  SUBCASE("worked point reproduces the generating parameter") {
    SufficientStat s(4);
    s << 0.8, 0.2, 0.8, 0.6;  // exactly E_theta[s] for omega (.8, .2), beta (1, 3)
    const ParameterPoint theta = model.mstep(s);
    CHECK(theta[0] == 0.8);
    CHECK(theta[1] == 0.2);
    CHECK(theta[2] == 1.0);
    CHECK(theta[3] == doctest::Approx(3.0).epsilon(1e-15));
  }

  SUBCASE("stationary point of the complete objective") {
    std::mt19937_64 rng(608);
    std::uniform_real_distribution<double> mass(0.1, 1.0);
    std::uniform_real_distribution<double> level(0.5, 6.0);
    for (int m : {2, 5}) {
      const MixtureModel mix = make_poisson_mixture(m);
      for (int rep = 0; rep < 10; ++rep) {
        // Keep every component well fed; a starved weight makes the finite
        // differences of log(omega) too curved to trust.
        SufficientStat s(2 * m);
        for (int i = 0; i < m; ++i) {
          s[i] = mass(rng);
          s[m + i] = s[i] * level(rng);
        }
        REQUIRE(mix.admissible(s));
        const ParameterPoint fit = mix.mstep(s);
        const Vector grad = fd_gradient(
            [&](const Vector& r) {
              return poisson_mixture_complete_objective(m, s, mix.from_reduced(r));
            },
            mix.to_reduced(fit));
        CHECK(grad.cwiseAbs().maxCoeff() < 1e-5);
      }
    }
  }

  SUBCASE("beats random competitors on the objective") {
    std::mt19937_64 rng(609);
    const MixtureModel mix = make_poisson_mixture(3);
    SufficientStat s = SufficientStat::Zero(6);
    const ParameterPoint gen = random_mixture_theta(rng, 3);
    for (int k = 0; k < 10; ++k) s += mix.estep(gen, random_count(rng));
    s /= 10.0;
    const double top = poisson_mixture_complete_objective(3, s, mix.mstep(s));
    for (int rep = 0; rep < 100; ++rep) {
      const ParameterPoint rival = random_mixture_theta(rng, 3);
      CHECK(poisson_mixture_complete_objective(3, s, rival) <= top + 1e-12);
    }
  }
}

TEST_CASE("mixture weights renormalize to an exact simplex") {
  std::mt19937_64 rng(610);
  std::uniform_real_distribution<double> raw(1e-4, 1.0);
  for (int m : {2, 3, 5, 9}) {
    const MixtureModel model = make_poisson_mixture(m);
    for (int rep = 0; rep < 50; ++rep) {
      SufficientStat s(2 * m);
      for (int i = 0; i < m; ++i) {
        s[i] = raw(rng);
        s[m + i] = s[i] * (0.5 + 5.0 * raw(rng));
      }
      const ParameterPoint theta = model.mstep(s);
      double acc = 0.0;
      for (int i = 0; i < m; ++i) acc += theta[i];
      CHECK(acc == 1.0);  // exact in the stored summation order
      CHECK(model.valid_parameter(theta));

      ParameterPoint drifted = theta;
      drifted[0] += 3e-10;  // below the validity tolerance, above exactness
      model.renormalize(drifted);
      acc = 0.0;
      for (int i = 0; i < m; ++i) acc += drifted[i];
      CHECK(acc == 1.0);
    }
  }
}

TEST_CASE("mixture mstep rejects starved components") {
  const MixtureModel model = make_poisson_mixture(2);
  SufficientStat s(4);
  s << 1.0 - 1e-13, 1e-13, 1.0, 3e-13;
  CHECK_FALSE(model.admissible(s));
  CHECK_THROWS_AS(model.mstep(s), InadmissibleStatError);

  s << 0.5, 0.5, 0.5, 0.0;  // second component has only zero counts
  CHECK_THROWS_AS(model.mstep(s), InadmissibleStatError);

  s << 0.5, 0.5, 0.5, std::nan("");
  CHECK_THROWS_AS(model.mstep(s), InadmissibleStatError);
}

TEST_CASE("mixture log likelihood matches direct summation") {
  std::mt19937_64 rng(611);
  for (int m : {2, 4}) {
    const MixtureModel model = make_poisson_mixture(m);
    for (int rep = 0; rep < 50; ++rep) {
      const ParameterPoint theta = random_mixture_theta(rng, m);
      const Vector y = random_count(rng);
      double mass = 0.0;
      for (int i = 0; i < m; ++i) {
        mass += theta[i] * std::exp(-theta[m + i]) * std::pow(theta[m + i], y[0]) /
                std::tgamma(y[0] + 1.0);
      }
      CHECK(model.log_likelihood(theta, y) == doctest::Approx(std::log(mass)).epsilon(1e-12));
    }
  }
}

TEST_CASE("mixture score matches finite differences") {
  std::mt19937_64 rng(612);
  for (int m : {2, 3}) {
    const MixtureModel model = make_poisson_mixture(m);
    CHECK(model.reduced_dim() == 2 * m - 1);
    for (int rep = 0; rep < 50; ++rep) {
      const ParameterPoint theta = random_mixture_theta(rng, m);
      const Vector y = random_count(rng);
      const Vector got = model.score(theta, y);
      const Vector want = fd_gradient(
          [&](const Vector& r) { return model.log_likelihood(model.from_reduced(r), y); },
          model.to_reduced(theta));
      CHECK((got - want).norm() <= 1e-5 * (1.0 + want.norm()));
    }
  }
}

TEST_CASE("mixture complete information matches monte carlo") {
  const int m = 3;
  const MixtureModel model = make_poisson_mixture(m);
  Vector w(3);
  w << 0.5, 0.3, 0.2;
  Matrix betas(3, 1);
  betas << 1.0, 3.0, 6.0;
  const ParameterPoint theta = model.pack(w, betas);
  const Matrix info = model.complete_fisher(theta);
  const int rd = 2 * m - 1;
  REQUIRE(info.rows() == rd);

  CHECK((info - info.transpose()).cwiseAbs().maxCoeff() == 0.0);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(info);
  CHECK(eig.eigenvalues().minCoeff() > 0.0);
  // Complete-data log density separates in weights and component means.
  CHECK(info.block(0, m - 1, m - 1, m).cwiseAbs().maxCoeff() == 0.0);

  std::mt19937_64 rng(613);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Matrix mc = Matrix::Zero(rd, rd);
  const int n = 300000;
  for (int k = 0; k < n; ++k) {
    const double pick = unif(rng);
    int comp = 0;
    double cum = w[0];
    while (comp + 1 < m && pick > cum) cum += w[++comp];
    std::poisson_distribution<long> pois(betas(comp, 0));
    const double y = static_cast<double>(pois(rng));

    if (comp < m - 1) {
      mc(comp, comp) += 1.0 / (w[comp] * w[comp]);
    } else {
      mc.topLeftCorner(m - 1, m - 1).array() += 1.0 / (w[m - 1] * w[m - 1]);
    }
    const int o = (m - 1) + comp;
    mc(o, o) += y / (betas(comp, 0) * betas(comp, 0));
  }
  mc /= n;
  CHECK((mc - info).cwiseAbs().maxCoeff() < 0.02 * (1.0 + info.cwiseAbs().maxCoeff()));
}

TEST_CASE("mixture reduced coordinates round trip") {
  std::mt19937_64 rng(614);
  const MixtureModel model = make_poisson_mixture(4);
  for (int rep = 0; rep < 20; ++rep) {
    const ParameterPoint theta = random_mixture_theta(rng, 4);
    const Vector r = model.to_reduced(theta);
    REQUIRE(r.size() == model.reduced_dim());
    const ParameterPoint back = model.from_reduced(r);
    CHECK((back - theta).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(model.valid_parameter(back));
  }
}

TEST_CASE("mixture input validation") {
  const MixtureModel model = make_poisson_mixture(2);
  Vector w(2);
  w << 0.6, 0.4;
  Matrix betas(2, 1);
  betas << 1.0, 2.0;
  const ParameterPoint ok = model.pack(w, betas);
  Vector y(1);
  y << 2.0;

  CHECK(model.name() == "poisson-mixture-2");
  CHECK_THROWS_AS(make_poisson_mixture(0), std::invalid_argument);
  CHECK_THROWS_AS(MixtureModel(nullptr, 2), std::invalid_argument);

  ParameterPoint bad = ok;
  bad[0] = 0.7;  // weights no longer sum to one
  CHECK_FALSE(model.valid_parameter(bad));
  CHECK_THROWS_AS(model.log_likelihood(bad, y), DomainError);

  bad = ok;
  bad[0] = -0.1;
  bad[1] = 1.1;
  CHECK_THROWS_AS(model.estep(bad, y), DomainError);

  bad = ok;
  bad[2] = 0.0;  // degenerate component mean
  CHECK_THROWS_AS(model.log_likelihood(bad, y), DomainError);

  y << 1.5;
  CHECK_THROWS_AS(model.estep(ok, y), DomainError);
  y << 2.0;

  // Score needs an interior point; a zero weight is valid but not interior.
  Vector wz(2);
  wz << 1.0, 0.0;
  const ParameterPoint boundary = model.pack(wz, betas);
  CHECK(model.valid_parameter(boundary));
  CHECK_THROWS_AS(model.score(boundary, y), DomainError);

  ParameterPoint clamped = boundary;
  CHECK(model.project_interior(clamped, 1e-8));
  CHECK(clamped[1] >= 1e-8);
  double acc = 0.0;
  for (int i = 0; i < 2; ++i) acc += clamped[i];
  CHECK(acc == 1.0);
}

TEST_CASE("natural-parameter count model identities") {
  const NaturalPoissonModel model;
  ParameterPoint eta(1);
  eta << 0.7;
  Vector y(1);
  y << 4.0;

  SUBCASE("estep is the observation and mstep inverts the mean map") {
    CHECK(model.estep(eta, y) == y);
    SufficientStat s(1);
    s << std::exp(0.7);  // E_eta[y]
    CHECK(model.mstep(s)[0] == doctest::Approx(0.7).epsilon(1e-15));
  }

  SUBCASE("score and information match finite differences of the density") {
    std::mt19937_64 rng(615);
    std::uniform_real_distribution<double> unif(-1.0, 2.0);
    for (int rep = 0; rep < 30; ++rep) {
      ParameterPoint e(1);
      e << unif(rng);
      const Vector obs = random_count(rng);
      const Vector got = model.score(e, obs);
      const Vector fd = fd_gradient(
          [&](const Vector& v) { return model.log_likelihood(v, obs); }, e);
      CHECK(got[0] == doctest::Approx(fd[0]).epsilon(1e-6).scale(1.0));

      // In natural coordinates the complete information is the second
      // derivative of the cumulant e^eta.
      const double h = 1e-4;
      ParameterPoint hi = e, lo = e;
      hi[0] += h;
      lo[0] -= h;
      const double curvature =
          (std::exp(hi[0]) - 2.0 * std::exp(e[0]) + std::exp(lo[0])) / (h * h);
      CHECK(model.complete_fisher(e)(0, 0) ==
            doctest::Approx(curvature).epsilon(1e-6).scale(1.0));
    }
  }

  SUBCASE("information equals the monte carlo score variance") {
    std::mt19937_64 rng(616);
    std::poisson_distribution<long> pois(std::exp(0.7));
    double acc = 0.0;
    const int n = 200000;
    for (int k = 0; k < n; ++k) {
      const double sc = static_cast<double>(pois(rng)) - std::exp(0.7);
      acc += sc * sc;
    }
    CHECK(acc / n == doctest::Approx(std::exp(0.7)).epsilon(0.02));
  }

  SUBCASE("boundary statistic is rejected") {
    SufficientStat s(1);
    s << 0.0;
    CHECK_FALSE(model.admissible(s));
    CHECK_THROWS_AS(model.mstep(s), InadmissibleStatError);
  }
}
