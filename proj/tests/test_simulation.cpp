#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "gencov/mathstats.hpp"
#include "gencov/report_json.hpp"
#include "gencov/simulation.hpp"

using namespace gencov;

namespace {

double empirical_corr(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double ma = a.mean(), mb = b.mean();
  const double cov = ((a.array() - ma) * (b.array() - mb)).sum();
  const double va = (a.array() - ma).square().sum();
  const double vb = (b.array() - mb).square().sum();
  return cov / std::sqrt(va * vb);
}

}  // namespace

TEST_CASE("ar1 design reproduces its covariance structure") {
  SUBCASE("independent columns at rho 0") {
    Rng rng(61);
    const int n = 20000;
    const Eigen::MatrixXd X = sample_ar1_design(n, 3, 0.0, rng);
    CHECK(std::abs(empirical_corr(X.col(0), X.col(1))) <= 4.0 / std::sqrt(n));
  }
  SUBCASE("rho 0.6 neighbours and next-neighbours") {
    Rng rng(62);
    const int n = 50000;
    const Eigen::MatrixXd X = sample_ar1_design(n, 5, 0.6, rng);
    CHECK(empirical_corr(X.col(0), X.col(1)) ==
          doctest::Approx(0.6).epsilon(0.034));
    CHECK(empirical_corr(X.col(0), X.col(2)) ==
          doctest::Approx(0.36).epsilon(0.056));
  }
  SUBCASE("full covariance check at n=100000") {
    Rng rng(63);
    const int n = 100000, p = 4;
    const Eigen::MatrixXd X = sample_ar1_design(n, p, 0.6, rng);
    for (int i = 0; i < p; ++i) {
      for (int j = 0; j < p; ++j) {
        const double cov =
            ((X.col(i).array() - X.col(i).mean()) *
             (X.col(j).array() - X.col(j).mean()))
                .sum() /
            n;
        CHECK(std::abs(cov - std::pow(0.6, std::abs(i - j))) <= 0.02);
      }
    }
  }
  SUBCASE("bitwise determinism") {
    Rng a(64), b(64);
    const Eigen::MatrixXd X1 = sample_ar1_design(50, 7, 0.6, a);
    const Eigen::MatrixXd X2 = sample_ar1_design(50, 7, 0.6, b);
    CHECK(X1 == X2);
  }
}

TEST_CASE("synthetic genotypes") {
  SUBCASE("maf 0.5, independent: Binomial(2, 1/2) moments") {
    Rng rng(65);
    const int n = 20000;
    const Eigen::MatrixXd G = sample_synthetic_genotypes(n, 4, 0.4999999, 0.0, rng);
    for (int j = 0; j < 4; ++j) {
      const double mean = G.col(j).mean();
      const double var = (G.col(j).array() - mean).square().sum() / n;
      CHECK(mean == doctest::Approx(1.0).epsilon(0.03));
      CHECK(var == doctest::Approx(0.5).epsilon(0.06));
    }
  }
  SUBCASE("rare alleles are mostly absent") {
    Rng rng(66);
    const Eigen::MatrixXd G = sample_synthetic_genotypes(5000, 2, 0.01, 0.0, rng);
    CHECK(G.col(0).mean() <= 0.05);
    CHECK(G.minCoeff() == 0.0);
    CHECK(G.maxCoeff() <= 2.0);
  }
  SUBCASE("adjacent correlation grows with rho") {
    const int n = 20000;
    double last = -1.0;
    for (double rho : {0.0, 0.4, 0.8}) {
      Rng rng(67);
      const Eigen::MatrixXd G = sample_synthetic_genotypes(n, 2, 0.3, rho, rng);
      const double corr = empirical_corr(G.col(0), G.col(1));
      CHECK(corr > last);
      last = corr;
    }
  }
  SUBCASE("maf bounds enforced") {
    Rng rng(68);
    CHECK_THROWS_AS((void)sample_synthetic_genotypes(10, 2, 0.5, 0.0, rng),
                    Error);
    CHECK_THROWS_AS((void)sample_synthetic_genotypes(10, 2, 0.0, 0.0, rng),
                    Error);
  }
}

TEST_CASE("correlated error pairs") {
  SUBCASE("independent at corr 0") {
    Rng rng(69);
    const auto [e, v] = sample_correlated_errors(10000, 0.0, rng);
    CHECK(std::abs(empirical_corr(e, v)) <= 4.0 / std::sqrt(10000.0));
  }
  SUBCASE("the 0.4 structure at n=100000") {
    Rng rng(70);
    const auto [e, v] = sample_correlated_errors(100000, 0.4, rng);
    CHECK(empirical_corr(e, v) == doctest::Approx(0.4).epsilon(0.025));
    CHECK(e.squaredNorm() / e.size() == doctest::Approx(1.0).epsilon(0.02));
    CHECK(v.squaredNorm() / v.size() == doctest::Approx(1.0).epsilon(0.02));
  }
  SUBCASE("corr below one accepted, one rejected") {
    Rng rng(71);
    CHECK_NOTHROW((void)sample_correlated_errors(10, 1.0 - 1e-9, rng));
    CHECK_THROWS_AS((void)sample_correlated_errors(10, 1.0, rng), Error);
  }
}

TEST_CASE("coefficient construction") {
  Rng rng(72);
  SUBCASE("ones scheme fills the first s slots") {
    const Eigen::VectorXd b =
        make_coefficients(10, 5, CoefScheme::ones, CoefPositions::first_s, rng);
    for (int j = 0; j < 5; ++j) CHECK(b[j] == 1.0);
    for (int j = 5; j < 10; ++j) CHECK(b[j] == 0.0);
  }
  SUBCASE("zero sparsity gives the zero vector") {
    const Eigen::VectorXd b =
        make_coefficients(6, 0, CoefScheme::ones, CoefPositions::first_s, rng);
    CHECK(b.isZero(0.0));
  }
  SUBCASE("gaussian scheme with random support is reproducible") {
    Rng a(73), b(73);
    const Eigen::VectorXd c1 = make_coefficients(
        20, 4, CoefScheme::gaussian, CoefPositions::random_s, a);
    const Eigen::VectorXd c2 = make_coefficients(
        20, 4, CoefScheme::gaussian, CoefPositions::random_s, b);
    CHECK(c1 == c2);
    int nonzeros = 0;
    for (int j = 0; j < 20; ++j) nonzeros += (c1[j] != 0.0);
    CHECK(nonzeros == 4);
  }
}

TEST_CASE("rescaling to a variance target") {
  SUBCASE("single coordinate") {
    Eigen::VectorXd b = Eigen::VectorXd::Zero(5);
    b[0] = -3.0;
    const Eigen::VectorXd r = rescale_to_variance(b, 0.6, 4.0);
    CHECK(std::abs(r[0]) == doctest::Approx(2.0).epsilon(1e-12));
  }
  SUBCASE("already at target is a fixed point") {
    Eigen::VectorXd b = Eigen::VectorXd::Zero(5);
    b[0] = 2.5;
    const Eigen::VectorXd r = rescale_to_variance(b, 0.6, 6.25);
    CHECK(r == b);
  }
  SUBCASE("exact quadratic form and empirical variance agree") {
    Eigen::VectorXd b = Eigen::VectorXd::Zero(200);
    for (int j = 0; j < 5; ++j) b[j] = 1.0;
    const Eigen::VectorXd r = rescale_to_variance(b, 0.6, 4.0);
    CHECK(ar1_quadratic_form(r, r, 0.6) == doctest::Approx(4.0).epsilon(1e-12));
    Rng rng(74);
    const int n = 100000;
    const Eigen::MatrixXd X = sample_ar1_design(n, 200, 0.6, rng);
    const Eigen::VectorXd u = X * r;
    const double var = (u.array() - u.mean()).square().sum() / n;
    CHECK(var == doctest::Approx(4.0).epsilon(0.0125));  // +-0.05
  }
  SUBCASE("zero vector is degenerate") {
    CHECK_THROWS_AS((void)rescale_to_variance(Eigen::VectorXd::Zero(3), 0.6, 4.0),
                    Error);
  }
}

TEST_CASE("outcome generation") {
  SUBCASE("linear with zero coefficients returns the noise") {
    Eigen::MatrixXd X = Eigen::MatrixXd::Random(10, 6);
    Eigen::VectorXd noise(10);
    for (int i = 0; i < 10; ++i) noise[i] = i * 0.1;
    const Eigen::VectorXd y = generate_outcome(
        TrueModel::linear, X, 0.0, Eigen::VectorXd::Zero(6), noise);
    CHECK(y == noise);
  }
  SUBCASE("m1 at the origin evaluates to -4") {
    Eigen::MatrixXd X = Eigen::MatrixXd::Zero(1, 6);
    const Eigen::VectorXd v = genetic_value(TrueModel::m1, X,
                                            0.0, Eigen::VectorXd::Zero(6));
    CHECK(v[0] == doctest::Approx(-4.0).epsilon(1e-12));
  }
  SUBCASE("logistic with intercept -1 matches the expit rate") {
    Rng rng(75);
    const int n = 20000;
    Eigen::MatrixXd X = Eigen::MatrixXd::Zero(n, 2);
    Eigen::VectorXd u(n);
    for (int i = 0; i < n; ++i) u[i] = rng.uniform();
    const Eigen::VectorXd y = generate_outcome(
        TrueModel::logistic, X, -1.0, Eigen::VectorXd::Zero(2), u);
    CHECK(y.mean() == doctest::Approx(expit(-1.0)).epsilon(0.037));  // +-0.01
  }
  SUBCASE("probit at zero intercept is balanced") {
    Rng rng(76);
    const int n = 20000;
    const Eigen::MatrixXd X = sample_ar1_design(n, 4, 0.6, rng);
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(4);
    beta[0] = 1.3;
    Eigen::VectorXd latent(n);
    for (int i = 0; i < n; ++i) latent[i] = rng.normal();
    const Eigen::VectorXd y =
        generate_outcome(TrueModel::probit, X, 0.0, beta, latent);
    CHECK(y.mean() == doctest::Approx(0.5).epsilon(0.02));  // +-0.01
  }
  SUBCASE("m models need six columns") {
    Eigen::MatrixXd X = Eigen::MatrixXd::Zero(3, 4);
    CHECK_THROWS_AS((void)genetic_value(TrueModel::m2, X, 0.0,
                                        Eigen::VectorXd::Zero(4)),
                    Error);
  }
}

TEST_CASE("case-control subsampling") {
  Rng rng(77);
  const int pool = 500;
  Eigen::MatrixXd X(pool, 2);
  Eigen::VectorXd y(pool);
  for (int i = 0; i < pool; ++i) {
    X(i, 0) = i;
    X(i, 1) = -i;
    y[i] = rng.bernoulli(0.3) ? 1.0 : 0.0;
  }
  SUBCASE("exact class counts") {
    const Subsample s = case_control_subsample(X, y, 100, 100, rng);
    CHECK(s.outcome.size() == 200);
    CHECK(s.outcome.sum() == doctest::Approx(100.0));
    CHECK(s.outcome.mean() == doctest::Approx(0.5));
  }
  SUBCASE("insufficient cases raise a generation error") {
    Eigen::VectorXd none = Eigen::VectorXd::Zero(pool);
    try {
      (void)case_control_subsample(X, none, 10, 10, rng);
      FAIL("expected generation error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::generation);
    }
  }
  SUBCASE("seeded determinism") {
    Rng a(78), b(78);
    const Subsample s1 = case_control_subsample(X, y, 50, 50, a);
    const Subsample s2 = case_control_subsample(X, y, 50, 50, b);
    CHECK(s1.covariates == s2.covariates);
    CHECK(s1.outcome == s2.outcome);
  }
}

TEST_CASE("truth oracle: analytic linear case") {
  SimulationConfig cfg;
  cfg.s_beta = 5;
  cfg.s_gamma = 5;
  cfg.seed = 101;
  const TrueParams tp = make_true_params(cfg);
  const TruthValue tv = truth_value(cfg, tp, 0.0);
  CHECK(tv.provenance == "analytic");
  // identical supports and values after rescaling to the same target
  CHECK(tv.value == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("truth oracle: constant genetic value gives zero covariance") {
  SimulationConfig cfg;
  cfg.s_beta = 0;
  cfg.s_gamma = 5;
  cfg.seed = 102;
  const TruthValue tv = truth_value(cfg, 0.0);
  CHECK(tv.value == 0.0);
}

TEST_CASE("truth oracle: probit against the Stein identity") {
  // f* = Phi(x beta), g* = x gamma: Cov = E[phi(u)] beta' Sigma gamma with
  // u ~ N(0, beta' Sigma beta); E[phi(u)] = 1/sqrt(2 pi (1+var)).
  SimulationConfig cfg;
  cfg.model_f = TrueModel::probit;
  cfg.model_g = TrueModel::linear;
  cfg.s_beta = 10;
  cfg.s_gamma = 2;
  cfg.seed = 103;
  const TrueParams tp = make_true_params(cfg);
  const TruthValue tv = truth_value(cfg, tp, 1e-4);
  CHECK(tv.provenance == "monte-carlo");
  const double var_u = ar1_quadratic_form(tp.beta, tp.beta, cfg.rho);
  const double cross = ar1_quadratic_form(tp.beta, tp.gamma, cfg.rho);
  const double stein = cross / std::sqrt(2.0 * 3.14159265358979 * (1.0 + var_u));
  CHECK(std::abs(tv.value - stein) <= 3.0 * tv.oracle_se + 1e-6);
}

TEST_CASE("narrow-sense projections reproduce the m-model targets") {
  SimulationConfig cfg;
  cfg.truth_kind = TruthKind::narrow_sense;
  cfg.model_f = TrueModel::m2;
  cfg.model_g = TrueModel::m2;
  cfg.s_beta = 0;
  cfg.s_gamma = 0;
  cfg.seed = 104;
  const TruthValue same = truth_value(cfg, 0.0);
  CHECK(same.provenance == "monte-carlo");
  CHECK(std::abs(same.value - 11.1) <= 0.02 * 11.1);

  cfg.model_g = TrueModel::m1;
  const TruthValue crossed = truth_value(cfg, 0.0);
  CHECK(std::abs(crossed.value - (-0.02)) <= 3.0 * crossed.oracle_se + 0.01);
}

TEST_CASE("coverage study basics") {
  SimulationConfig cfg;
  cfg.n_y = cfg.n_z = 60;
  cfg.p = 20;
  cfg.s_beta = cfg.s_gamma = 2;
  cfg.replications = 3;
  cfg.seed = 105;
  cfg.fit.n_lambda = 25;
  cfg.fit.cv_folds = 5;

  SUBCASE("single replication has a 0/1 coverage") {
    cfg.replications = 1;
    const CoverageReport rep = run_coverage_study(cfg, 1);
    CHECK((rep.empirical_coverage == 0.0 || rep.empirical_coverage == 1.0));
    CHECK(rep.replicates.size() == 1);
  }
  SUBCASE("thread count does not change the report") {
    const CoverageReport one = run_coverage_study(cfg, 1);
    const CoverageReport two = run_coverage_study(cfg, 2);
    const ordered_json a = to_json(one, cfg);
    const ordered_json b = to_json(two, cfg);
    CHECK(a.dump() == b.dump());
  }
  SUBCASE("rerun is bit identical") {
    const CoverageReport one = run_coverage_study(cfg, 2);
    const CoverageReport two = run_coverage_study(cfg, 2);
    CHECK(to_json(one, cfg).dump() == to_json(two, cfg).dump());
  }
}

TEST_CASE("coverage at a 50 percent nominal level") {
  SimulationConfig cfg;
  cfg.n_y = cfg.n_z = 400;
  cfg.p = 20;
  cfg.s_beta = cfg.s_gamma = 3;
  cfg.alpha = 0.5;
  cfg.replications = 200;
  cfg.seed = 106;
  cfg.fit.n_lambda = 40;
  cfg.fit.cd_tolerance = 1e-5;
  const CoverageReport rep = run_coverage_study(cfg, 2);
  CHECK(rep.empirical_coverage == doctest::Approx(0.5).epsilon(0.16));  // +-0.08
}

TEST_CASE("config validation names the failing field") {
  SimulationConfig cfg;
  cfg.n_overlap = 50;
  cfg.overlap = OverlapMode::partial;
  cfg.n_y = 10;
  cfg.n_z = 10;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = SimulationConfig{};
  cfg.alpha = 1.5;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = SimulationConfig{};
  cfg.overlap = OverlapMode::full;
  cfg.n_y = 10;
  cfg.n_z = 20;
  CHECK_THROWS_AS(cfg.validate(), Error);
}
