#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "sae/special.hpp"

using namespace sae;

TEST_CASE("incomplete beta matches reference values") {
  CHECK(incomplete_beta(2.5, 3.5, 0.4) == doctest::Approx(0.4869041915261176).epsilon(1e-12));
  CHECK(incomplete_beta(0.5, 0.5, 0.1) == doctest::Approx(0.20483276469913345).epsilon(1e-12));
  CHECK(incomplete_beta(50, 80, 0.4) == doctest::Approx(0.6450659221505504).epsilon(1e-11));
  CHECK(incomplete_beta(3, 4, 0.0) == 0.0);
  CHECK(incomplete_beta(3, 4, 1.0) == 1.0);
}

TEST_CASE("beta quantile inverts the incomplete beta") {
  CHECK(beta_quantile(4, 8, 0.025) == doctest::Approx(0.10926344381909811).epsilon(1e-10));
  CHECK(beta_quantile(4, 8, 0.975) == doctest::Approx(0.6097425595724212).epsilon(1e-10));
  CHECK(beta_quantile(1.5, 20, 0.5) == doctest::Approx(0.05675577279888494).epsilon(1e-10));
  for (double a : {1.0, 2.0, 7.5, 120.0}) {
    for (double b : {1.0, 3.0, 40.0}) {
      for (double p : {1e-6, 0.01, 0.3, 0.5, 0.9, 0.999}) {
        CHECK(incomplete_beta(a, b, beta_quantile(a, b, p)) == doctest::Approx(p).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("beta quantile agrees with a quadrature oracle") {
  CHECK(std::abs(beta_quantile(2, 2, 0.025) - oracle::beta_quantile_quadrature(2, 2, 0.025)) < 1e-6);
  CHECK(std::abs(beta_quantile(2, 2, 0.975) - oracle::beta_quantile_quadrature(2, 2, 0.975)) < 1e-6);
  CHECK(std::abs(beta_quantile(4, 8, 0.1) - oracle::beta_quantile_quadrature(4, 8, 0.1)) < 1e-6);
}

TEST_CASE("student t distribution") {
  CHECK(student_t_quantile(0.975, 9) == doctest::Approx(2.2621571628540993).epsilon(1e-10));
  CHECK(student_t_quantile(0.975, 1) == doctest::Approx(12.706204736432095).epsilon(1e-10));
  CHECK(student_t_quantile(0.01, 3.5) == doctest::Approx(-4.060711359314515).epsilon(1e-10));
  CHECK(student_t_cdf(-2.1, 7) == doctest::Approx(0.0369355981064613).epsilon(1e-11));
  CHECK(student_t_quantile(0.5, 4) == doctest::Approx(0.0));
  for (double df : {1.0, 2.0, 5.0, 30.0}) {
    for (double p : {0.001, 0.2, 0.8, 0.995}) {
      CHECK(student_t_cdf(student_t_quantile(p, df), df) == doctest::Approx(p).epsilon(1e-10));
    }
  }
}

TEST_CASE("gamma, chi-square, normal and Kolmogorov tails") {
  CHECK(gamma_p(3.2, 2.1) == doctest::Approx(0.3047296750594145).epsilon(1e-12));
  CHECK(gamma_q(10, 15.0) == doctest::Approx(0.06985366069940986).epsilon(1e-12));
  CHECK(chi_square_sf(25.0, 19) == doctest::Approx(0.16054222136106835).epsilon(1e-12));
  CHECK(normal_cdf(-1.3) == doctest::Approx(0.09680048458561036).epsilon(1e-12));
  CHECK(kolmogorov_sf(1.2) == doctest::Approx(0.11224966667072497).epsilon(1e-10));
}

TEST_CASE("logistic helpers are stable at the extremes") {
  CHECK(logistic(0.0) == 0.5);
  CHECK(logistic(-800.0) >= 0.0);
  CHECK(logistic(800.0) == 1.0);
  CHECK(softplus(800.0) == doctest::Approx(800.0));
  CHECK(softplus(-800.0) >= 0.0);
  CHECK(logit(logistic(1.7)) == doctest::Approx(1.7).epsilon(1e-14));
}
