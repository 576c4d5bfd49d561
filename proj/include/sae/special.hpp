#pragma once

// Scalar special functions used for interval construction and sampler checks.
// Everything here is self-contained; no external statistics library is used.

#include <cmath>

namespace sae {

inline double logistic(double eta) {
  return eta >= 0.0 ? 1.0 / (1.0 + std::exp(-eta)) : std::exp(eta) / (1.0 + std::exp(eta));
}

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

/// log(1 + exp(x)) without overflow.
inline double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double log_beta(double a, double b);

/// Regularized incomplete beta function I_x(a, b), evaluated by continued fraction.
double incomplete_beta(double a, double b, double x);

double beta_pdf(double a, double b, double x);

/// Inverse of incomplete_beta in x. Accurate to ~1e-14 absolute.
double beta_quantile(double a, double b, double p);

double student_t_cdf(double t, double df);
double student_t_quantile(double p, double df);

/// Regularized lower incomplete gamma P(a, x).
double gamma_p(double a, double x);
/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x).
double gamma_q(double a, double x);

/// Survival function of the chi-square distribution with `dof` degrees of freedom.
double chi_square_sf(double x, double dof);

double normal_cdf(double x);

/// Asymptotic Kolmogorov distribution survival function P(K > lambda).
double kolmogorov_sf(double lambda);

}  // namespace sae
