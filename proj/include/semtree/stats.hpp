#pragma once

#include <cstddef>
#include <vector>

namespace semtree {

double mean(const std::vector<double>& xs);
double median(std::vector<double> xs);

// Regularized incomplete gamma functions P(a,x) and Q(a,x) = 1 - P(a,x),
// series expansion for x < a+1 and continued fraction otherwise.
double gamma_p(double a, double x);
double gamma_q(double a, double x);

// Survival function of the chi-square distribution with df degrees of
// freedom: P(X >= x).
double chi_square_sf(double x, int df);

// Pearson statistic for observed counts against a uniform expectation.
double chi_square_uniform_stat(const std::vector<int64_t>& counts);

} // namespace semtree
