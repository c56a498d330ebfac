#ifndef FEWTREAT_SPECIAL_HPP
#define FEWTREAT_SPECIAL_HPP

namespace fewtreat {

// Standard normal CDF.
double normal_cdf(double x);

// Regularized incomplete beta function I_x(a, b), a,b > 0, x in [0,1].
// Continued-fraction evaluation, relative error below 1e-12 over the range
// used by the t distribution.
double incomplete_beta(double a, double b, double x);

// Student t CDF with nu > 0 degrees of freedom, via the incomplete beta.
double student_t_cdf(double x, double nu);

// Two-sided p-value for a t statistic: 2 * (1 - F_nu(|x|)).
double student_t_two_sided_p(double x, double nu);

// Quantile of the t distribution (bisection on the CDF; nu small in all
// callers, accuracy ~1e-12).
double student_t_quantile(double p, double nu);

}  // namespace fewtreat

#endif  // FEWTREAT_SPECIAL_HPP
