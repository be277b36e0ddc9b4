#pragma once

#include <vector>

namespace witch::stats {

double mean(const std::vector<double>& v);
double sample_std(const std::vector<double>& v);

// Regularized incomplete beta function I_x(a, b).
double ibeta(double a, double b, double x);

// Upper-tail probability P(T >= t) for Student's t with dof degrees.
double student_t_upper(double t, int dof);

// One-sided paired t-test p-value for H1: mean(a - b) > 0.
// Pairs with zero spread are handled directly (0 if the common difference
// is positive, 1 otherwise).
double paired_t_pvalue_greater(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace witch::stats
