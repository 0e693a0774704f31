#pragma once

#include <vector>

#include "tsmx/tensor.hpp"

namespace tsmx {

/// Class-conditional density, either Gaussian with identity covariance or
/// a Student-t profile with the univariate normalizer. Both follow the
/// (x + center) sign convention, so the mode sits at -center.
struct ClassConditional {
    enum class Kind { gaussian, student_t };
    Kind kind = Kind::gaussian;
    Tensor center;  // [N]
    double nu = 1.0;
};

/// log Gamma via the Lanczos approximation (g = 7, 9 coefficients).
double log_gamma(double x);

/// log B(a, b)
double log_beta(double a, double b);

/// (2 pi)^(-N/2) exp(-||x + center||^2 / 2)
double gaussian_pdf(const ClassConditional& c, const Tensor& x);

/// (1 + ||x + center||^2 / nu)^(-(nu+1)/2) / (sqrt(nu) B(1/2, nu/2)).
/// The normalizer is the univariate one regardless of the dimension of x;
/// for N > 1 the value is a density profile, not a normalized density.
/// It cancels in every posterior computed here.
double t_pdf(const ClassConditional& c, const Tensor& x);

/// Equal-prior posterior p_i(x) / sum_k p_k(x), computed from
/// unnormalized log densities via log-sum-exp.
std::vector<double> bayes_posterior(const std::vector<ClassConditional>& conds,
                                    const Tensor& x);

}  // namespace tsmx
