#include "tsmx/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace tsmx {

namespace {

double sq_dist(const Tensor& x, const Tensor& center) {
    require_same_shape(x, center, "pdf");
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double d = x.data[i] + center.data[i];
        acc += d * d;
    }
    return acc;
}

double log_density(const ClassConditional& c, const Tensor& x, bool normalized) {
    double r2 = sq_dist(x, c.center);
    double n = static_cast<double>(x.size());
    if (c.kind == ClassConditional::Kind::gaussian) {
        double lz = normalized ? -0.5 * n * std::log(2.0 * M_PI) : 0.0;
        return lz - 0.5 * r2;
    }
    if (c.nu <= 0.0) throw DomainError("t_pdf: nu must be positive");
    double lz = normalized ? -0.5 * std::log(c.nu) - log_beta(0.5, c.nu / 2.0) : 0.0;
    return lz - 0.5 * (c.nu + 1.0) * std::log1p(r2 / c.nu);
}

}  // namespace

double log_gamma(double x) {
    // Lanczos, g = 7, n = 9
    static const double coef[9] = {
        0.99999999999980993,
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    };
    if (x < 0.5) {
        // reflection
        return std::log(M_PI / std::sin(M_PI * x)) - log_gamma(1.0 - x);
    }
    x -= 1.0;
    double a = coef[0];
    double t = x + 7.5;
    for (int i = 1; i < 9; ++i) a += coef[i] / (x + i);
    return 0.5 * std::log(2.0 * M_PI) + (x + 0.5) * std::log(t) - t + std::log(a);
}

double log_beta(double a, double b) {
    return log_gamma(a) + log_gamma(b) - log_gamma(a + b);
}

double gaussian_pdf(const ClassConditional& c, const Tensor& x) {
    if (c.kind != ClassConditional::Kind::gaussian)
        throw DomainError("gaussian_pdf: conditional is not gaussian");
    return std::exp(log_density(c, x, true));
}

double t_pdf(const ClassConditional& c, const Tensor& x) {
    if (c.kind != ClassConditional::Kind::student_t)
        throw DomainError("t_pdf: conditional is not student_t");
    return std::exp(log_density(c, x, true));
}

std::vector<double> bayes_posterior(const std::vector<ClassConditional>& conds,
                                    const Tensor& x) {
    if (conds.size() < 2)
        throw DomainError("bayes_posterior: need at least 2 conditionals");
    for (const auto& c : conds) {
        if (c.kind != conds.front().kind)
            throw DomainError("bayes_posterior: mixed conditional kinds");
        if (c.kind == ClassConditional::Kind::student_t && c.nu != conds.front().nu)
            throw DomainError("bayes_posterior: nu must match across conditionals");
    }
    std::vector<double> lp(conds.size());
    for (std::size_t i = 0; i < conds.size(); ++i)
        lp[i] = log_density(conds[i], x, false);
    double m = *std::max_element(lp.begin(), lp.end());
    double acc = 0.0;
    for (double v : lp) acc += std::exp(v - m);
    double lse = m + std::log(acc);
    std::vector<double> out(conds.size());
    for (std::size_t i = 0; i < conds.size(); ++i) out[i] = std::exp(lp[i] - lse);
    return out;
}

}  // namespace tsmx
