#include "feetiming/closed_form.hpp"

#include <algorithm>
#include <cmath>

#include "feetiming/count_law.hpp"

namespace feetiming::closed_form {

double pow_ibr(double q, double fee_cdf, std::int64_t slots) {
    if (slots <= 0) return 0.0;
    const double r = (q - q * fee_cdf) / (1.0 - q * fee_cdf);
    return 1.0 - std::pow(r, static_cast<double>(slots));
}

double pow_linear_nbr(double q, std::int64_t n0, double fee_cdf, std::int64_t m) {
    double head = 0.0;
    for (std::int64_t n = 0; n < n0; ++n) {
        head += (1.0 - q) * std::pow(q, static_cast<double>(n)) * binomial_cdf(n, 1.0 - fee_cdf, m - 1);
    }
    return (pow_ibr(q, fee_cdf, m) - head) / std::pow(q, static_cast<double>(n0));
}

double pow_poisson_nbr(double lambda, double beta, double elapsed, double fee_cdf, std::int64_t m) {
    const double lb = lambda + beta;
    const double log_ratio = std::log(beta / lb);
    const double mu = elapsed * lb;
    // inner sum over j <= n equals e^{lambda t} P(Poisson(t (lambda+beta)) <= n)
    double cum = 0.0;
    double total = 0.0;
    double mass = 0.0;
    for (std::int64_t n = 0;; ++n) {
        const double nn = static_cast<double>(n);
        cum += mu > 0.0 ? std::exp(nn * std::log(mu) - mu - std::lgamma(nn + 1.0)) : (n == 0 ? 1.0 : 0.0);
        const double pn = std::exp(std::log(lambda / lb) + nn * log_ratio + lambda * elapsed) * cum;
        total += pn * binomial_cdf(n, 1.0 - fee_cdf, m - 1);
        mass += pn;
        if (nn > mu && 1.0 - mass < 1e-12) break;
        if (n > 5000000) break;
    }
    return total;
}

double pos_linear(std::int64_t n, double fee_cdf, std::int64_t slots) {
    if (slots <= 0) return 0.0;
    return binomial_cdf(n, 1.0 - fee_cdf, slots - 1);
}

double pos_poisson(double mean, double fee_cdf, std::int64_t slots) {
    if (slots <= 0) return 0.0;
    double total = 0.0;
    double mass = 0.0;
    for (std::int64_t n = 0;; ++n) {
        const double nn = static_cast<double>(n);
        const double pn = mean == 0.0 ? (n == 0 ? 1.0 : 0.0)
                                      : std::exp(nn * std::log(mean) - mean - std::lgamma(nn + 1.0));
        total += pn * binomial_cdf(n, 1.0 - fee_cdf, slots - 1);
        mass += pn;
        if (nn > mean && 1.0 - mass < 1e-13) break;
    }
    return total;
}

}  // namespace feetiming::closed_form
