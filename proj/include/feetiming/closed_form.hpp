#pragma once

// Closed-form success probabilities for special interval/arrival pairs.
// Used as cross-checks of the generic count-law evaluator. Every function
// takes the fee CDF value F = F(b) directly.

#include <cstdint>

namespace feetiming::closed_form {

/// Exponential interval, future arrivals geometric with ratio q:
///   1 - ((q - qF) / (1 - qF))^slots.
double pow_ibr(double q, double fee_cdf, std::int64_t slots);

/// Exponential interval, linear arrivals, n0 arrivals already in the pool:
///   q^-n0 [1 - ((q - qF)/(1 - qF))^m - sum_{n<n0} (1-q) q^n P(Bin(n, 1-F) <= m-1)].
/// Exact with q = exp(-lambda / beta) when beta * elapsed is an integer.
double pow_linear_nbr(double q, std::int64_t n0, double fee_cdf, std::int64_t m);

/// Exponential interval, Poisson arrivals: the double series over round
/// count n and past count j <= n.
double pow_poisson_nbr(double lambda, double beta, double elapsed, double fee_cdf, std::int64_t m);

/// Fixed interval, exactly n competitors: P(Bin(n, 1-F) <= slots - 1).
double pos_linear(std::int64_t n, double fee_cdf, std::int64_t slots);

/// Fixed interval, Poisson(mean) competitors.
double pos_poisson(double mean, double fee_cdf, std::int64_t slots);

}  // namespace feetiming::closed_form
