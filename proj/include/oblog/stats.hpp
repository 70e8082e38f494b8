#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace oblog::stats {

// Regularized upper incomplete gamma Q(a, x).
double gamma_q(double a, double x);

// Survival function of the chi-square distribution (p-value of stat at df).
double chi2_sf(double stat, double df);

// Chi-square goodness-of-fit p-value for observed counts against a uniform
// expectation over the cells.
double chi2_uniform_p(std::span<const uint64_t> counts);

// Chi-square statistic for a 2x2 contingency table.
double chi2_2x2(uint64_t n00, uint64_t n01, uint64_t n10, uint64_t n11);

// Frequency (monobit) test p-value given a count of one-bits out of n.
double monobit_p(uint64_t ones, uint64_t total_bits);

uint64_t count_ones(std::span<const uint8_t> data);

}  // namespace oblog::stats
