#include "oblog/stats.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace oblog::stats {

// Series expansion of P(a, x), valid for x < a + 1.
static double gamma_p_series(double a, double x) {
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int n = 0; n < 20000; ++n) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::fabs(del) < std::fabs(sum) * 1e-15) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Lentz continued fraction for Q(a, x), valid for x >= a + 1.
static double gamma_q_cf(double a, double x) {
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 20000; ++i) {
        double an = -double(i) * (double(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < 1e-15) break;
    }
    return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double gamma_q(double a, double x) {
    if (a <= 0.0) throw std::invalid_argument("gamma_q: a must be positive");
    if (x < 0.0) throw std::invalid_argument("gamma_q: x must be non-negative");
    if (x == 0.0) return 1.0;
    if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
    return gamma_q_cf(a, x);
}

double chi2_sf(double stat, double df) {
    if (stat <= 0.0) return 1.0;
    return gamma_q(df / 2.0, stat / 2.0);
}

double chi2_uniform_p(std::span<const uint64_t> counts) {
    if (counts.size() < 2) throw std::invalid_argument("chi2_uniform_p: need >= 2 cells");
    uint64_t total = 0;
    for (uint64_t c : counts) total += c;
    if (total == 0) return 1.0;
    double expected = double(total) / double(counts.size());
    double stat = 0.0;
    for (uint64_t c : counts) {
        double d = double(c) - expected;
        stat += d * d / expected;
    }
    return chi2_sf(stat, double(counts.size() - 1));
}

double chi2_2x2(uint64_t n00, uint64_t n01, uint64_t n10, uint64_t n11) {
    double n = double(n00 + n01 + n10 + n11);
    if (n == 0.0) return 0.0;
    double r0 = double(n00 + n01), r1 = double(n10 + n11);
    double c0 = double(n00 + n10), c1 = double(n01 + n11);
    if (r0 == 0 || r1 == 0 || c0 == 0 || c1 == 0) return 0.0;
    double d = double(n00) * double(n11) - double(n01) * double(n10);
    return n * d * d / (r0 * r1 * c0 * c1);
}

double monobit_p(uint64_t ones, uint64_t total_bits) {
    if (total_bits == 0) return 1.0;
    double s = 2.0 * double(ones) - double(total_bits);
    return std::erfc(std::fabs(s) / std::sqrt(2.0 * double(total_bits)));
}

uint64_t count_ones(std::span<const uint8_t> data) {
    uint64_t ones = 0;
    size_t i = 0;
    for (; i + 8 <= data.size(); i += 8) {
        uint64_t w;
        std::memcpy(&w, data.data() + i, 8);
        ones += std::popcount(w);
    }
    for (; i < data.size(); ++i) ones += std::popcount(unsigned(data[i]));
    return ones;
}

}  // namespace oblog::stats
