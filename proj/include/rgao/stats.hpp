#pragma once

// Statistics used by the evaluation harness: Wilson score intervals for
// proportions, McNemar's test for paired classifier outcomes (exact binomial
// below the small-sample cutoff, continuity-corrected chi-squared above),
// and Holm-Bonferroni multiplicity adjustment.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "rgao/common.hpp"

namespace rgao {

struct WilsonInterval {
    double lo = 0.0;
    double hi = 1.0;
    double point = 0.0;  // plain proportion
};

// Wilson score interval. Exact endpoints at the boundaries: zero successes
// pin the lower bound to 0, all successes pin the upper bound to 1.
inline WilsonInterval wilson_ci(std::uint64_t successes, std::uint64_t n, double level = 0.95) {
    if (n == 0) throw std::invalid_argument("wilson_ci: empty sample");
    if (successes > n) throw std::invalid_argument("wilson_ci: successes exceed trials");
    if (level <= 0.0 || level >= 1.0) throw std::invalid_argument("wilson_ci: level outside (0, 1)");

    const double z = boost::math::quantile(boost::math::normal_distribution<double>(),
                                           1.0 - (1.0 - level) / 2.0);
    const double nn = static_cast<double>(n);
    const double p = static_cast<double>(successes) / nn;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / nn;
    const double center = (p + z2 / (2.0 * nn)) / denom;
    const double half = (z / denom) * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn));

    WilsonInterval w;
    w.point = p;
    w.lo = successes == 0 ? 0.0 : std::max(0.0, center - half);
    w.hi = successes == n ? 1.0 : std::min(1.0, center + half);
    return w;
}

struct McNemarResult {
    double statistic = 0.0;
    double p_value = 1.0;
    bool exact = false;       // exact binomial branch (small discordant count)
    bool degenerate = false;  // no discordant pairs at all
    std::uint64_t b = 0;      // baseline right, treatment wrong
    std::uint64_t c = 0;      // treatment right, baseline wrong
};

inline constexpr std::uint64_t kMcNemarExactCutoff = 25;

// McNemar's test on the discordant counts. Below the cutoff: two-sided exact
// binomial at p = 1/2 on min(b, c), statistic = min(b, c). Otherwise the
// continuity-corrected chi-squared with one degree of freedom, whose survival
// function is erfc(sqrt(x / 2)).
inline McNemarResult mcnemar(std::uint64_t b, std::uint64_t c) {
    McNemarResult r;
    r.b = b;
    r.c = c;
    const std::uint64_t n = b + c;
    if (n == 0) {
        // No discordant pairs: no test is run at all, so neither variant
        // applies and p = 1 purely by convention.
        r.degenerate = true;
        r.exact = false;
        r.statistic = 0.0;
        r.p_value = 1.0;
        return r;
    }
    if (n < kMcNemarExactCutoff) {
        r.exact = true;
        const std::uint64_t k = std::min(b, c);
        r.statistic = static_cast<double>(k);
        // Binomial coefficients stay well inside 64 bits for n < 25.
        long double cdf = 0.0L;
        long double coeff = 1.0L;  // C(n, 0)
        for (std::uint64_t i = 0; i <= k; ++i) {
            if (i > 0) coeff = coeff * static_cast<long double>(n - i + 1) / static_cast<long double>(i);
            cdf += coeff;
        }
        long double p = 2.0L * cdf / std::pow(2.0L, static_cast<long double>(n));
        r.p_value = static_cast<double>(std::min(1.0L, p));
        return r;
    }
    const double nn = static_cast<double>(n);
    const double diff = std::abs(static_cast<double>(b) - static_cast<double>(c));
    r.statistic = (diff - 1.0) * (diff - 1.0) / nn;
    r.p_value = std::erfc(std::sqrt(r.statistic / 2.0));
    return r;
}

// Holm-Bonferroni step-down adjustment. Returns adjusted p-values in the
// input order; monotone non-decreasing along the sorted sequence, capped at 1.
inline std::vector<double> holm_bonferroni(const std::vector<double>& p_values) {
    const std::size_t m = p_values.size();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return p_values[a] < p_values[b]; });
    std::vector<double> adjusted(m, 0.0);
    double running = 0.0;
    for (std::size_t rank = 0; rank < m; ++rank) {
        const std::size_t at = order[rank];
        if (p_values[at] < 0.0 || p_values[at] > 1.0) {
            throw std::invalid_argument("holm_bonferroni: p-value outside [0, 1]");
        }
        double adj = std::min(1.0, static_cast<double>(m - rank) * p_values[at]);
        running = std::max(running, adj);
        adjusted[at] = running;
    }
    return adjusted;
}

inline json to_json(const WilsonInterval& w) {
    return {{"lo", w.lo}, {"hi", w.hi}, {"point", w.point}};
}

inline json to_json(const McNemarResult& r) {
    return {{"statistic", r.statistic}, {"p_value", r.p_value}, {"exact", r.exact},
            {"degenerate", r.degenerate}, {"b", r.b},           {"c", r.c}};
}

}  // namespace rgao
