#include "divsel/stats.hpp"

#include "divsel/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace divsel {

Summary summarize(std::span<const double> values) {
    if (values.empty()) throw ConfigError("statistics of an empty sample");
    Summary s;
    s.n = values.size();
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(s.n);
    if (s.n > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.stddev = std::sqrt(ss / static_cast<double>(s.n - 1));
    }
    return s;
}

SignedRankResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ShapeError("paired samples differ in length");
    std::vector<double> d;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] != b[i]) d.push_back(a[i] - b[i]);
    SignedRankResult r;
    r.n_used = d.size();
    if (d.empty()) return r;

    std::vector<std::size_t> order(d.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto x, auto y) { return std::abs(d[x]) < std::abs(d[y]); });
    std::vector<double> rank(d.size());
    double tie_term = 0.0;
    bool ties = false;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && std::abs(d[order[j + 1]]) == std::abs(d[order[i]])) ++j;
        const double avg = (static_cast<double>(i + j) + 2.0) / 2.0;
        for (std::size_t t = i; t <= j; ++t) rank[order[t]] = avg;
        const double t = static_cast<double>(j - i + 1);
        if (t > 1) {
            ties = true;
            tie_term += t * t * t - t;
        }
        i = j + 1;
    }
    for (std::size_t i = 0; i < d.size(); ++i)
        if (d[i] > 0) r.statistic += rank[i];

    const std::size_t n = d.size();
    const double nn = static_cast<double>(n);
    if (!ties && n <= 50) {
        // counts of subsets of {1..n} by rank sum
        const std::size_t max_sum = n * (n + 1) / 2;
        std::vector<double> ways(max_sum + 1, 0.0);
        ways[0] = 1.0;
        for (std::size_t k = 1; k <= n; ++k)
            for (std::size_t s = max_sum; s >= k; --s) ways[s] += ways[s - k];
        const auto w = static_cast<std::size_t>(std::llround(r.statistic));
        const std::size_t lo = std::min(w, max_sum - w);
        double tail = 0.0;
        for (std::size_t s = 0; s <= lo; ++s) tail += ways[s];
        r.p_value = std::min(1.0, 2.0 * tail / std::ldexp(1.0, static_cast<int>(n)));
        r.exact = true;
        return r;
    }
    const double mean = nn * (nn + 1) / 4.0;
    const double var = nn * (nn + 1) * (2 * nn + 1) / 24.0 - tie_term / 48.0;
    if (var <= 0.0) return r;
    const double diff = std::abs(r.statistic - mean);
    const double z = std::max(0.0, diff - 0.5) / std::sqrt(var);
    r.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
    return r;
}

} // namespace divsel
