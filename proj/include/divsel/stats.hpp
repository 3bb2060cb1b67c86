#pragma once

#include <cstddef>
#include <span>
#include <string_view>

namespace divsel {

struct Summary {
    std::size_t n = 0;
    double mean = 0.0;
    double stddev = 0.0; ///< sample standard deviation, 0 when n < 2
};

/// Throws ConfigError on an empty sample.
Summary summarize(std::span<const double> values);

struct SignedRankResult {
    std::size_t n_used = 0; ///< pairs with a nonzero difference
    double statistic = 0.0; ///< W+, sum of ranks of positive differences
    double p_value = 1.0;   ///< two-sided
    bool exact = false;
};

inline constexpr std::string_view kSignedRankTestName = "wilcoxon-signed-rank";

/// Paired two-sided test on a - b. Zero differences are dropped; the exact
/// null distribution is used for up to 50 untied pairs, otherwise the normal
/// approximation with tie and continuity corrections.
SignedRankResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b);

} // namespace divsel
