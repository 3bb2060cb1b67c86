#include "divsel/kernels.hpp"

#include "divsel/diversity.hpp"
#include "divsel/errors.hpp"

#include <exception>

namespace divsel::kernels::omp {

void assign_nearest(const Matrix& points, const Matrix& centroids, std::span<int> labels, std::span<double> dist2) {
    if (centroids.rows() == 0) throw ConfigError("no centroids");
    if (centroids.cols() != points.cols()) throw ShapeError("centroid dimension does not match data");
    if (labels.size() != points.rows() || dist2.size() != points.rows()) throw ShapeError("output span size mismatch");
    const auto n = static_cast<std::ptrdiff_t>(points.rows());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto u = static_cast<std::size_t>(i);
        detail::nearest_one(points, centroids, u, labels[u], dist2[u]);
    }
}

std::vector<PairCounts> all_pair_counts(std::span<const std::vector<int>> labelings) {
    const std::size_t p = labelings.size();
    const std::size_t pairs = p < 2 ? 0 : p * (p - 1) / 2;
    std::vector<PairCounts> out(pairs);
    std::vector<std::exception_ptr> errors(pairs);
#pragma omp parallel for schedule(dynamic, 4)
    for (std::ptrdiff_t idx = 0; idx < static_cast<std::ptrdiff_t>(pairs); ++idx) {
        const auto u = static_cast<std::size_t>(idx);
        const auto [i, j] = detail::unpack_pair(u, p);
        try {
            out[u] = pair_counts(contingency(labelings[i], labelings[j]));
        } catch (...) {
            errors[u] = std::current_exception();
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

void knn_predict(const Matrix& train, std::span<const int> train_labels, int class_count, std::size_t k,
                 const Matrix& queries, std::span<int> out) {
    if (out.size() != queries.rows()) throw ShapeError("output span size mismatch");
    const auto n = static_cast<std::ptrdiff_t>(queries.rows());
#pragma omp parallel
    {
        std::vector<std::pair<double, std::size_t>> scratch;
        std::vector<std::size_t> votes;
#pragma omp for schedule(static)
        for (std::ptrdiff_t q = 0; q < n; ++q) {
            const auto u = static_cast<std::size_t>(q);
            out[u] = detail::knn_one(train, train_labels, class_count, k, queries.row(u), scratch, votes);
        }
    }
}

void for_each_index(std::size_t n, const std::function<void(std::size_t)>& fn) {
    std::vector<std::exception_ptr> errors(n);
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
        const auto u = static_cast<std::size_t>(i);
        try {
            fn(u);
        } catch (...) {
            errors[u] = std::current_exception();
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

} // namespace divsel::kernels::omp
