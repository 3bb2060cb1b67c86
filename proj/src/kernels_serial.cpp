#include "divsel/kernels.hpp"

#include "divsel/diversity.hpp"
#include "divsel/errors.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <limits>
#include <string_view>

namespace divsel::kernels {

namespace {

Backend initial_backend() {
    const char* env = std::getenv("DIVSEL_BACKEND");
    if (env && std::string_view(env) == "serial") return Backend::Serial;
    return Backend::OpenMP;
}

std::atomic<Backend>& backend_slot() {
    static std::atomic<Backend> b{initial_backend()};
    return b;
}

void check_assign_shapes(const Matrix& points, const Matrix& centroids, std::span<int> labels,
                         std::span<double> dist2) {
    if (centroids.rows() == 0) throw ConfigError("no centroids");
    if (centroids.cols() != points.cols()) throw ShapeError("centroid dimension does not match data");
    if (labels.size() != points.rows() || dist2.size() != points.rows()) throw ShapeError("output span size mismatch");
}

} // namespace

Backend default_backend() { return backend_slot().load(); }
void set_default_backend(Backend backend) { backend_slot().store(backend); }

namespace detail {

void nearest_one(const Matrix& points, const Matrix& centroids, std::size_t i, int& label, double& dist2) {
    const auto x = points.row(i);
    double best = std::numeric_limits<double>::infinity();
    int arg = 0;
    for (std::size_t c = 0; c < centroids.rows(); ++c) {
        const auto mu = centroids.row(c);
        double d = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) {
            const double diff = x[j] - mu[j];
            d += diff * diff;
        }
        if (d < best) {
            best = d;
            arg = static_cast<int>(c);
        }
    }
    label = arg;
    dist2 = best;
}

int knn_one(const Matrix& train, std::span<const int> train_labels, int class_count, std::size_t k,
            std::span<const double> query, std::vector<std::pair<double, std::size_t>>& scratch,
            std::vector<std::size_t>& votes) {
    scratch.clear();
    for (std::size_t t = 0; t < train.rows(); ++t) {
        const auto x = train.row(t);
        double d = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) {
            const double diff = x[j] - query[j];
            d += diff * diff;
        }
        scratch.emplace_back(d, t);
    }
    const std::size_t kk = std::min(k, scratch.size());
    std::partial_sort(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(kk), scratch.end());
    votes.assign(static_cast<std::size_t>(class_count), 0);
    for (std::size_t i = 0; i < kk; ++i) ++votes[static_cast<std::size_t>(train_labels[scratch[i].second])];
    return static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin());
}

std::pair<std::size_t, std::size_t> unpack_pair(std::size_t index, std::size_t count) {
    std::size_t i = 0;
    std::size_t row_len = count - 1;
    while (index >= row_len) {
        index -= row_len;
        ++i;
        --row_len;
    }
    return {i, i + 1 + index};
}

} // namespace detail

namespace serial {

void assign_nearest(const Matrix& points, const Matrix& centroids, std::span<int> labels, std::span<double> dist2) {
    check_assign_shapes(points, centroids, labels, dist2);
    for (std::size_t i = 0; i < points.rows(); ++i) detail::nearest_one(points, centroids, i, labels[i], dist2[i]);
}

std::vector<PairCounts> all_pair_counts(std::span<const std::vector<int>> labelings) {
    const std::size_t p = labelings.size();
    std::vector<PairCounts> out;
    out.reserve(p < 2 ? 0 : p * (p - 1) / 2);
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = i + 1; j < p; ++j) out.push_back(pair_counts(contingency(labelings[i], labelings[j])));
    return out;
}

void knn_predict(const Matrix& train, std::span<const int> train_labels, int class_count, std::size_t k,
                 const Matrix& queries, std::span<int> out) {
    if (out.size() != queries.rows()) throw ShapeError("output span size mismatch");
    std::vector<std::pair<double, std::size_t>> scratch;
    std::vector<std::size_t> votes;
    for (std::size_t q = 0; q < queries.rows(); ++q)
        out[q] = detail::knn_one(train, train_labels, class_count, k, queries.row(q), scratch, votes);
}

void for_each_index(std::size_t n, const std::function<void(std::size_t)>& fn) {
    std::exception_ptr first;
    for (std::size_t i = 0; i < n; ++i) {
        try {
            fn(i);
        } catch (...) {
            if (!first) first = std::current_exception();
        }
    }
    if (first) std::rethrow_exception(first);
}

} // namespace serial

void assign_nearest(Backend backend, const Matrix& points, const Matrix& centroids, std::span<int> labels,
                    std::span<double> dist2) {
    backend == Backend::Serial ? serial::assign_nearest(points, centroids, labels, dist2)
                               : omp::assign_nearest(points, centroids, labels, dist2);
}

std::vector<PairCounts> all_pair_counts(Backend backend, std::span<const std::vector<int>> labelings) {
    return backend == Backend::Serial ? serial::all_pair_counts(labelings) : omp::all_pair_counts(labelings);
}

void knn_predict(Backend backend, const Matrix& train, std::span<const int> train_labels, int class_count,
                 std::size_t k, const Matrix& queries, std::span<int> out) {
    backend == Backend::Serial ? serial::knn_predict(train, train_labels, class_count, k, queries, out)
                               : omp::knn_predict(train, train_labels, class_count, k, queries, out);
}

void for_each_index(Backend backend, std::size_t n, const std::function<void(std::size_t)>& fn) {
    backend == Backend::Serial ? serial::for_each_index(n, fn) : omp::for_each_index(n, fn);
}

} // namespace divsel::kernels
