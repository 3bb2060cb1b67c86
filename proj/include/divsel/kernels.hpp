#pragma once

// Data-parallel inner loops. Every kernel has a serial reference
// implementation and an OpenMP implementation that must produce bit-identical
// results; tests compare the two and bench/ times them.

#include "divsel/dataset.hpp"

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace divsel {
struct PairCounts;
}

namespace divsel::kernels {

enum class Backend { Serial, OpenMP };

/// OpenMP unless overridden with set_default_backend or DIVSEL_BACKEND=serial.
Backend default_backend();
void set_default_backend(Backend backend);

/// Nearest centroid (squared Euclidean, ties to the lowest centroid index)
/// for every row of `points`; writes the label and the squared distance.
void assign_nearest(Backend backend, const Matrix& points, const Matrix& centroids, std::span<int> labels,
                    std::span<double> dist2);

/// Pair counts of every unordered labeling pair (i < j), packed row-major
/// over the upper triangle: (0,1), (0,2), ..., (1,2), ...
std::vector<PairCounts> all_pair_counts(Backend backend, std::span<const std::vector<int>> labelings);

/// K-nearest-neighbour majority labels for every query row. Neighbour ties
/// go to the lower training index, vote ties to the smaller class id.
void knn_predict(Backend backend, const Matrix& train, std::span<const int> train_labels, int class_count,
                 std::size_t k, const Matrix& queries, std::span<int> out);

/// Runs fn(i) for i in [0, n). If any call throws, the exception of the
/// lowest failing index is rethrown after all calls finish.
void for_each_index(Backend backend, std::size_t n, const std::function<void(std::size_t)>& fn);

namespace serial {
void assign_nearest(const Matrix& points, const Matrix& centroids, std::span<int> labels, std::span<double> dist2);
std::vector<PairCounts> all_pair_counts(std::span<const std::vector<int>> labelings);
void knn_predict(const Matrix& train, std::span<const int> train_labels, int class_count, std::size_t k,
                 const Matrix& queries, std::span<int> out);
void for_each_index(std::size_t n, const std::function<void(std::size_t)>& fn);
} // namespace serial

namespace omp {
void assign_nearest(const Matrix& points, const Matrix& centroids, std::span<int> labels, std::span<double> dist2);
std::vector<PairCounts> all_pair_counts(std::span<const std::vector<int>> labelings);
void knn_predict(const Matrix& train, std::span<const int> train_labels, int class_count, std::size_t k,
                 const Matrix& queries, std::span<int> out);
void for_each_index(std::size_t n, const std::function<void(std::size_t)>& fn);
} // namespace omp

namespace detail {
// Shared per-item bodies so both backends run the same arithmetic.
void nearest_one(const Matrix& points, const Matrix& centroids, std::size_t i, int& label, double& dist2);
int knn_one(const Matrix& train, std::span<const int> train_labels, int class_count, std::size_t k,
            std::span<const double> query, std::vector<std::pair<double, std::size_t>>& scratch,
            std::vector<std::size_t>& votes);
std::pair<std::size_t, std::size_t> unpack_pair(std::size_t index, std::size_t count);
} // namespace detail

} // namespace divsel::kernels
