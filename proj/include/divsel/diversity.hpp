#pragma once

#include "divsel/clustering.hpp"
#include "divsel/kernels.hpp"
#include "divsel/subspace.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace divsel {

/// counts(i, k) = number of points in cluster i of the first partition and
/// cluster k of the second.
struct ContingencyTable {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::int64_t> counts;
    std::int64_t n = 0;

    std::int64_t operator()(std::size_t i, std::size_t k) const { return counts[i * cols + k]; }
    std::vector<std::int64_t> row_sums() const;
    std::vector<std::int64_t> col_sums() const;
};

/// Point-pair relationships between two partitions:
///   c11  same cluster in both
///   c00  different clusters in both
///   c10  same cluster in the first only
///   c01  same cluster in the second only
struct PairCounts {
    std::int64_t c11 = 0;
    std::int64_t c00 = 0;
    std::int64_t c10 = 0;
    std::int64_t c01 = 0;
    std::int64_t n = 0;

    std::int64_t total_pairs() const noexcept { return n < 2 ? 0 : n * (n - 1) / 2; }
    bool operator==(const PairCounts&) const = default;
};

enum class DiversityKind { Wallace1, Wallace2, FowlkesMallows, Rand, Jacard, Mirkin };
enum class Orientation { Minimize, Maximize };

inline constexpr DiversityKind kAllDiversityKinds[] = {DiversityKind::Wallace1, DiversityKind::Wallace2,
                                                       DiversityKind::FowlkesMallows, DiversityKind::Rand,
                                                       DiversityKind::Jacard, DiversityKind::Mirkin};

/// The similarity indices are minimized to favour diverse subspaces; the
/// Mirkin distance is maximized.
Orientation orientation(DiversityKind kind) noexcept;
std::string_view to_string(DiversityKind kind) noexcept;
/// Accepts wallace1, wallace2, fm, rand, jacard (or jaccard), mirkin.
DiversityKind parse_diversity_kind(std::string_view name);

ContingencyTable contingency(std::span<const int> a, std::span<const int> b);
ContingencyTable contingency(const Partition& a, const Partition& b);

/// Closed forms over the table cells, marginals and N; O(I*K).
PairCounts pair_counts(const ContingencyTable& table);

/// O(N^2) enumeration of every point pair. Test oracle for pair_counts.
PairCounts brute_force_pair_counts(std::span<const int> a, std::span<const int> b);
PairCounts brute_force_pair_counts(const Partition& a, const Partition& b);

/// Throws UndefinedMeasure on a zero denominator.
double measure(const PairCounts& counts, DiversityKind kind);

/// Symmetric pool x pool diversity values, upper triangle only. Pairs whose
/// measure is undefined are stored as empty. There is no diagonal.
class DiversityMatrix {
public:
    DiversityMatrix() = default;
    DiversityMatrix(DiversityKind kind, std::size_t size, std::int64_t n);

    DiversityKind kind() const noexcept { return kind_; }
    std::size_t size() const noexcept { return size_; }
    std::int64_t points() const noexcept { return n_; }

    /// Value of pair (i, j) in either order; IndexError for i == j or out-of-range.
    std::optional<double> at(std::size_t i, std::size_t j) const;
    void set(std::size_t i, std::size_t j, std::optional<double> value);

    std::size_t pair_count() const noexcept { return values_.size(); }
    std::size_t undefined_count() const noexcept;
    bool operator==(const DiversityMatrix&) const = default;

private:
    std::size_t index(std::size_t i, std::size_t j) const;

    DiversityKind kind_ = DiversityKind::Rand;
    std::size_t size_ = 0;
    std::int64_t n_ = 0;
    std::vector<std::optional<double>> values_;
};

DiversityMatrix pairwise_matrix(std::span<const Partition> partitions, DiversityKind kind,
                                kernels::Backend backend = kernels::default_backend());

/// Mean diversity over every selected pair i < j. Undefined pairs are
/// left out of the mean (with a warning unless `warn_on_undefined` is false).
double global_diversity(const DiversityMatrix& matrix, const Genome& genome, bool warn_on_undefined = true);

/// P x P CSV without a header; the diagonal is blank and undefined pairs are "NA".
void write_csv(const DiversityMatrix& matrix, const std::filesystem::path& path);
DiversityMatrix read_matrix_csv(const std::filesystem::path& path, DiversityKind kind, std::int64_t n);

} // namespace divsel
