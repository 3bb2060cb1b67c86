#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace divsel {

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::span<const double> data() const noexcept { return data_; }
    std::span<double> data() noexcept { return data_; }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Which portion of the data a Dataset was carved from. Carried through
/// projections so pipelines can prove the test rows never fed the search.
enum class SplitTag { Whole, Training, Optimization, ArchiveValidation, Evaluation, Test };

const char* to_string(SplitTag tag);

struct Dataset {
    Matrix samples;
    std::vector<int> labels;
    std::vector<std::string> feature_names;
    int class_count = 0;
    /// Original label text for each class id, when loaded from a file.
    std::vector<std::string> class_names;
    SplitTag tag = SplitTag::Whole;

    std::size_t size() const noexcept { return samples.rows(); }
    std::size_t feature_count() const noexcept { return samples.cols(); }

    /// Checks the label range and shape invariants; throws ConfigError.
    void validate() const;

    bool operator==(const Dataset&) const = default;
};

/// Rows `rows` of `d`, in the given order.
Dataset select_rows(const Dataset& d, std::span<const std::size_t> rows, SplitTag tag);
/// Rows of `a` followed by rows of `b`; both must share features and classes.
Dataset concat_rows(const Dataset& a, const Dataset& b, SplitTag tag);

/// Content hash (shape, values, labels); used to key caches.
std::uint64_t content_hash(const Dataset& d);

struct SplitSet {
    Dataset optimization;
    Dataset archive_validation;
    Dataset evaluation;
    Dataset training;
    Dataset test;
};

using Fractions = std::array<double, 3>;
inline constexpr Fractions kDefaultFractions{0.70, 0.15, 0.15};

using ColumnRef = std::variant<std::string, std::size_t>;
/// All-digit text is a 0-based column index, anything else a column name.
ColumnRef parse_column_ref(std::string_view text);

/// Reads a headed CSV. Labels are remapped to 0..class_count-1 ordered
/// lexicographically by their text. Empty, "?", "NA" and "NaN" cells count
/// as missing and reject the file.
Dataset load_csv(const std::filesystem::path& path, const ColumnRef& label_column);

/// Writes `d` as CSV with the label (class name when known) in a trailing
/// `label_name` column.
void write_csv(const Dataset& d, const std::filesystem::path& path, const std::string& label_name = "class");

/// Stratified, seeded three-way split of a training set. Part sizes are
/// floor(fraction * N) for the second and third parts; the remainder goes to
/// the optimization part. `test` is left empty.
SplitSet split(const Dataset& training, const Fractions& fractions, std::uint64_t seed);

/// Same, with a separately supplied test set.
SplitSet split(const Dataset& training, const Dataset& test, const Fractions& fractions, std::uint64_t seed);

/// Stratified two-way holdout; returns {train, test} with
/// floor(test_fraction * N) test rows.
std::pair<Dataset, Dataset> holdout(const Dataset& d, double test_fraction, std::uint64_t seed);

struct SyntheticOptions {
    double separation = 10.0; ///< distance between consecutive class means, per feature
    double stddev = 0.1;
};

/// Gaussian class blobs: class c has mean c * separation on every feature.
/// Row i belongs to class i % classes.
Dataset generate_synthetic(std::size_t n, std::size_t f, int classes, std::uint64_t seed,
                           const SyntheticOptions& options = {});

/// 768 x 8 two-class data drawn from class-conditional Gaussians whose
/// per-feature means and spreads follow the published summary statistics of
/// the Pima Indians diabetes data (500 negatives, 268 positives, values
/// clipped at zero, raw unscaled units).
Dataset generate_pima_style(std::uint64_t seed);

} // namespace divsel
