#include "divsel/diversity.hpp"

#include "divsel/errors.hpp"
#include "divsel/log.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace divsel {

Orientation orientation(DiversityKind kind) noexcept {
    return kind == DiversityKind::Mirkin ? Orientation::Maximize : Orientation::Minimize;
}

std::string_view to_string(DiversityKind kind) noexcept {
    switch (kind) {
    case DiversityKind::Wallace1: return "wallace1";
    case DiversityKind::Wallace2: return "wallace2";
    case DiversityKind::FowlkesMallows: return "fm";
    case DiversityKind::Rand: return "rand";
    case DiversityKind::Jacard: return "jacard";
    case DiversityKind::Mirkin: return "mirkin";
    }
    return "unknown";
}

DiversityKind parse_diversity_kind(std::string_view name) {
    for (auto kind : kAllDiversityKinds)
        if (name == to_string(kind)) return kind;
    if (name == "jaccard") return DiversityKind::Jacard;
    if (name == "fowlkes-mallows" || name == "fowlkes_mallows") return DiversityKind::FowlkesMallows;
    throw ConfigError("unknown diversity kind '" + std::string(name) + "'");
}

std::vector<std::int64_t> ContingencyTable::row_sums() const {
    std::vector<std::int64_t> s(rows, 0);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t k = 0; k < cols; ++k) s[i] += (*this)(i, k);
    return s;
}

std::vector<std::int64_t> ContingencyTable::col_sums() const {
    std::vector<std::int64_t> s(cols, 0);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t k = 0; k < cols; ++k) s[k] += (*this)(i, k);
    return s;
}

namespace {

std::size_t label_extent(std::span<const int> labels) {
    int hi = -1;
    for (int l : labels) {
        if (l < 0) throw ShapeError("negative cluster id " + std::to_string(l));
        hi = std::max(hi, l);
    }
    return static_cast<std::size_t>(hi + 1);
}

void check_same_length(std::size_t a, std::size_t b) {
    if (a != b)
        throw ShapeError("partitions cover different point counts (" + std::to_string(a) + " vs " +
                         std::to_string(b) + ")");
}

} // namespace

ContingencyTable contingency(std::span<const int> a, std::span<const int> b) {
    check_same_length(a.size(), b.size());
    ContingencyTable t;
    t.rows = label_extent(a);
    t.cols = label_extent(b);
    t.n = static_cast<std::int64_t>(a.size());
    t.counts.assign(t.rows * t.cols, 0);
    for (std::size_t x = 0; x < a.size(); ++x)
        ++t.counts[static_cast<std::size_t>(a[x]) * t.cols + static_cast<std::size_t>(b[x])];
    return t;
}

ContingencyTable contingency(const Partition& a, const Partition& b) { return contingency(a.assignments, b.assignments); }

PairCounts pair_counts(const ContingencyTable& table) {
    PairCounts pc;
    pc.n = table.n;
    if (table.n < 2) return pc;
    const auto rows = table.row_sums();
    const auto cols = table.col_sums();
    const std::int64_t total = table.n;
    std::int64_t sum_sq = 0, c10 = 0, c01 = 0, c00 = 0;
    for (std::size_t i = 0; i < table.rows; ++i) {
        for (std::size_t k = 0; k < table.cols; ++k) {
            const std::int64_t m = table(i, k);
            if (m == 0) continue;
            sum_sq += m * m;
            c10 += m * (rows[i] - m);
            c01 += m * (cols[k] - m);
            c00 += m * (total - rows[i] - cols[k] + m);
        }
    }
    // each sum counts ordered pairs, so every one of them is even
    pc.c11 = (sum_sq - total) / 2;
    pc.c10 = c10 / 2;
    pc.c01 = c01 / 2;
    pc.c00 = c00 / 2;
    return pc;
}

PairCounts brute_force_pair_counts(std::span<const int> a, std::span<const int> b) {
    check_same_length(a.size(), b.size());
    PairCounts pc;
    pc.n = static_cast<std::int64_t>(a.size());
    for (std::size_t x = 0; x < a.size(); ++x) {
        for (std::size_t y = x + 1; y < a.size(); ++y) {
            const bool same_a = a[x] == a[y];
            const bool same_b = b[x] == b[y];
            if (same_a && same_b)
                ++pc.c11;
            else if (!same_a && !same_b)
                ++pc.c00;
            else if (same_a)
                ++pc.c10;
            else
                ++pc.c01;
        }
    }
    return pc;
}

PairCounts brute_force_pair_counts(const Partition& a, const Partition& b) {
    return brute_force_pair_counts(a.assignments, b.assignments);
}

double measure(const PairCounts& c, DiversityKind kind) {
    auto ratio = [kind](std::int64_t num, std::int64_t den) {
        if (den == 0)
            throw UndefinedMeasure(std::string(to_string(kind)) + " is undefined: zero denominator");
        return static_cast<double>(num) / static_cast<double>(den);
    };
    switch (kind) {
    case DiversityKind::Wallace1: return ratio(c.c11, c.c11 + c.c10);
    case DiversityKind::Wallace2: return ratio(c.c11, c.c11 + c.c01);
    case DiversityKind::FowlkesMallows: {
        const double w1 = ratio(c.c11, c.c11 + c.c10);
        const double w2 = ratio(c.c11, c.c11 + c.c01);
        return std::sqrt(w1 * w2);
    }
    case DiversityKind::Rand: return ratio(c.c11 + c.c00, c.total_pairs());
    case DiversityKind::Jacard: return ratio(c.c11, c.c11 + c.c01 + c.c10);
    case DiversityKind::Mirkin: return static_cast<double>(2 * (c.c10 + c.c01));
    }
    throw ConfigError("unknown diversity kind");
}

// --- matrix -----------------------------------------------------------------

DiversityMatrix::DiversityMatrix(DiversityKind kind, std::size_t size, std::int64_t n)
    : kind_(kind), size_(size), n_(n), values_(size < 2 ? 0 : size * (size - 1) / 2) {}

std::size_t DiversityMatrix::index(std::size_t i, std::size_t j) const {
    if (i >= size_ || j >= size_) throw IndexError("diversity matrix index out of range");
    if (i == j) throw IndexError("diversity matrix has no diagonal");
    if (i > j) std::swap(i, j);
    // row-major packed upper triangle
    return i * (2 * size_ - i - 1) / 2 + (j - i - 1);
}

std::optional<double> DiversityMatrix::at(std::size_t i, std::size_t j) const { return values_[index(i, j)]; }

void DiversityMatrix::set(std::size_t i, std::size_t j, std::optional<double> value) { values_[index(i, j)] = value; }

std::size_t DiversityMatrix::undefined_count() const noexcept {
    return static_cast<std::size_t>(std::count(values_.begin(), values_.end(), std::nullopt));
}

DiversityMatrix pairwise_matrix(std::span<const Partition> partitions, DiversityKind kind, kernels::Backend backend) {
    if (partitions.size() < 2) throw ConfigError("pairwise_matrix needs at least two partitions");
    std::vector<std::vector<int>> labelings;
    labelings.reserve(partitions.size());
    for (std::size_t i = 0; i < partitions.size(); ++i) {
        if (partitions[i].size() != partitions[0].size())
            throw ShapeError("partition " + std::to_string(i) + " covers " + std::to_string(partitions[i].size()) +
                             " points, partition 0 covers " + std::to_string(partitions[0].size()));
        labelings.push_back(partitions[i].assignments);
    }
    const auto counts = kernels::all_pair_counts(backend, labelings);
    DiversityMatrix m(kind, partitions.size(), static_cast<std::int64_t>(partitions[0].size()));
    std::size_t idx = 0;
    for (std::size_t i = 0; i < partitions.size(); ++i) {
        for (std::size_t j = i + 1; j < partitions.size(); ++j, ++idx) {
            try {
                m.set(i, j, measure(counts[idx], kind));
            } catch (const UndefinedMeasure&) {
                m.set(i, j, std::nullopt);
            }
        }
    }
    if (auto undefined = m.undefined_count())
        warn(std::to_string(undefined) + " of " + std::to_string(m.pair_count()) + " partition pairs have undefined " +
             std::string(to_string(kind)));
    return m;
}

double global_diversity(const DiversityMatrix& matrix, const Genome& genome, bool warn_on_undefined) {
    if (genome.size() != matrix.size())
        throw ShapeError("genome length " + std::to_string(genome.size()) + " does not match pool size " +
                         std::to_string(matrix.size()));
    const auto sel = genome.selected();
    if (sel.size() < 2) throw ConfigError("global diversity needs at least two selected subspaces");
    double sum = 0.0;
    std::size_t used = 0, skipped = 0;
    for (std::size_t a = 0; a < sel.size(); ++a) {
        for (std::size_t b = a + 1; b < sel.size(); ++b) {
            if (auto v = matrix.at(sel[a], sel[b])) {
                sum += *v;
                ++used;
            } else {
                ++skipped;
            }
        }
    }
    if (used == 0) throw UndefinedMeasure("every selected pair has an undefined measure");
    if (skipped && warn_on_undefined)
        warn("global diversity skipped " + std::to_string(skipped) + " undefined pair(s)");
    return sum / static_cast<double>(used);
}

void write_csv(const DiversityMatrix& matrix, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out.precision(17);
    for (std::size_t i = 0; i < matrix.size(); ++i) {
        for (std::size_t j = 0; j < matrix.size(); ++j) {
            if (j) out << ',';
            if (i == j) continue;
            if (auto v = matrix.at(i, j))
                out << *v;
            else
                out << "NA";
        }
        out << '\n';
    }
}

DiversityMatrix read_matrix_csv(const std::filesystem::path& path, DiversityKind kind, std::int64_t n) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::vector<std::string>> cells;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::vector<std::string> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(cell);
        if (!line.empty() && line.back() == ',') row.emplace_back();
        cells.push_back(std::move(row));
    }
    const std::size_t p = cells.size();
    DiversityMatrix m(kind, p, n);
    for (std::size_t i = 0; i < p; ++i) {
        if (cells[i].size() != p) throw SchemaError("diversity matrix row has wrong width", i + 1, cells[i].size());
        if (!cells[i][i].empty()) throw SchemaError("diversity matrix diagonal must be blank", i + 1, i);
        for (std::size_t j = i + 1; j < p; ++j) {
            const auto& c = cells[i][j];
            if (c == "NA") continue;
            try {
                m.set(i, j, std::stod(c));
            } catch (const std::exception&) {
                throw SchemaError("cannot parse diversity value '" + c + "'", i + 1, j);
            }
        }
    }
    return m;
}

} // namespace divsel
