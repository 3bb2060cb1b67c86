#include "divsel/dataset.hpp"

#include "divsel/errors.hpp"
#include "divsel/rng.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace divsel {

const char* to_string(SplitTag tag) {
    switch (tag) {
    case SplitTag::Whole: return "whole";
    case SplitTag::Training: return "training";
    case SplitTag::Optimization: return "optimization";
    case SplitTag::ArchiveValidation: return "archive_validation";
    case SplitTag::Evaluation: return "evaluation";
    case SplitTag::Test: return "test";
    }
    return "unknown";
}

void Dataset::validate() const {
    if (samples.rows() == 0 || samples.cols() == 0) throw ConfigError("dataset must have at least one row and one feature");
    if (labels.size() != samples.rows()) throw ConfigError("label count does not match row count");
    if (!feature_names.empty() && feature_names.size() != samples.cols())
        throw ConfigError("feature name count does not match column count");
    if (class_count < 1) throw ConfigError("class_count must be positive");
    for (int l : labels)
        if (l < 0 || l >= class_count) throw ConfigError("label " + std::to_string(l) + " outside [0, class_count)");
}

Dataset select_rows(const Dataset& d, std::span<const std::size_t> rows, SplitTag tag) {
    Dataset out;
    out.samples = Matrix(rows.size(), d.feature_count());
    out.labels.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= d.size()) throw IndexError("row " + std::to_string(rows[i]) + " out of range");
        auto src = d.samples.row(rows[i]);
        std::copy(src.begin(), src.end(), out.samples.row(i).begin());
        out.labels.push_back(d.labels[rows[i]]);
    }
    out.feature_names = d.feature_names;
    out.class_count = d.class_count;
    out.class_names = d.class_names;
    out.tag = tag;
    return out;
}

Dataset concat_rows(const Dataset& a, const Dataset& b, SplitTag tag) {
    if (a.feature_count() != b.feature_count() || a.class_count != b.class_count)
        throw ShapeError("cannot concatenate data sets with different features or classes");
    Dataset out;
    out.samples = Matrix(a.size() + b.size(), a.feature_count());
    auto dst = out.samples.data();
    std::copy(a.samples.data().begin(), a.samples.data().end(), dst.begin());
    std::copy(b.samples.data().begin(), b.samples.data().end(), dst.begin() + static_cast<std::ptrdiff_t>(a.samples.data().size()));
    out.labels = a.labels;
    out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
    out.feature_names = a.feature_names;
    out.class_count = a.class_count;
    out.class_names = a.class_names;
    out.tag = tag;
    return out;
}

std::uint64_t content_hash(const Dataset& d) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](const void* p, std::size_t n) {
        auto bytes = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= bytes[i];
            h *= 0x100000001b3ULL;
        }
    };
    const std::uint64_t shape[3] = {d.samples.rows(), d.samples.cols(), static_cast<std::uint64_t>(d.class_count)};
    mix(shape, sizeof shape);
    mix(d.samples.data().data(), d.samples.data().size_bytes());
    mix(d.labels.data(), d.labels.size() * sizeof(int));
    return h;
}

// --- CSV ------------------------------------------------------------------

namespace {

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    std::string out(s.substr(b, e - b + 1));
    if (out.size() >= 2 && out.front() == '"' && out.back() == '"') out = out.substr(1, out.size() - 2);
    return out;
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(',', start);
        cells.push_back(trim(std::string_view(line).substr(start, pos == std::string::npos ? std::string::npos : pos - start)));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return cells;
}

bool is_missing(const std::string& cell) {
    return cell.empty() || cell == "?" || cell == "NA" || cell == "NaN" || cell == "nan";
}

bool all_digits(const std::string& s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
}

} // namespace

ColumnRef parse_column_ref(std::string_view text) {
    if (!text.empty() && std::all_of(text.begin(), text.end(), [](unsigned char ch) { return std::isdigit(ch); }))
        return static_cast<std::size_t>(std::stoull(std::string(text)));
    return std::string(text);
}

Dataset load_csv(const std::filesystem::path& path, const ColumnRef& label_column) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());

    std::string line;
    if (!std::getline(in, line)) throw SchemaError("missing header row in " + path.string(), 0, 0);
    if (line.size() >= 3 && std::memcmp(line.data(), "\xEF\xBB\xBF", 3) == 0) line.erase(0, 3);
    const auto header = split_line(line);

    std::size_t label_index = header.size();
    if (const auto* name = std::get_if<std::string>(&label_column)) {
        auto it = std::find(header.begin(), header.end(), *name);
        if (it != header.end())
            label_index = static_cast<std::size_t>(it - header.begin());
        else if (all_digits(*name))
            label_index = std::stoul(*name);
    } else {
        label_index = std::get<std::size_t>(label_column);
    }
    if (label_index >= header.size()) throw SchemaError("label column not found in header", 0, label_index);

    std::vector<double> values;
    std::vector<std::string> label_text;
    const std::size_t width = header.size();
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        ++row;
        auto cells = split_line(line);
        if (cells.size() != width)
            throw SchemaError("expected " + std::to_string(width) + " cells, found " + std::to_string(cells.size()), row,
                              std::min(cells.size(), width));
        for (std::size_t c = 0; c < width; ++c) {
            const auto& cell = cells[c];
            if (is_missing(cell)) throw SchemaError("missing value", row, c);
            if (c == label_index) {
                label_text.push_back(cell);
                continue;
            }
            double v = 0.0;
            auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (ec != std::errc{} || ptr != cell.data() + cell.size() || !std::isfinite(v))
                throw SchemaError("cannot parse '" + cell + "' as a real number", row, c);
            values.push_back(v);
        }
    }
    if (row == 0) throw SchemaError("no data rows in " + path.string(), 0, 0);

    Dataset d;
    d.samples = Matrix(row, width - 1);
    std::copy(values.begin(), values.end(), d.samples.data().begin());
    for (std::size_t c = 0; c < width; ++c)
        if (c != label_index) d.feature_names.push_back(header[c]);

    std::map<std::string, int> ids;
    for (const auto& t : label_text) ids.emplace(t, 0);
    int next = 0;
    for (auto& [text, id] : ids) {
        id = next++;
        d.class_names.push_back(text);
    }
    d.class_count = next;
    d.labels.reserve(label_text.size());
    for (const auto& t : label_text) d.labels.push_back(ids.at(t));
    d.validate();
    return d;
}

void write_csv(const Dataset& d, const std::filesystem::path& path, const std::string& label_name) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out.precision(17);
    for (std::size_t c = 0; c < d.feature_count(); ++c)
        out << (c < d.feature_names.size() ? d.feature_names[c] : "f" + std::to_string(c)) << ',';
    out << label_name << '\n';
    for (std::size_t r = 0; r < d.size(); ++r) {
        for (double v : d.samples.row(r)) out << v << ',';
        const int l = d.labels[r];
        if (static_cast<std::size_t>(l) < d.class_names.size())
            out << d.class_names[static_cast<std::size_t>(l)];
        else
            out << l;
        out << '\n';
    }
    if (!out) throw IoError("write failed for " + path.string());
}

// --- splitting ------------------------------------------------------------

namespace {

// Integer apportionment of each class across parts of exact sizes `sizes`.
// Every cell ends up at floor or ceil of class_size * part_size / N.
std::vector<std::vector<std::size_t>> apportion(const std::vector<std::size_t>& class_sizes,
                                                const std::vector<std::size_t>& sizes) {
    const std::size_t total = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
    const std::size_t nc = class_sizes.size(), np = sizes.size();
    std::vector<std::vector<std::size_t>> alloc(nc, std::vector<std::size_t>(np));
    std::vector<std::vector<std::size_t>> rem(nc, std::vector<std::size_t>(np));
    std::vector<std::size_t> row_left(nc), col_left(sizes);
    for (std::size_t c = 0; c < nc; ++c) {
        std::size_t used = 0;
        for (std::size_t p = 0; p < np; ++p) {
            const std::size_t prod = class_sizes[c] * sizes[p];
            alloc[c][p] = prod / total;
            rem[c][p] = prod % total;
            used += alloc[c][p];
            col_left[p] -= alloc[c][p];
        }
        row_left[c] = class_sizes[c] - used;
    }
    // Distribute the leftover units; largest-remaining-column greedy always
    // completes a 0/1 table with feasible margins.
    std::vector<std::size_t> order(nc);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return row_left[a] > row_left[b]; });
    for (auto c : order) {
        std::vector<std::size_t> parts(np);
        std::iota(parts.begin(), parts.end(), 0);
        std::stable_sort(parts.begin(), parts.end(), [&](auto a, auto b) {
            if (col_left[a] != col_left[b]) return col_left[a] > col_left[b];
            return rem[c][a] > rem[c][b];
        });
        for (std::size_t j = 0; j < row_left[c]; ++j) {
            const auto p = parts[j];
            if (col_left[p] == 0) throw ConfigError("internal: stratified apportionment failed");
            ++alloc[c][p];
            --col_left[p];
        }
    }
    return alloc;
}

std::vector<std::vector<std::size_t>> stratified_parts(const Dataset& d, const std::vector<std::size_t>& sizes,
                                                       std::uint64_t seed) {
    const std::size_t n = d.size();
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(seed);
    std::shuffle(perm.begin(), perm.end(), rng);

    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(d.class_count));
    for (std::size_t pos = 0; pos < n; ++pos) by_class[static_cast<std::size_t>(d.labels[perm[pos]])].push_back(pos);
    std::vector<std::size_t> class_sizes;
    for (const auto& rows : by_class) class_sizes.push_back(rows.size());

    const auto alloc = apportion(class_sizes, sizes);
    std::vector<std::vector<std::size_t>> positions(sizes.size());
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        std::size_t cursor = 0;
        for (std::size_t p = 0; p < sizes.size(); ++p)
            for (std::size_t j = 0; j < alloc[c][p]; ++j) positions[p].push_back(by_class[c][cursor++]);
    }
    std::vector<std::vector<std::size_t>> parts(sizes.size());
    for (std::size_t p = 0; p < sizes.size(); ++p) {
        std::sort(positions[p].begin(), positions[p].end());
        for (auto pos : positions[p]) parts[p].push_back(perm[pos]);
    }
    return parts;
}

} // namespace

SplitSet split(const Dataset& training, const Fractions& fractions, std::uint64_t seed) {
    double sum = 0.0;
    for (double f : fractions) {
        if (!(f >= 0.0)) throw ConfigError("split fractions must be nonnegative");
        sum += f;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
    const std::size_t n = training.size();
    const auto n_arch = static_cast<std::size_t>(std::floor(fractions[1] * static_cast<double>(n)));
    const auto n_eval = static_cast<std::size_t>(std::floor(fractions[2] * static_cast<double>(n)));
    if (n_arch + n_eval > n) throw ConfigError("split fractions exceed dataset size");
    const std::size_t n_opt = n - n_arch - n_eval;
    if (n_opt == 0 || n_arch == 0 || n_eval == 0)
        throw ConfigError("split would leave a part empty (N=" + std::to_string(n) + ")");

    const auto parts = stratified_parts(training, {n_opt, n_arch, n_eval}, seed);
    SplitSet s;
    s.optimization = select_rows(training, parts[0], SplitTag::Optimization);
    s.archive_validation = select_rows(training, parts[1], SplitTag::ArchiveValidation);
    s.evaluation = select_rows(training, parts[2], SplitTag::Evaluation);
    s.training = training;
    s.training.tag = SplitTag::Training;
    s.test.feature_names = training.feature_names;
    s.test.class_count = training.class_count;
    s.test.class_names = training.class_names;
    s.test.samples = Matrix(0, training.feature_count());
    s.test.tag = SplitTag::Test;
    return s;
}

SplitSet split(const Dataset& training, const Dataset& test, const Fractions& fractions, std::uint64_t seed) {
    if (test.feature_count() != training.feature_count())
        throw ConfigError("test set has " + std::to_string(test.feature_count()) + " features, training set has " +
                          std::to_string(training.feature_count()));
    auto s = split(training, fractions, seed);
    s.test = test;
    s.test.tag = SplitTag::Test;
    return s;
}

std::pair<Dataset, Dataset> holdout(const Dataset& d, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("test fraction must lie in (0, 1)");
    const auto n_test = static_cast<std::size_t>(std::floor(test_fraction * static_cast<double>(d.size())));
    if (n_test == 0 || n_test >= d.size()) throw ConfigError("holdout would leave a part empty");
    const auto parts = stratified_parts(d, {d.size() - n_test, n_test}, seed);
    return {select_rows(d, parts[0], SplitTag::Training), select_rows(d, parts[1], SplitTag::Test)};
}

// --- synthetic data ---------------------------------------------------------

Dataset generate_synthetic(std::size_t n, std::size_t f, int classes, std::uint64_t seed,
                           const SyntheticOptions& options) {
    if (classes < 2 || n < static_cast<std::size_t>(classes) || f < 1)
        throw ConfigError("synthetic data needs n >= classes >= 2 and f >= 1");
    if (!(options.stddev >= 0.0)) throw ConfigError("stddev must be nonnegative");
    Rng rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    Dataset d;
    d.samples = Matrix(n, f);
    d.class_count = classes;
    for (std::size_t j = 0; j < f; ++j) d.feature_names.push_back("f" + std::to_string(j));
    for (int c = 0; c < classes; ++c) d.class_names.push_back("c" + std::to_string(c));
    for (std::size_t i = 0; i < n; ++i) {
        const int c = static_cast<int>(i % static_cast<std::size_t>(classes));
        d.labels.push_back(c);
        for (std::size_t j = 0; j < f; ++j) d.samples(i, j) = c * options.separation + options.stddev * noise(rng);
    }
    return d;
}

Dataset generate_pima_style(std::uint64_t seed) {
    struct Feature {
        const char* name;
        double mean[2];
        double sd[2];
    };
    static constexpr Feature features[] = {
        {"pregnancies", {3.30, 4.87}, {3.02, 3.74}},   {"glucose", {109.98, 141.26}, {26.14, 31.94}},
        {"blood_pressure", {68.18, 70.82}, {18.06, 21.49}}, {"skin_thickness", {19.66, 22.16}, {14.89, 17.68}},
        {"insulin", {68.79, 100.34}, {98.87, 138.69}}, {"bmi", {30.30, 35.14}, {7.69, 7.26}},
        {"pedigree", {0.430, 0.551}, {0.299, 0.372}},   {"age", {31.19, 37.07}, {11.67, 10.97}},
    };
    constexpr std::size_t negatives = 500, positives = 268;
    Rng rng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    Dataset d;
    d.samples = Matrix(negatives + positives, std::size(features));
    d.class_count = 2;
    d.class_names = {"0", "1"};
    for (const auto& f : features) d.feature_names.emplace_back(f.name);
    for (std::size_t i = 0; i < negatives + positives; ++i) {
        const int c = i < negatives ? 0 : 1;
        d.labels.push_back(c);
        for (std::size_t j = 0; j < std::size(features); ++j)
            d.samples(i, j) = std::max(0.0, features[j].mean[c] + features[j].sd[c] * z(rng));
    }
    return d;
}

} // namespace divsel
