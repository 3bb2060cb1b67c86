#include "divsel/clustering.hpp"

#include "divsel/errors.hpp"
#include "divsel/log.hpp"
#include "divsel/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <thread>

namespace divsel {

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
    double d = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        const double diff = a[j] - b[j];
        d += diff * diff;
    }
    return d;
}

// k-means++ seeding; stops early when every point already coincides with a
// chosen centroid.
Matrix seed_centroids(const Matrix& x, int k, Rng& rng) {
    const std::size_t n = x.rows();
    std::vector<std::size_t> chosen{uniform_index(rng, n)};
    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(x.row(i), x.row(chosen[0]));
    while (chosen.size() < static_cast<std::size_t>(k)) {
        double total = 0.0;
        for (double d : d2) total += d;
        if (total <= 0.0) break;
        const double target = uniform01(rng) * total;
        double acc = 0.0;
        std::size_t pick = n;
        for (std::size_t i = 0; i < n; ++i) {
            if (d2[i] <= 0.0) continue;
            acc += d2[i];
            pick = i;
            if (acc > target) break;
        }
        chosen.push_back(pick);
        for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_distance(x.row(i), x.row(pick)));
    }
    Matrix c(chosen.size(), x.cols());
    for (std::size_t r = 0; r < chosen.size(); ++r) {
        auto src = x.row(chosen[r]);
        std::copy(src.begin(), src.end(), c.row(r).begin());
    }
    return c;
}

// Means of the assigned points. Returns the member count of each cluster.
std::vector<std::size_t> update_means(const Matrix& x, std::span<const int> labels, Matrix& centroids) {
    std::vector<std::size_t> counts(centroids.rows(), 0);
    Matrix sums(centroids.rows(), centroids.cols());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const auto c = static_cast<std::size_t>(labels[i]);
        ++counts[c];
        auto row = x.row(i);
        auto s = sums.row(c);
        for (std::size_t j = 0; j < row.size(); ++j) s[j] += row[j];
    }
    for (std::size_t c = 0; c < centroids.rows(); ++c) {
        if (counts[c] == 0) continue;
        auto s = sums.row(c);
        auto mu = centroids.row(c);
        for (std::size_t j = 0; j < s.size(); ++j) mu[j] = s[j] / static_cast<double>(counts[c]);
    }
    return counts;
}

Matrix keep_rows(const Matrix& m, const std::vector<bool>& keep) {
    std::size_t rows = static_cast<std::size_t>(std::count(keep.begin(), keep.end(), true));
    Matrix out(rows, m.cols());
    std::size_t r = 0;
    for (std::size_t i = 0; i < m.rows(); ++i) {
        if (!keep[i]) continue;
        auto src = m.row(i);
        std::copy(src.begin(), src.end(), out.row(r++).begin());
    }
    return out;
}

double total(std::span<const double> v) {
    double s = 0.0;
    for (double d : v) s += d;
    return s;
}

} // namespace

Partition kmeans(const Matrix& x, int k, std::uint64_t seed, const KMeansOptions& options) {
    const std::size_t n = x.rows();
    if (k < 1) throw ConfigError("k must be at least 1");
    if (static_cast<std::size_t>(k) > n)
        throw ConfigError("k = " + std::to_string(k) + " exceeds the number of points (" + std::to_string(n) + ")");
    if (options.max_iter < 1) throw ConfigError("max_iter must be at least 1");
    if (!(options.tol >= 0.0)) throw ConfigError("tol must be nonnegative");

    Rng rng(seed);
    Matrix centroids = seed_centroids(x, k, rng);
    if (centroids.rows() < static_cast<std::size_t>(k))
        warn("k-means: data has only " + std::to_string(centroids.rows()) + " distinct point(s); k reduced from " +
             std::to_string(k));

    Partition p;
    p.requested_k = k;
    std::vector<int> labels(n), next(n);
    std::vector<double> dist2(n);
    kernels::assign_nearest(options.backend, x, centroids, labels, dist2);
    p.inertia_history.push_back(total(dist2));

    for (std::size_t it = 0; it < options.max_iter; ++it) {
        Matrix previous = centroids;
        const auto counts = update_means(x, labels, centroids);

        std::vector<bool> keep(centroids.rows(), true);
        for (std::size_t c = 0; c < centroids.rows(); ++c) {
            if (counts[c] > 0) continue;
            const auto far = static_cast<std::size_t>(std::max_element(dist2.begin(), dist2.end()) - dist2.begin());
            if (dist2[far] <= 0.0) {
                keep[c] = false;
                continue;
            }
            auto src = x.row(far);
            std::copy(src.begin(), src.end(), centroids.row(c).begin());
            dist2[far] = 0.0;
        }
        double shift = 0.0;
        for (std::size_t c = 0; c < centroids.rows(); ++c)
            if (keep[c]) shift = std::max(shift, std::sqrt(squared_distance(centroids.row(c), previous.row(c))));
        if (std::find(keep.begin(), keep.end(), false) != keep.end()) {
            centroids = keep_rows(centroids, keep);
            shift = std::numeric_limits<double>::infinity();
        }

        kernels::assign_nearest(options.backend, x, centroids, next, dist2);
        p.inertia_history.push_back(total(dist2));
        const bool changed = next != labels;
        labels.swap(next);
        if (!changed || shift < options.tol) break;
    }

    // Final means of the final assignment; drop clusters left without members.
    const auto counts = update_means(x, labels, centroids);
    std::vector<bool> keep(centroids.rows());
    std::vector<int> remap(centroids.rows(), -1);
    int next_id = 0;
    for (std::size_t c = 0; c < centroids.rows(); ++c) {
        keep[c] = counts[c] > 0;
        if (keep[c]) remap[c] = next_id++;
    }
    p.centroids = keep_rows(centroids, keep);
    for (auto& l : labels) l = remap[static_cast<std::size_t>(l)];
    p.k = next_id;
    p.assignments = std::move(labels);
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        inertia += squared_distance(x.row(i), p.centroids.row(static_cast<std::size_t>(p.assignments[i])));
    p.inertia = inertia;
    p.inertia_history.push_back(inertia);
    return p;
}

Partition kmeans(const Dataset& data, int k, std::uint64_t seed, const KMeansOptions& options) {
    return kmeans(data.samples, k, seed, options);
}

double xie_beni(const Matrix& x, const Partition& p) {
    if (p.k < 2 || p.centroids.rows() < 2) throw ConfigError("Xie-Beni needs at least two clusters");
    if (p.assignments.size() != x.rows()) throw ShapeError("partition does not cover the data");
    if (p.centroids.cols() != x.cols()) throw ShapeError("centroid dimension does not match data");
    double scatter = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i)
        scatter += squared_distance(x.row(i), p.centroids.row(static_cast<std::size_t>(p.assignments[i])));
    double min_sep = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < p.centroids.rows(); ++a)
        for (std::size_t b = a + 1; b < p.centroids.rows(); ++b)
            min_sep = std::min(min_sep, squared_distance(p.centroids.row(a), p.centroids.row(b)));
    if (min_sep <= 0.0) throw DegenerateError("Xie-Beni undefined: two centroids coincide");
    return scatter / (static_cast<double>(x.rows()) * min_sep);
}

double xie_beni(const Dataset& data, const Partition& p) { return xie_beni(data.samples, p); }

int select_k(const Dataset& data, int k_min, int k_max, std::uint64_t seed, const KMeansOptions& options) {
    if (k_min < 2 || k_min > k_max || static_cast<std::size_t>(k_max) + 1 > data.size())
        throw ConfigError("select_k needs 2 <= k_min <= k_max <= N-1");
    int best_k = k_min;
    double best = std::numeric_limits<double>::infinity();
    for (int k = k_min; k <= k_max; ++k) {
        const double xb = xie_beni(data.samples, kmeans(data.samples, k, seed, options));
        if (xb < best) {
            best = xb;
            best_k = k;
        }
    }
    return best_k;
}

// --- cache & serialization --------------------------------------------------

nlohmann::json to_json(const Partition& p) {
    nlohmann::json centroids = nlohmann::json::array();
    for (std::size_t r = 0; r < p.centroids.rows(); ++r) {
        auto row = p.centroids.row(r);
        centroids.push_back(std::vector<double>(row.begin(), row.end()));
    }
    return {{"k", p.k},
            {"requested_k", p.requested_k},
            {"inertia", p.inertia},
            {"assignments", p.assignments},
            {"centroids", std::move(centroids)}};
}

Partition partition_from_json(const nlohmann::json& j) {
    Partition p;
    try {
        p.k = j.at("k").get<int>();
        p.requested_k = j.value("requested_k", p.k);
        p.inertia = j.value("inertia", 0.0);
        p.assignments = j.at("assignments").get<std::vector<int>>();
        if (j.contains("centroids")) {
            const auto rows = j.at("centroids").get<std::vector<std::vector<double>>>();
            if (!rows.empty()) {
                p.centroids = Matrix(rows.size(), rows[0].size());
                for (std::size_t r = 0; r < rows.size(); ++r) {
                    if (rows[r].size() != rows[0].size()) throw ConfigError("ragged centroid matrix");
                    std::copy(rows[r].begin(), rows[r].end(), p.centroids.row(r).begin());
                }
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed partition JSON: ") + e.what());
    }
    for (int a : p.assignments)
        if (a < 0 || a >= p.k) throw ConfigError("partition assignment outside [0, k)");
    return p;
}

PartitionCache::PartitionCache(std::filesystem::path directory) : directory_(std::move(directory)) {
    std::filesystem::create_directories(directory_);
}

std::filesystem::path PartitionCache::path_for(std::uint64_t dataset_hash, const Subspace& s, int k,
                                               std::uint64_t seed) const {
    std::vector<std::size_t> key(s.features);
    key.push_back(static_cast<std::size_t>(k));
    key.push_back(static_cast<std::size_t>(dataset_hash));
    char name[64];
    std::snprintf(name, sizeof name, "%016llx-%016llx.json", static_cast<unsigned long long>(dataset_hash),
                  static_cast<unsigned long long>(derive_seed(seed, key)));
    return directory_ / name;
}

std::optional<Partition> PartitionCache::load(std::uint64_t dataset_hash, const Subspace& s, int k,
                                              std::uint64_t seed) const {
    std::ifstream in(path_for(dataset_hash, s, k, seed));
    if (!in) return std::nullopt;
    try {
        const auto j = nlohmann::json::parse(in);
        if (j.at("key").at("features").get<std::vector<std::size_t>>() != s.features ||
            j.at("key").at("k").get<int>() != k || j.at("key").at("seed").get<std::uint64_t>() != seed ||
            j.at("key").at("dataset").get<std::uint64_t>() != dataset_hash)
            return std::nullopt;
        return partition_from_json(j.at("partition"));
    } catch (const std::exception& e) {
        warn(std::string("ignoring unreadable cached partition: ") + e.what());
        return std::nullopt;
    }
}

void PartitionCache::store(std::uint64_t dataset_hash, const Subspace& s, int k, std::uint64_t seed,
                           const Partition& p) const {
    const nlohmann::json j = {
        {"key", {{"dataset", dataset_hash}, {"features", s.features}, {"k", k}, {"seed", seed}}},
        {"partition", to_json(p)}};
    const auto path = path_for(dataset_hash, s, k, seed);
    // writers of the same key (duplicate subspaces) must not share a temp file
    auto tmp = path;
    tmp += "." + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id())) + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw IoError("cannot write " + tmp.string());
        out << j.dump() << '\n';
    }
    std::filesystem::rename(tmp, path);
}

std::vector<Partition> cluster_pool(const Dataset& data, const SubspacePool& pool, int k, std::uint64_t seed,
                                    const KMeansOptions& options, const PartitionCache* cache) {
    if (pool.size() == 0) throw ConfigError("empty subspace pool");
    std::vector<Partition> out(pool.size());
    const std::uint64_t hash = cache ? content_hash(data) : 0;
    kernels::for_each_index(options.backend, pool.size(), [&](std::size_t i) {
        try {
            const auto& s = pool[i];
            const auto sub_seed = derive_seed(seed, s.features);
            if (cache) {
                if (auto hit = cache->load(hash, s, k, sub_seed)) {
                    out[i] = std::move(*hit);
                    return;
                }
            }
            out[i] = kmeans(project(data, s).samples, k, sub_seed, options);
            if (cache) cache->store(hash, s, k, sub_seed, out[i]);
        } catch (Error& e) {
            e.prepend("subspace " + std::to_string(i));
            throw;
        }
    });
    return out;
}

} // namespace divsel
