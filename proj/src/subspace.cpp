#include "divsel/subspace.hpp"

#include "divsel/errors.hpp"
#include "divsel/log.hpp"
#include "divsel/rng.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>

namespace divsel {

Genome::Genome(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
    for (auto& b : bits_) b = b ? 1 : 0;
}

Genome Genome::from_string(std::string_view bits) {
    Genome g(bits.size());
    for (std::size_t i = 0; i < bits.size(); ++i) {
        if (bits[i] != '0' && bits[i] != '1') throw ConfigError("genome string must contain only 0 and 1");
        g.bits_[i] = bits[i] == '1';
    }
    return g;
}

Genome Genome::from_indices(std::size_t length, std::span<const std::size_t> selected) {
    Genome g(length);
    for (auto i : selected) {
        if (i >= length) throw IndexError("genome index " + std::to_string(i) + " out of range");
        g.set(i);
    }
    return g;
}

std::size_t Genome::popcount() const noexcept {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

std::vector<std::size_t> Genome::selected() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < bits_.size(); ++i)
        if (bits_[i]) out.push_back(i);
    return out;
}

std::string Genome::to_string() const {
    std::string s(bits_.size(), '0');
    for (std::size_t i = 0; i < bits_.size(); ++i)
        if (bits_[i]) s[i] = '1';
    return s;
}

void SubspacePool::validate() const {
    if (subspaces.size() < 3) throw ConfigError("a pool needs at least 3 subspaces");
    if (cardinality < 1 || cardinality > total_features) throw ConfigError("cardinality must lie in [1, total_features]");
    for (std::size_t i = 0; i < subspaces.size(); ++i) {
        const auto& f = subspaces[i].features;
        if (f.size() != cardinality)
            throw ConfigError("subspace " + std::to_string(i) + " has cardinality " + std::to_string(f.size()));
        for (std::size_t j = 0; j < f.size(); ++j) {
            if (f[j] >= total_features) throw ConfigError("subspace " + std::to_string(i) + " feature out of range");
            if (j > 0 && f[j] <= f[j - 1])
                throw ConfigError("subspace " + std::to_string(i) + " indices are not strictly increasing");
        }
    }
}

SubspacePool generate_pool(std::size_t total_features, std::size_t cardinality, std::size_t pool_size,
                           std::uint64_t seed) {
    if (cardinality < 1 || cardinality > total_features)
        throw ConfigError("cardinality must lie in [1, total_features]");
    if (pool_size < 3) throw ConfigError("pool_size must be at least 3");

    SubspacePool pool;
    pool.cardinality = cardinality;
    pool.total_features = total_features;
    pool.seed = seed;
    Rng rng(seed);
    std::vector<std::size_t> features(total_features);
    for (std::size_t p = 0; p < pool_size; ++p) {
        std::iota(features.begin(), features.end(), 0);
        // partial Fisher-Yates: the first `cardinality` slots are a uniform draw
        for (std::size_t i = 0; i < cardinality; ++i) {
            const auto j = i + uniform_index(rng, total_features - i);
            std::swap(features[i], features[j]);
        }
        Subspace s{{features.begin(), features.begin() + static_cast<std::ptrdiff_t>(cardinality)}};
        std::sort(s.features.begin(), s.features.end());
        pool.subspaces.push_back(std::move(s));
    }

    std::set<Subspace> distinct(pool.subspaces.begin(), pool.subspaces.end());
    if (distinct.size() != pool.subspaces.size())
        warn("subspace pool contains " + std::to_string(pool.subspaces.size() - distinct.size()) +
             " duplicate subspace(s)");
    return pool;
}

Dataset project(const Dataset& d, const Subspace& s) {
    for (auto f : s.features)
        if (f >= d.feature_count())
            throw IndexError("feature index " + std::to_string(f) + " out of range for " +
                             std::to_string(d.feature_count()) + " features");
    Dataset out;
    out.samples = Matrix(d.size(), s.features.size());
    for (std::size_t r = 0; r < d.size(); ++r) {
        auto src = d.samples.row(r);
        auto dst = out.samples.row(r);
        for (std::size_t j = 0; j < s.features.size(); ++j) dst[j] = src[s.features[j]];
    }
    for (auto f : s.features)
        out.feature_names.push_back(f < d.feature_names.size() ? d.feature_names[f] : "f" + std::to_string(f));
    out.labels = d.labels;
    out.class_count = d.class_count;
    out.class_names = d.class_names;
    out.tag = d.tag;
    return out;
}

nlohmann::json to_json(const SubspacePool& pool) {
    nlohmann::json subspaces = nlohmann::json::array();
    for (const auto& s : pool.subspaces) subspaces.push_back(s.features);
    return {{"total_features", pool.total_features},
            {"cardinality", pool.cardinality},
            {"seed", pool.seed},
            {"subspaces", std::move(subspaces)}};
}

SubspacePool pool_from_json(const nlohmann::json& j) {
    SubspacePool pool;
    try {
        pool.total_features = j.at("total_features").get<std::size_t>();
        pool.cardinality = j.at("cardinality").get<std::size_t>();
        pool.seed = j.at("seed").get<std::uint64_t>();
        for (const auto& s : j.at("subspaces")) pool.subspaces.push_back({s.get<std::vector<std::size_t>>()});
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed pool JSON: ") + e.what());
    }
    pool.validate();
    return pool;
}

void save_pool(const SubspacePool& pool, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << to_json(pool).dump(2) << '\n';
}

SubspacePool load_pool(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return pool_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("invalid pool JSON: ") + e.what());
    }
}

} // namespace divsel
