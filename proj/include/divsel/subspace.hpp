#pragma once

#include "divsel/dataset.hpp"

#include <compare>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace divsel {

/// Strictly increasing feature indices.
struct Subspace {
    std::vector<std::size_t> features;

    std::size_t cardinality() const noexcept { return features.size(); }
    auto operator<=>(const Subspace&) const = default;
};

struct SubspacePool {
    std::vector<Subspace> subspaces;
    std::size_t cardinality = 0;
    std::size_t total_features = 0;
    std::uint64_t seed = 0;

    std::size_t size() const noexcept { return subspaces.size(); }
    const Subspace& operator[](std::size_t i) const { return subspaces[i]; }

    /// Throws ConfigError when a subspace breaks the pool invariants.
    void validate() const;

    bool operator==(const SubspacePool&) const = default;
};

/// Selection of pool members; bit i set means subspace i is in the ensemble.
class Genome {
public:
    Genome() = default;
    explicit Genome(std::size_t length) : bits_(length, 0) {}
    explicit Genome(std::vector<std::uint8_t> bits);

    static Genome from_string(std::string_view bits);
    static Genome from_indices(std::size_t length, std::span<const std::size_t> selected);

    std::size_t size() const noexcept { return bits_.size(); }
    bool test(std::size_t i) const { return bits_[i] != 0; }
    void set(std::size_t i, bool value = true) { bits_[i] = value ? 1 : 0; }
    void flip(std::size_t i) { bits_[i] ^= 1; }

    std::size_t popcount() const noexcept;
    std::vector<std::size_t> selected() const;
    std::string to_string() const;
    std::span<const std::uint8_t> bits() const noexcept { return bits_; }

    auto operator<=>(const Genome&) const = default;

private:
    std::vector<std::uint8_t> bits_;
};

/// `pool_size` subspaces, each a uniform draw of `cardinality` distinct
/// features out of `total_features`. Duplicate subspaces are kept, with a warning.
SubspacePool generate_pool(std::size_t total_features, std::size_t cardinality, std::size_t pool_size,
                           std::uint64_t seed);

/// Column slice of `d` restricted to `s`, preserving rows, labels and tag.
Dataset project(const Dataset& d, const Subspace& s);

nlohmann::json to_json(const SubspacePool& pool);
SubspacePool pool_from_json(const nlohmann::json& j);
void save_pool(const SubspacePool& pool, const std::filesystem::path& path);
SubspacePool load_pool(const std::filesystem::path& path);

} // namespace divsel
