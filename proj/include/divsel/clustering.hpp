#pragma once

#include "divsel/dataset.hpp"
#include "divsel/kernels.hpp"
#include "divsel/subspace.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include <json.hpp>

namespace divsel {

/// Hard clustering of N points. `k` is the effective cluster count: when the
/// data holds fewer distinct points than requested, clusters collapse and
/// `k < requested_k`. Cluster ids are always 0..k-1 and every id is used.
struct Partition {
    std::vector<int> assignments;
    int k = 0;
    int requested_k = 0;
    double inertia = 0.0;
    Matrix centroids;
    /// Inertia after every assignment step; non-increasing.
    std::vector<double> inertia_history;

    std::size_t size() const noexcept { return assignments.size(); }
};

struct KMeansOptions {
    std::size_t max_iter = 300;
    double tol = 1e-6;
    kernels::Backend backend = kernels::default_backend();
};

/// Lloyd's algorithm from a k-means++ seeding. Stops when no assignment
/// changes, when every centroid moves less than `tol`, or after `max_iter`
/// update steps. An emptied cluster is re-seeded at the point farthest from
/// its nearest centroid.
Partition kmeans(const Matrix& data, int k, std::uint64_t seed, const KMeansOptions& options = {});
Partition kmeans(const Dataset& data, int k, std::uint64_t seed, const KMeansOptions& options = {});

/// Within-cluster squared scatter over N times the smallest squared
/// separation between two centroids. Lower is better.
double xie_beni(const Matrix& data, const Partition& partition);
double xie_beni(const Dataset& data, const Partition& partition);

/// argmin of the Xie-Beni index over k in [k_min, k_max] on all features;
/// ties go to the smaller k.
int select_k(const Dataset& data, int k_min, int k_max, std::uint64_t seed, const KMeansOptions& options = {});

/// Stores partitions on disk keyed by (dataset hash, subspace, k, seed).
class PartitionCache {
public:
    explicit PartitionCache(std::filesystem::path directory);

    std::optional<Partition> load(std::uint64_t dataset_hash, const Subspace& s, int k, std::uint64_t seed) const;
    void store(std::uint64_t dataset_hash, const Subspace& s, int k, std::uint64_t seed, const Partition& p) const;

    std::filesystem::path path_for(std::uint64_t dataset_hash, const Subspace& s, int k, std::uint64_t seed) const;

private:
    std::filesystem::path directory_;
};

/// One k-means partition per pool subspace on `data`. Each run is seeded
/// from (seed, subspace features), so identical subspaces give identical
/// partitions and results do not depend on scheduling.
std::vector<Partition> cluster_pool(const Dataset& data, const SubspacePool& pool, int k, std::uint64_t seed,
                                    const KMeansOptions& options = {}, const PartitionCache* cache = nullptr);

nlohmann::json to_json(const Partition& p);
Partition partition_from_json(const nlohmann::json& j);

} // namespace divsel
