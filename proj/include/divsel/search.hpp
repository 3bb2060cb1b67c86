#pragma once

#include "divsel/diversity.hpp"
#include "divsel/kernels.hpp"
#include "divsel/rng.hpp"
#include "divsel/subspace.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace divsel {

struct GaConfig {
    std::size_t population_size = 32;
    std::size_t generations = 500;
    double crossover_prob = 0.5;
    /// Per-bit flip probability; unset means 1 / genome length.
    std::optional<double> mutation_prob;
    std::size_t min_size = 3;
    std::size_t elitism_count = 1;
    std::uint64_t seed = 0;
    kernels::Backend backend = kernels::default_backend();

    double mutation_rate(std::size_t genome_length) const;
    /// Throws ConfigError on out-of-range settings.
    void validate(std::size_t genome_length) const;
};

/// A scalar function of a genome. Must be pure: it may be called
/// concurrently from several threads.
struct Objective {
    std::function<double(const Genome&)> evaluate;
    Orientation orientation = Orientation::Minimize;
    std::string name;
};

/// The primary objective, plus ensemble-size maximization as a second
/// objective when running the multi-objective search.
struct ObjectiveSpec {
    std::size_t genome_length = 0;
    Objective primary;
    bool maximize_size = false;

    std::size_t arity() const noexcept { return maximize_size ? 2 : 1; }
    std::vector<double> evaluate(const Genome& g) const;
    std::vector<Orientation> orientations() const;
};

/// Value flipped so that larger is always better.
double oriented(double value, Orientation o) noexcept;
std::vector<double> oriented(std::span<const double> values, std::span<const Orientation> orientations);

/// Pareto dominance for maximized vectors.
bool dominates(std::span<const double> a, std::span<const double> b);

struct ArchiveEntry {
    Genome genome;
    std::vector<double> search;     ///< raw objective values on the search rows
    std::vector<double> validation; ///< raw objective values on the archive-validation rows
};

/// Mutually non-dominated set under the validation objectives.
class ParetoArchive {
public:
    explicit ParetoArchive(std::vector<Orientation> orientations = {});

    /// Rejects the entry when its genome is already stored or when an entry
    /// dominates or equals it; otherwise evicts what it dominates and stores it.
    bool insert(ArchiveEntry entry);

    const std::vector<ArchiveEntry>& entries() const noexcept { return entries_; }
    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }
    const std::vector<Orientation>& orientations() const noexcept { return orientations_; }

    /// True when no stored entry dominates another one.
    bool is_non_dominated() const;

private:
    std::vector<Orientation> orientations_;
    std::vector<ArchiveEntry> entries_;
};

struct GenerationRecord {
    std::size_t generation = 0;
    double best_primary = 0.0;   ///< best raw primary value in the population
    double mean_primary = 0.0;
    std::size_t best_size = 0;   ///< popcount of that best individual
    double mean_size = 0.0;
    std::size_t archive_size = 0;
    double archive_primary = 0.0; ///< best validated raw primary value in the archive
    std::size_t archive_best_size = 0;
};

using History = std::vector<GenerationRecord>;

nlohmann::json to_json(const GenerationRecord& r);
/// One JSON object per line.
std::string to_jsonl(const History& history);
nlohmann::json to_json(const ParetoArchive& archive);

/// Called after every generation (0 = initial population) with the current
/// population; `archive` is null for the single-objective search.
using GenerationObserver =
    std::function<void(std::size_t generation, std::span<const Genome> population, const ParetoArchive* archive)>;

// --- operators ------------------------------------------------------------

/// Index drawn with probability proportional to fitness - min + 1e-12
/// (higher fitness is better).
std::size_t roulette_select(std::span<const double> fitnesses, Rng& rng);

/// Children of a one-point crossover at `cut` (suffixes from `cut` on swap).
std::pair<Genome, Genome> crossover_at(const Genome& a, const Genome& b, std::size_t cut);
/// With probability `crossover_prob` swaps suffixes at a uniform cut in [1, L-1].
std::pair<Genome, Genome> one_point_crossover(const Genome& a, const Genome& b, double crossover_prob, Rng& rng);
Genome bitflip_mutation(const Genome& g, double p, Rng& rng);
/// Sets uniformly chosen unset bits until popcount reaches min_size.
Genome repair_min_size(const Genome& g, std::size_t min_size, Rng& rng);

/// Fronts of indices into `points` (all objectives maximized), best first.
std::vector<std::vector<std::size_t>> non_dominated_sort(std::span<const std::vector<double>> points);
/// NSGA-II crowding distance; boundary points of each objective get +inf.
std::vector<double> crowding_distance(std::span<const std::vector<double>> front);

// --- drivers ----------------------------------------------------------------

struct GaResult {
    Genome best;             ///< best genome under the validation objective seen in any generation
    double search_value = 0.0;
    double validation_value = 0.0;
    History history;
};

/// Generational GA with roulette selection, one-point crossover, bit-flip
/// mutation, min-size repair and elitism. The validation objective re-scores
/// each generation; the best validated genome is returned. A validation spec
/// with an empty evaluate function reuses the search objective.
GaResult ga_run(const ObjectiveSpec& objective, const GaConfig& config, const ObjectiveSpec& validation,
                const GenerationObserver& observer = {});

struct MogaResult {
    ParetoArchive archive;
    History history;
};

/// NSGA-II over (primary objective, ensemble size). Each generation the
/// population is re-scored on the validation objectives and merged into the
/// returned archive.
MogaResult nsga2_run(const ObjectiveSpec& objectives, const GaConfig& config, const ObjectiveSpec& validation,
                     const GenerationObserver& observer = {});

/// Objective reading the mean pairwise diversity of the selected subspaces.
Objective diversity_objective(const DiversityMatrix& matrix);

} // namespace divsel
