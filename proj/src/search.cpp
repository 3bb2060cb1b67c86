#include "divsel/search.hpp"

#include "divsel/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace divsel {

double GaConfig::mutation_rate(std::size_t genome_length) const {
    return mutation_prob.value_or(genome_length ? 1.0 / static_cast<double>(genome_length) : 0.0);
}

void GaConfig::validate(std::size_t genome_length) const {
    if (population_size < 2) throw ConfigError("population_size must be at least 2");
    if (!(crossover_prob >= 0.0 && crossover_prob <= 1.0)) throw ConfigError("crossover_prob must lie in [0, 1]");
    const double pm = mutation_rate(genome_length);
    if (!(pm >= 0.0 && pm <= 1.0)) throw ConfigError("mutation_prob must lie in [0, 1]");
    if (min_size < 2) throw ConfigError("min_size must be at least 2");
    if (min_size > genome_length)
        throw ConfigError("min_size " + std::to_string(min_size) + " exceeds genome length " +
                          std::to_string(genome_length));
    if (elitism_count >= population_size) throw ConfigError("elitism_count must be smaller than population_size");
    if (genome_length < 2) throw ConfigError("genome length must be at least 2");
}

std::vector<double> ObjectiveSpec::evaluate(const Genome& g) const {
    std::vector<double> v{primary.evaluate(g)};
    if (maximize_size) v.push_back(static_cast<double>(g.popcount()));
    return v;
}

std::vector<Orientation> ObjectiveSpec::orientations() const {
    std::vector<Orientation> o{primary.orientation};
    if (maximize_size) o.push_back(Orientation::Maximize);
    return o;
}

double oriented(double value, Orientation o) noexcept { return o == Orientation::Maximize ? value : -value; }

std::vector<double> oriented(std::span<const double> values, std::span<const Orientation> orientations) {
    std::vector<double> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = oriented(values[i], orientations[i]);
    return out;
}

bool dominates(std::span<const double> a, std::span<const double> b) {
    bool strictly = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] < b[i]) return false;
        if (a[i] > b[i]) strictly = true;
    }
    return strictly;
}

// --- archive ------------------------------------------------------------------

ParetoArchive::ParetoArchive(std::vector<Orientation> orientations) : orientations_(std::move(orientations)) {}

bool ParetoArchive::insert(ArchiveEntry entry) {
    if (entry.validation.size() != orientations_.size()) throw ShapeError("archive entry arity mismatch");
    const auto v = oriented(entry.validation, orientations_);
    for (const auto& e : entries_) {
        if (e.genome == entry.genome) return false;
        const auto w = oriented(e.validation, orientations_);
        if (w == v || dominates(w, v)) return false;
    }
    std::erase_if(entries_, [&](const ArchiveEntry& e) { return dominates(v, oriented(e.validation, orientations_)); });
    entries_.push_back(std::move(entry));
    return true;
}

bool ParetoArchive::is_non_dominated() const {
    for (const auto& a : entries_)
        for (const auto& b : entries_)
            if (&a != &b && dominates(oriented(a.validation, orientations_), oriented(b.validation, orientations_)))
                return false;
    return true;
}

nlohmann::json to_json(const GenerationRecord& r) {
    return {{"generation", r.generation},       {"best_primary", r.best_primary}, {"mean_primary", r.mean_primary},
            {"best_size", r.best_size},         {"mean_size", r.mean_size},       {"archive_size", r.archive_size},
            {"archive_primary", r.archive_primary}, {"archive_best_size", r.archive_best_size}};
}

std::string to_jsonl(const History& history) {
    std::string out;
    for (const auto& r : history) out += to_json(r).dump() + "\n";
    return out;
}

nlohmann::json to_json(const ParetoArchive& archive) {
    std::vector<const ArchiveEntry*> sorted;
    for (const auto& e : archive.entries()) sorted.push_back(&e);
    std::sort(sorted.begin(), sorted.end(), [](auto a, auto b) {
        if (a->genome.popcount() != b->genome.popcount()) return a->genome.popcount() < b->genome.popcount();
        return a->genome < b->genome;
    });
    nlohmann::json entries = nlohmann::json::array();
    for (auto e : sorted)
        entries.push_back({{"genome", e->genome.to_string()},
                           {"size", e->genome.popcount()},
                           {"search", e->search},
                           {"validation", e->validation}});
    return {{"entries", entries}};
}

// --- operators ----------------------------------------------------------------

std::size_t roulette_select(std::span<const double> fitnesses, Rng& rng) {
    if (fitnesses.empty()) throw ConfigError("roulette selection over an empty population");
    double lo = std::numeric_limits<double>::infinity();
    for (double f : fitnesses) {
        if (!std::isfinite(f)) throw ConfigError("roulette selection needs finite fitness values");
        lo = std::min(lo, f);
    }
    constexpr double eps = 1e-12;
    double total = 0.0;
    for (double f : fitnesses) total += f - lo + eps;
    const double target = uniform01(rng) * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < fitnesses.size(); ++i) {
        acc += fitnesses[i] - lo + eps;
        if (acc > target) return i;
    }
    return fitnesses.size() - 1;
}

std::pair<Genome, Genome> crossover_at(const Genome& a, const Genome& b, std::size_t cut) {
    if (a.size() != b.size()) throw ShapeError("crossover parents differ in length");
    if (cut > a.size()) throw IndexError("crossover cut out of range");
    Genome c1 = a, c2 = b;
    for (std::size_t i = cut; i < a.size(); ++i) {
        c1.set(i, b.test(i));
        c2.set(i, a.test(i));
    }
    return {std::move(c1), std::move(c2)};
}

std::pair<Genome, Genome> one_point_crossover(const Genome& a, const Genome& b, double crossover_prob, Rng& rng) {
    if (a.size() != b.size()) throw ShapeError("crossover parents differ in length");
    if (a.size() < 2) throw ShapeError("crossover needs genomes of length >= 2");
    if (!bernoulli(rng, crossover_prob)) return {a, b};
    const std::size_t cut = 1 + uniform_index(rng, a.size() - 1);
    return crossover_at(a, b, cut);
}

Genome bitflip_mutation(const Genome& g, double p, Rng& rng) {
    Genome out = g;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (bernoulli(rng, p)) out.flip(i);
    return out;
}

Genome repair_min_size(const Genome& g, std::size_t min_size, Rng& rng) {
    if (min_size > g.size()) throw ConfigError("min_size exceeds genome length");
    Genome out = g;
    std::vector<std::size_t> unset;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (!g.test(i)) unset.push_back(i);
    for (std::size_t have = g.popcount(); have < min_size; ++have) {
        const auto pick = uniform_index(rng, unset.size());
        out.set(unset[pick]);
        unset.erase(unset.begin() + static_cast<std::ptrdiff_t>(pick));
    }
    return out;
}

std::vector<std::vector<std::size_t>> non_dominated_sort(std::span<const std::vector<double>> points) {
    const std::size_t n = points.size();
    std::vector<std::vector<std::size_t>> dominated(n);
    std::vector<std::size_t> dominators(n, 0);
    std::vector<std::vector<std::size_t>> fronts;
    std::vector<std::size_t> current;
    for (std::size_t p = 0; p < n; ++p) {
        for (std::size_t q = p + 1; q < n; ++q) {
            if (dominates(points[p], points[q])) {
                dominated[p].push_back(q);
                ++dominators[q];
            } else if (dominates(points[q], points[p])) {
                dominated[q].push_back(p);
                ++dominators[p];
            }
        }
    }
    for (std::size_t p = 0; p < n; ++p)
        if (dominators[p] == 0) current.push_back(p);
    while (!current.empty()) {
        std::vector<std::size_t> next;
        for (auto p : current)
            for (auto q : dominated[p])
                if (--dominators[q] == 0) next.push_back(q);
        std::sort(next.begin(), next.end());
        fronts.push_back(std::move(current));
        current = std::move(next);
    }
    return fronts;
}

std::vector<double> crowding_distance(std::span<const std::vector<double>> front) {
    const std::size_t n = front.size();
    std::vector<double> dist(n, 0.0);
    if (n <= 2) {
        std::fill(dist.begin(), dist.end(), std::numeric_limits<double>::infinity());
        return dist;
    }
    const std::size_t m = front[0].size();
    std::vector<std::size_t> order(n);
    for (std::size_t obj = 0; obj < m; ++obj) {
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](auto a, auto b) {
            if (front[a][obj] != front[b][obj]) return front[a][obj] < front[b][obj];
            if (front[a] != front[b]) return front[a] < front[b];
            return a < b;
        });
        const double lo = front[order.front()][obj], hi = front[order.back()][obj];
        if (!(hi > lo)) continue;
        dist[order.front()] = dist[order.back()] = std::numeric_limits<double>::infinity();
        for (std::size_t i = 1; i + 1 < n; ++i)
            dist[order[i]] += (front[order[i + 1]][obj] - front[order[i - 1]][obj]) / (hi - lo);
    }
    return dist;
}

// --- drivers ------------------------------------------------------------------

namespace {

void check_spec(const ObjectiveSpec& s, const char* what) {
    if (!s.primary.evaluate) throw ConfigError(std::string(what) + " objective has no evaluate function");
    if (s.genome_length < 2) throw ConfigError("genome length must be at least 2");
}

const ObjectiveSpec& resolve_validation(const ObjectiveSpec& search, const ObjectiveSpec& validation) {
    if (!validation.primary.evaluate) return search;
    if (validation.primary.orientation != search.primary.orientation || validation.maximize_size != search.maximize_size ||
        validation.genome_length != search.genome_length)
        throw ConfigError("validation objective must mirror the search objective");
    return validation;
}

std::vector<Genome> initial_population(std::size_t length, const GaConfig& config, Rng& rng) {
    std::vector<Genome> pop;
    pop.reserve(config.population_size);
    for (std::size_t i = 0; i < config.population_size; ++i) {
        Genome g(length);
        for (std::size_t b = 0; b < length; ++b) g.set(b, bernoulli(rng, 0.5));
        pop.push_back(repair_min_size(g, config.min_size, rng));
    }
    return pop;
}

std::vector<std::vector<double>> evaluate_all(const ObjectiveSpec& spec, std::span<const Genome> pop,
                                              kernels::Backend backend, std::size_t generation) {
    std::vector<std::vector<double>> out(pop.size());
    try {
        kernels::for_each_index(backend, pop.size(), [&](std::size_t i) { out[i] = spec.evaluate(pop[i]); });
    } catch (Error& e) {
        e.prepend("generation " + std::to_string(generation));
        throw;
    }
    return out;
}

// Offspring of one generation. All random draws happen here, sequentially.
std::vector<Genome> breed(std::span<const Genome> parents, std::span<const double> fitness, std::size_t count,
                          const GaConfig& config, Rng& rng) {
    const double pm = config.mutation_rate(parents[0].size());
    std::vector<Genome> out;
    out.reserve(count);
    while (out.size() < count) {
        const auto a = roulette_select(fitness, rng);
        const auto b = roulette_select(fitness, rng);
        auto [c1, c2] = one_point_crossover(parents[a], parents[b], config.crossover_prob, rng);
        out.push_back(repair_min_size(bitflip_mutation(c1, pm, rng), config.min_size, rng));
        if (out.size() < count) out.push_back(repair_min_size(bitflip_mutation(c2, pm, rng), config.min_size, rng));
    }
    return out;
}

GenerationRecord summarize(std::size_t generation, std::span<const Genome> pop,
                           std::span<const std::vector<double>> values, Orientation o) {
    GenerationRecord r;
    r.generation = generation;
    std::size_t best = 0;
    double sum = 0.0, size_sum = 0.0;
    for (std::size_t i = 0; i < pop.size(); ++i) {
        sum += values[i][0];
        size_sum += static_cast<double>(pop[i].popcount());
        if (oriented(values[i][0], o) > oriented(values[best][0], o)) best = i;
    }
    r.best_primary = values[best][0];
    r.best_size = pop[best].popcount();
    r.mean_primary = sum / static_cast<double>(pop.size());
    r.mean_size = size_sum / static_cast<double>(pop.size());
    return r;
}

} // namespace

GaResult ga_run(const ObjectiveSpec& objective, const GaConfig& config, const ObjectiveSpec& validation_in,
                const GenerationObserver& observer) {
    check_spec(objective, "search");
    const auto& validation = resolve_validation(objective, validation_in);
    const std::size_t length = objective.genome_length;
    config.validate(length);
    const Orientation o = objective.primary.orientation;

    Rng rng(config.seed);
    std::vector<Genome> pop = initial_population(length, config, rng);
    GaResult result;
    bool have_best = false;

    for (std::size_t gen = 0;; ++gen) {
        const auto values = evaluate_all(objective, pop, config.backend, gen);
        const auto checks = evaluate_all(validation, pop, config.backend, gen);
        for (std::size_t i = 0; i < pop.size(); ++i) {
            if (!have_best || oriented(checks[i][0], o) > oriented(result.validation_value, o)) {
                result.best = pop[i];
                result.search_value = values[i][0];
                result.validation_value = checks[i][0];
                have_best = true;
            }
        }
        auto record = summarize(gen, pop, values, o);
        record.archive_size = 1;
        record.archive_primary = result.validation_value;
        record.archive_best_size = result.best.popcount();
        result.history.push_back(record);
        if (observer) observer(gen, pop, nullptr);
        if (gen == config.generations) break;

        std::vector<double> fitness(pop.size());
        for (std::size_t i = 0; i < pop.size(); ++i) fitness[i] = oriented(values[i][0], o);
        std::vector<std::size_t> rank(pop.size());
        std::iota(rank.begin(), rank.end(), 0);
        std::stable_sort(rank.begin(), rank.end(), [&](auto a, auto b) { return fitness[a] > fitness[b]; });

        std::vector<Genome> next;
        next.reserve(pop.size());
        for (std::size_t e = 0; e < config.elitism_count; ++e) next.push_back(pop[rank[e]]);
        auto children = breed(pop, fitness, pop.size() - next.size(), config, rng);
        std::move(children.begin(), children.end(), std::back_inserter(next));
        pop = std::move(next);
    }
    return result;
}

MogaResult nsga2_run(const ObjectiveSpec& objectives_in, const GaConfig& config, const ObjectiveSpec& validation_in,
                     const GenerationObserver& observer) {
    check_spec(objectives_in, "search");
    ObjectiveSpec objectives = objectives_in;
    objectives.maximize_size = true;
    ObjectiveSpec validation_copy = validation_in;
    if (validation_copy.primary.evaluate) validation_copy.maximize_size = true;
    const auto& validation = resolve_validation(objectives, validation_copy);
    const std::size_t length = objectives.genome_length;
    config.validate(length);
    const auto orient = objectives.orientations();
    const std::size_t n = config.population_size;

    Rng rng(config.seed);
    MogaResult result{ParetoArchive(orient), {}};
    std::vector<Genome> pop = initial_population(length, config, rng);
    auto raw = evaluate_all(objectives, pop, config.backend, 0);

    auto merge_and_record = [&](std::size_t gen) {
        const auto checks = evaluate_all(validation, pop, config.backend, gen);
        for (std::size_t i = 0; i < pop.size(); ++i) result.archive.insert({pop[i], raw[i], checks[i]});
        auto record = summarize(gen, pop, raw, orient[0]);
        record.archive_size = result.archive.size();
        const ArchiveEntry* best = nullptr;
        for (const auto& e : result.archive.entries())
            if (!best || oriented(e.validation[0], orient[0]) > oriented(best->validation[0], orient[0])) best = &e;
        if (best) {
            record.archive_primary = best->validation[0];
            record.archive_best_size = best->genome.popcount();
        }
        result.history.push_back(record);
        if (observer) observer(gen, pop, &result.archive);
    };
    merge_and_record(0);

    for (std::size_t gen = 1; gen <= config.generations; ++gen) {
        std::vector<std::vector<double>> points(pop.size());
        for (std::size_t i = 0; i < pop.size(); ++i) points[i] = oriented(raw[i], orient);

        // mating fitness: front rank first, crowding as a tie breaker within (0, 1]
        const auto fronts = non_dominated_sort(points);
        std::vector<double> fitness(pop.size());
        for (std::size_t f = 0; f < fronts.size(); ++f) {
            std::vector<std::vector<double>> members;
            for (auto i : fronts[f]) members.push_back(points[i]);
            const auto crowd = crowding_distance(members);
            for (std::size_t j = 0; j < fronts[f].size(); ++j) {
                const double c = std::isinf(crowd[j]) ? 1.0 : crowd[j] / (1.0 + crowd[j]);
                fitness[fronts[f][j]] = static_cast<double>(fronts.size() - f) + c;
            }
        }
        auto children = breed(pop, fitness, n, config, rng);
        auto child_raw = evaluate_all(objectives, children, config.backend, gen);

        std::vector<Genome> merged = pop;
        std::move(children.begin(), children.end(), std::back_inserter(merged));
        std::vector<std::vector<double>> merged_raw = raw;
        std::move(child_raw.begin(), child_raw.end(), std::back_inserter(merged_raw));
        std::vector<std::vector<double>> merged_points(merged.size());
        for (std::size_t i = 0; i < merged.size(); ++i) merged_points[i] = oriented(merged_raw[i], orient);

        std::vector<std::size_t> chosen;
        for (const auto& front : non_dominated_sort(merged_points)) {
            if (chosen.size() + front.size() <= n) {
                chosen.insert(chosen.end(), front.begin(), front.end());
                if (chosen.size() == n) break;
                continue;
            }
            std::vector<std::vector<double>> members;
            for (auto i : front) members.push_back(merged_points[i]);
            const auto crowd = crowding_distance(members);
            std::vector<std::size_t> order(front.size());
            std::iota(order.begin(), order.end(), 0);
            std::sort(order.begin(), order.end(), [&](auto a, auto b) {
                if (crowd[a] != crowd[b]) return crowd[a] > crowd[b];
                if (merged[front[a]] != merged[front[b]]) return merged[front[a]] < merged[front[b]];
                return front[a] < front[b];
            });
            for (std::size_t j = 0; chosen.size() < n; ++j) chosen.push_back(front[order[j]]);
            break;
        }
        std::vector<Genome> next;
        std::vector<std::vector<double>> next_raw;
        for (auto i : chosen) {
            next.push_back(merged[i]);
            next_raw.push_back(merged_raw[i]);
        }
        pop = std::move(next);
        raw = std::move(next_raw);
        merge_and_record(gen);
    }
    return result;
}

Objective diversity_objective(const DiversityMatrix& matrix) {
    return {[m = matrix](const Genome& g) { return global_diversity(m, g, false); }, orientation(matrix.kind()),
            std::string(to_string(matrix.kind()))};
}

} // namespace divsel
