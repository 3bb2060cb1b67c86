#include "divsel/experiment.hpp"

#include "divsel/errors.hpp"
#include "divsel/log.hpp"
#include "divsel/stats.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <tuple>

namespace divsel {

namespace {

// seed streams
constexpr std::uint64_t kDataStream = 1;
constexpr std::uint64_t kHoldoutStream = 2;
constexpr std::uint64_t kPoolStream = 3;
constexpr std::uint64_t kReplicationStream = 4;
constexpr std::uint64_t kSplitStream = 5;
constexpr std::uint64_t kClusterStream = 6;
constexpr std::uint64_t kSearchStream = 7;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<double> finite(std::span<const double> v) {
    std::vector<double> out;
    for (double x : v)
        if (std::isfinite(x)) out.push_back(x);
    return out;
}

std::uint64_t seed_for(std::uint64_t seed, std::uint64_t stream, std::size_t index) {
    const std::array<std::size_t, 2> key{static_cast<std::size_t>(stream), index};
    return derive_seed(seed, key);
}

struct Inputs {
    Dataset training;
    Dataset test;
    std::optional<std::array<Dataset, 3>> disjoint; // optimization, archive validation, evaluation
};

Dataset tagged(Dataset d, SplitTag tag) {
    d.tag = tag;
    return d;
}

Inputs load_inputs(const ExperimentConfig& c) {
    Dataset whole;
    switch (c.synthetic) {
    case SyntheticSource::PimaStyle: whole = generate_pima_style(derive_seed(c.seed, kDataStream)); break;
    case SyntheticSource::Blobs:
        whole = generate_synthetic(c.synthetic_samples, c.synthetic_features, c.synthetic_classes,
                                   derive_seed(c.seed, kDataStream));
        break;
    case SyntheticSource::None: whole = load_csv(c.data, c.label_column); break;
    }
    Inputs in;
    if (!c.test_data.empty()) {
        in.training = tagged(std::move(whole), SplitTag::Training);
        in.test = tagged(load_csv(c.test_data, c.label_column), SplitTag::Test);
        if (in.test.feature_count() != in.training.feature_count())
            throw ConfigError("test_data has a different feature count than data");
    } else {
        std::tie(in.training, in.test) = holdout(whole, c.test_fraction, derive_seed(c.seed, kHoldoutStream));
    }
    if (!c.optimization_data.empty()) {
        in.disjoint = std::array<Dataset, 3>{tagged(load_csv(c.optimization_data, c.label_column), SplitTag::Optimization),
                                             tagged(load_csv(c.validation_data, c.label_column), SplitTag::ArchiveValidation),
                                             tagged(load_csv(c.evaluation_data, c.label_column), SplitTag::Evaluation)};
        for (const auto& d : *in.disjoint)
            if (d.feature_count() != in.training.feature_count())
                throw ConfigError("search files must have the training feature count");
    }
    return in;
}

SplitSet replication_split(const Inputs& in, const ExperimentConfig& c, std::uint64_t rep_seed) {
    if (!in.disjoint) return split(in.training, in.test, c.split, derive_seed(rep_seed, kSplitStream));
    SplitSet s;
    s.optimization = (*in.disjoint)[0];
    s.archive_validation = (*in.disjoint)[1];
    s.evaluation = (*in.disjoint)[2];
    s.training = in.training;
    s.test = in.test;
    return s;
}

// Training rows minus the part about to be scored. The three search parts
// partition the training rows in the nested protocol.
Dataset fit_rows(const SplitSet& s, SplitTag scored, const ExperimentConfig& c, bool disjoint) {
    if (!c.score_holdout || disjoint) return s.training;
    switch (scored) {
    case SplitTag::Optimization: return concat_rows(s.archive_validation, s.evaluation, SplitTag::Training);
    case SplitTag::ArchiveValidation: return concat_rows(s.optimization, s.evaluation, SplitTag::Training);
    case SplitTag::Evaluation: return concat_rows(s.optimization, s.archive_validation, SplitTag::Training);
    default: return s.training;
    }
}

std::string fit_rows_name(SplitTag scored, const ExperimentConfig& c, bool disjoint) {
    if (!c.score_holdout || disjoint) return "training";
    switch (scored) {
    case SplitTag::Optimization: return "archive_validation+evaluation";
    case SplitTag::ArchiveValidation: return "optimization+evaluation";
    case SplitTag::Evaluation: return "optimization+archive_validation";
    default: return "training";
    }
}

void forbid_test(const Dataset& d, const char* stage) {
    if (d.tag == SplitTag::Test) throw ConfigError(std::string(stage) + " was handed test rows");
}

SubspacePool make_pool(const ExperimentConfig& c, std::size_t features, std::uint64_t seed) {
    if (!c.pool_file.empty()) {
        auto pool = load_pool(c.pool_file);
        if (pool.total_features != features)
            throw ConfigError("pool file expects " + std::to_string(pool.total_features) + " features, data has " +
                              std::to_string(features));
        return pool;
    }
    return generate_pool(features, c.cardinality, c.pool_size, derive_seed(seed, kPoolStream));
}

struct Baselines {
    double all = 0.0;
    double oracle = 0.0;
};

Baselines score_all(std::span<const TrainedClassifier> all, const Dataset& test, kernels::Backend backend) {
    const auto votes = predict_votes(all, test, backend);
    return {1.0 - mve(votes, test.labels), oracle_rate(votes, test.labels)};
}

std::vector<TrainedClassifier> train_all(const SubspacePool& pool, const Dataset& training,
                                         const ExperimentConfig& c) {
    Genome every(pool.subspaces.size());
    for (std::size_t i = 0; i < every.size(); ++i) every.set(i);
    return train_ensemble(pool, every, training, c);
}

double subset_error(const VoteMatrix& votes, std::span<const int> labels, const Genome& g, ErrorObjective o) {
    const auto members = g.selected();
    const auto sub = votes.subset(members);
    return o == ErrorObjective::Me ? me(sub, labels) : mve(sub, labels);
}

// What a search produced for one arm, before the final ensemble is fitted.
struct Selection {
    Genome genome;
    double search_value = 0.0;
    double validation_value = 0.0;
    std::vector<std::size_t> archive_sizes;
    std::optional<ParetoArchive> archive_storage;
    History history;
};

Selection run_search(const ObjectiveSpec& search, const ObjectiveSpec& validation, const ExperimentConfig& c,
                     GaConfig ga) {
    Selection sel;
    if (c.search == SearchKind::Ga) {
        auto r = ga_run(search, ga, validation);
        sel.genome = std::move(r.best);
        sel.search_value = r.search_value;
        sel.validation_value = r.validation_value;
        sel.history = std::move(r.history);
    } else {
        auto r = nsga2_run(search, ga, validation);
        for (const auto& e : r.archive.entries()) sel.archive_sizes.push_back(e.genome.popcount());
        std::sort(sel.archive_sizes.begin(), sel.archive_sizes.end());
        sel.history = std::move(r.history);
        sel.archive_storage = std::move(r.archive);
    }
    return sel;
}

// Best archived entry by validation error; ties go to the smaller ensemble.
const ArchiveEntry& min_error_entry(const ParetoArchive& archive) {
    if (archive.empty()) throw DegenerateError("search produced an empty archive");
    const ArchiveEntry* best = nullptr;
    for (const auto& e : archive.entries()) {
        if (!best) {
            best = &e;
            continue;
        }
        const auto key = [](const ArchiveEntry& a) { return std::tuple(a.validation[0], a.genome.popcount(), a.genome); };
        if (key(e) < key(*best)) best = &e;
    }
    return *best;
}

const ArchiveEntry* find_entry(const ParetoArchive& archive, const Genome& g) {
    for (const auto& e : archive.entries())
        if (e.genome == g) return &e;
    return nullptr;
}

std::vector<ReplicationRecord> run_replication(const ExperimentConfig& c, const Inputs& in,
                                               const SubspacePool* shared_pool, const Baselines* shared_baselines,
                                               std::size_t r, Baselines& baselines_out) {
    const auto arms = c.arm_names();
    const std::uint64_t rep_seed = seed_for(c.seed, kReplicationStream, r);
    const bool parallel_outer = c.backend == kernels::Backend::OpenMP && c.replications > 1;
    const auto inner = parallel_outer ? kernels::Backend::Serial : c.backend;

    std::vector<ReplicationRecord> records(arms.size());
    for (std::size_t a = 0; a < arms.size(); ++a) {
        records[a].replication = r;
        records[a].arm = arms[a];
        records[a].seed = rep_seed;
    }
    auto fail_all = [&](const std::string& msg) {
        for (auto& rec : records)
            if (rec.error.empty()) {
                rec.ok = false;
                rec.error = msg;
            }
    };

    baselines_out = shared_baselines ? *shared_baselines : Baselines{kNaN, kNaN};
    try {
        const std::uint64_t counter_start = training_counter();
        const auto s = replication_split(in, c, rep_seed);
        const SubspacePool pool = shared_pool ? *shared_pool : make_pool(c, in.training.feature_count(), rep_seed);
        forbid_test(s.optimization, "search");
        forbid_test(s.archive_validation, "archive validation");
        forbid_test(s.training, "training");

        std::map<std::string, std::string> provenance{{"search", to_string(s.optimization.tag)},
                                                      {"archive_validation", to_string(s.archive_validation.tag)},
                                                      {"training", to_string(s.training.tag)},
                                                      {"test", to_string(s.test.tag)}};

        GaConfig ga = c.ga;
        ga.backend = inner;
        std::vector<std::optional<Selection>> selections(arms.size());
        std::vector<TrainedClassifier> pool_classifiers;
        int k = 0;

        if (c.mode == Mode::Free) {
            KMeansOptions km{c.kmeans_max_iter, c.kmeans_tol, inner};
            const std::uint64_t cluster_seed = derive_seed(rep_seed, kClusterStream);
            k = c.clusters ? c.clusters : select_k(s.optimization, c.k_min, c.k_max, cluster_seed, km);
            std::optional<PartitionCache> cache;
            if (!c.cache_dir.empty()) cache.emplace(c.cache_dir);
            const auto opt_parts = cluster_pool(s.optimization, pool, k, cluster_seed, km, cache ? &*cache : nullptr);
            const auto val_parts =
                cluster_pool(s.archive_validation, pool, k, cluster_seed, km, cache ? &*cache : nullptr);
            provenance["clustering"] = to_string(s.optimization.tag);
            provenance["validation_clustering"] = to_string(s.archive_validation.tag);

            for (std::size_t a = 0; a < arms.size(); ++a) {
                try {
                    const auto kind = c.diversity[a];
                    ObjectiveSpec search{pool.subspaces.size(), diversity_objective(pairwise_matrix(opt_parts, kind, inner)),
                                         false};
                    ObjectiveSpec validation{pool.subspaces.size(),
                                             diversity_objective(pairwise_matrix(val_parts, kind, inner)), false};
                    ga.seed = seed_for(rep_seed, kSearchStream, a);
                    selections[a] = run_search(search, validation, c, ga);
                    records[a].trainings_before_selection = training_counter() - counter_start;
                } catch (const std::exception& e) {
                    records[a].error = e.what();
                }
            }
        } else {
            const bool disjoint = in.disjoint.has_value();
            pool_classifiers = train_all(pool, s.training, c);
            VoteMatrix votes_opt, votes_val;
            if (c.score_holdout && !disjoint) {
                votes_opt = predict_votes(train_all(pool, fit_rows(s, SplitTag::Optimization, c, disjoint), c),
                                          s.optimization, inner);
                votes_val = predict_votes(train_all(pool, fit_rows(s, SplitTag::ArchiveValidation, c, disjoint), c),
                                          s.archive_validation, inner);
            } else {
                votes_opt = predict_votes(pool_classifiers, s.optimization, inner);
                votes_val = predict_votes(pool_classifiers, s.archive_validation, inner);
            }
            provenance["search_fit"] = fit_rows_name(SplitTag::Optimization, c, disjoint);
            provenance["validation_fit"] = fit_rows_name(SplitTag::ArchiveValidation, c, disjoint);
            for (std::size_t a = 0; a < arms.size(); ++a) {
                try {
                    const auto o = c.objectives[a];
                    auto error_of = [o](const VoteMatrix& v, std::span<const int> labels) {
                        return [&v, labels, o](const Genome& g) { return subset_error(v, labels, g, o); };
                    };
                    ObjectiveSpec search{pool.subspaces.size(),
                                         {error_of(votes_opt, s.optimization.labels), Orientation::Minimize,
                                          std::string(to_string(o))},
                                         false};
                    ObjectiveSpec validation{pool.subspaces.size(),
                                             {error_of(votes_val, s.archive_validation.labels), Orientation::Minimize,
                                              std::string(to_string(o))},
                                             false};
                    ga.seed = seed_for(rep_seed, kSearchStream, a);
                    selections[a] = run_search(search, validation, c, ga);
                    records[a].trainings_before_selection = training_counter() - counter_start;
                } catch (const std::exception& e) {
                    records[a].error = e.what();
                }
            }
        }

        // Final ensembles: only now does the classifier-free arm touch a classifier.
        for (std::size_t a = 0; a < arms.size(); ++a) {
            auto& rec = records[a];
            if (!selections[a]) continue;
            auto& sel = *selections[a];
            try {
                rec.clusters = k;
                rec.provenance = provenance;
                rec.history = std::move(sel.history);
                rec.archive_sizes = sel.archive_sizes;
                if (sel.archive_storage) {
                    const auto& archive = *sel.archive_storage;
                    if (c.mode == Mode::Free) {
                        forbid_test(s.evaluation, "pareto evaluation");
                        ExperimentConfig scoped = c;
                        scoped.backend = inner;
                        const bool disjoint = in.disjoint.has_value();
                        auto choice = evaluate_pareto(archive, pool, fit_rows(s, SplitTag::Evaluation, c, disjoint),
                                                      s.evaluation, scoped);
                        rec.provenance["pareto_evaluation"] = to_string(s.evaluation.tag);
                        rec.provenance["pareto_fit"] = fit_rows_name(SplitTag::Evaluation, c, disjoint);
                        sel.genome = choice.genome;
                        rec.evaluation_accuracy = choice.accuracy;
                        rec.skipped = std::move(choice.skipped);
                    } else {
                        sel.genome = min_error_entry(archive).genome;
                    }
                    const auto* entry = find_entry(archive, sel.genome);
                    sel.search_value = entry->search[0];
                    sel.validation_value = entry->validation[0];
                }
                rec.genome = sel.genome;
                rec.size = sel.genome.popcount();
                rec.search_value = sel.search_value;
                rec.validation_value = sel.validation_value;
                VoteMatrix votes;
                if (c.mode == Mode::Based) {
                    votes = predict_votes(pool_classifiers, s.test, inner).subset(sel.genome.selected());
                } else {
                    const auto ensemble = train_ensemble(pool, sel.genome, s.training, c);
                    votes = predict_votes(ensemble, s.test, inner);
                }
                rec.test_accuracy = 1.0 - mve(votes, s.test.labels);
                rec.ok = true;
            } catch (const std::exception& e) {
                rec.error = e.what();
            }
        }

        if (!shared_baselines) {
            if (pool_classifiers.empty()) pool_classifiers = train_all(pool, s.training, c);
            baselines_out = score_all(pool_classifiers, s.test, inner);
        }
    } catch (const std::exception& e) {
        fail_all(e.what());
    }
    for (auto& rec : records)
        if (!rec.ok && rec.error.empty()) rec.error = "search did not finish";
    return records;
}

} // namespace

std::vector<TrainedClassifier> train_ensemble(const SubspacePool& pool, const Genome& genome,
                                              const Dataset& training, const ExperimentConfig& config) {
    if (genome.size() != pool.subspaces.size()) throw ShapeError("genome length differs from pool size");
    forbid_test(training, "training");
    std::vector<TrainedClassifier> out;
    for (auto i : genome.selected()) {
        try {
            out.push_back(train(config.classifier, training, pool.subspaces[i], config.classifier_params));
        } catch (Error& e) {
            e.prepend("subspace " + std::to_string(i));
            throw;
        }
    }
    return out;
}

ParetoChoice evaluate_pareto(const ParetoArchive& archive, const SubspacePool& pool, const Dataset& training,
                             const Dataset& evaluation, const ExperimentConfig& config) {
    if (archive.empty()) throw DegenerateError("cannot evaluate an empty archive");
    forbid_test(evaluation, "pareto evaluation");
    std::vector<const ArchiveEntry*> order;
    for (const auto& e : archive.entries()) order.push_back(&e);
    std::sort(order.begin(), order.end(), [](auto a, auto b) {
        return std::pair(a->genome.popcount(), a->genome) < std::pair(b->genome.popcount(), b->genome);
    });
    ParetoChoice best;
    bool found = false;
    for (const auto* e : order) {
        try {
            const auto ensemble = train_ensemble(pool, e->genome, training, config);
            const double acc = 1.0 - mve(predict_votes(ensemble, evaluation, config.backend), evaluation.labels);
            // sorted by size first, so strict improvement keeps the smaller ensemble on ties
            if (!found || acc > best.accuracy) {
                best.genome = e->genome;
                best.accuracy = acc;
                found = true;
            }
        } catch (const TrainError& err) {
            best.skipped.push_back(e->genome.to_string() + ": " + err.what());
        }
    }
    if (!found) throw TrainError("no archived genome could be trained");
    return best;
}

std::vector<ArmAggregate> replicate_stats(const std::vector<ReplicationRecord>& records,
                                          const std::vector<std::string>& arms,
                                          const std::vector<double>& all_accuracy) {
    std::vector<ArmAggregate> out;
    for (const auto& arm : arms) {
        ArmAggregate agg;
        agg.arm = arm;
        std::vector<double> acc, size, paired_all;
        for (const auto& r : records) {
            if (r.arm != arm) continue;
            if (!r.ok) {
                ++agg.failures;
                continue;
            }
            acc.push_back(r.test_accuracy);
            size.push_back(static_cast<double>(r.size));
            if (r.replication < all_accuracy.size() && std::isfinite(all_accuracy[r.replication]))
                paired_all.push_back(all_accuracy[r.replication]);
        }
        agg.n = acc.size();
        if (!acc.empty()) {
            const auto a = summarize(acc);
            const auto s = summarize(size);
            agg.accuracy_mean = a.mean;
            agg.accuracy_std = a.stddev;
            agg.size_mean = s.mean;
            agg.size_std = s.stddev;
            if (paired_all.size() == acc.size()) {
                const auto t = wilcoxon_signed_rank(acc, paired_all);
                agg.p_value = t.p_value;
                agg.statistic = t.statistic;
            }
        }
        out.push_back(agg);
    }
    return out;
}

Report run_experiment(const ExperimentConfig& c) {
    c.validate();
    const Inputs in = load_inputs(c);
    const auto arms = c.arm_names();

    std::optional<SubspacePool> shared_pool;
    std::optional<Baselines> shared_baselines;
    if (!c.pool_per_replication || !c.pool_file.empty()) {
        shared_pool = make_pool(c, in.training.feature_count(), c.seed);
        // The training rows are the same every replication, so ALL is fitted once.
        try {
            shared_baselines = score_all(train_all(*shared_pool, in.training, c), in.test, c.backend);
        } catch (const Error& e) {
            warn(std::string("ALL baseline could not be fitted: ") + e.what());
            shared_baselines = Baselines{kNaN, kNaN};
        }
    }

    std::vector<std::vector<ReplicationRecord>> per_rep(c.replications);
    std::vector<Baselines> baselines(c.replications);
    kernels::for_each_index(c.backend, c.replications, [&](std::size_t r) {
        per_rep[r] = run_replication(c, in, shared_pool ? &*shared_pool : nullptr,
                                     shared_baselines ? &*shared_baselines : nullptr, r, baselines[r]);
    });

    Report report;
    report.config = c;
    report.test_name = std::string(kSignedRankTestName);
    for (auto& recs : per_rep)
        for (auto& rec : recs) report.records.push_back(std::move(rec));
    for (const auto& b : baselines) {
        report.all_accuracy.push_back(b.all);
        report.oracle.push_back(b.oracle);
    }
    report.aggregates = replicate_stats(report.records, arms, report.all_accuracy);
    const auto all_ok = finite(report.all_accuracy);
    const auto oracle_ok = finite(report.oracle);
    const Summary none{0, kNaN, kNaN};
    const Summary all = all_ok.empty() ? none : summarize(all_ok);
    const Summary oracle = oracle_ok.empty() ? none : summarize(oracle_ok);
    const std::size_t pool_size = shared_pool ? shared_pool->subspaces.size() : c.pool_size;
    report.baselines = {{"ALL", all.mean, all.stddev, pool_size}, {"Oracle", oracle.mean, oracle.stddev, pool_size}};
    return report;
}

Report run_classifier_free(const ExperimentConfig& config) {
    auto c = config;
    c.mode = Mode::Free;
    return run_experiment(c);
}

Report run_classifier_based(const ExperimentConfig& config) {
    auto c = config;
    c.mode = Mode::Based;
    return run_experiment(c);
}

} // namespace divsel
