#pragma once

#include "divsel/classifiers.hpp"
#include "divsel/clustering.hpp"
#include "divsel/dataset.hpp"
#include "divsel/diversity.hpp"
#include "divsel/search.hpp"
#include "divsel/subspace.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace divsel {

enum class Mode { Free, Based };
enum class SearchKind { Ga, Moga };
enum class ErrorObjective { Me, Mve };

std::string_view to_string(Mode m) noexcept;
std::string_view to_string(SearchKind s) noexcept;
std::string_view to_string(ErrorObjective o) noexcept;
Mode parse_mode(std::string_view s);
SearchKind parse_search(std::string_view s);
ErrorObjective parse_error_objective(std::string_view s);

enum class SyntheticSource { None, PimaStyle, Blobs };

struct ExperimentConfig {
    std::string name = "experiment";

    /// Training data, or the whole data set when no test file is given (a
    /// stratified holdout of `test_fraction` then becomes the test set).
    std::filesystem::path data;
    std::filesystem::path test_data;
    /// Disjoint search files. When set, all three replace the nested split
    /// of the training data.
    std::filesystem::path optimization_data;
    std::filesystem::path validation_data;
    std::filesystem::path evaluation_data;
    ColumnRef label_column = std::string("class");
    double test_fraction = 0.5;
    Fractions split = kDefaultFractions;
    /// Score search-time ensembles with classifiers fitted on the training
    /// rows minus the rows being scored. With false, every classifier is
    /// fitted on all training rows, which makes memorizing classifiers such
    /// as 1-NN score perfectly on the nested search splits.
    bool score_holdout = true;

    SyntheticSource synthetic = SyntheticSource::None;
    std::size_t synthetic_samples = 600;
    std::size_t synthetic_features = 8;
    int synthetic_classes = 3;

    std::size_t pool_size = 10;
    std::size_t cardinality = 4;
    std::filesystem::path pool_file;
    /// Draw a fresh pool every replication instead of one pool for all.
    bool pool_per_replication = false;

    /// Fixed cluster count; 0 selects k by Xie-Beni in [k_min, k_max].
    int clusters = 0;
    int k_min = 2;
    int k_max = 10;
    std::size_t kmeans_max_iter = 300;
    double kmeans_tol = 1e-6;
    std::filesystem::path cache_dir;

    Mode mode = Mode::Free;
    SearchKind search = SearchKind::Ga;
    std::vector<DiversityKind> diversity{DiversityKind::Rand};
    std::vector<ErrorObjective> objectives{ErrorObjective::Mve};

    Algorithm classifier = Algorithm::Knn;
    ClassifierParams classifier_params;
    GaConfig ga;

    std::size_t replications = 30;
    std::uint64_t seed = 0;
    kernels::Backend backend = kernels::default_backend();

    /// Throws ConfigError on inconsistent settings or missing files.
    void validate() const;
    /// Names of the selection arms: one per diversity kind or error objective.
    std::vector<std::string> arm_names() const;
};

/// Parses `key = value` lines; `#` starts a comment. Unknown keys and
/// malformed values throw ConfigError naming the line.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Applies one `key = value` setting.
void apply_setting(ExperimentConfig& config, std::string_view key, std::string_view value);
nlohmann::json to_json(const ExperimentConfig& config);

struct ReplicationRecord {
    std::size_t replication = 0;
    std::string arm;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;

    int clusters = 0;
    Genome genome;
    std::size_t size = 0;
    double test_accuracy = 0.0;
    double search_value = 0.0;     ///< raw primary objective on the optimization rows
    double validation_value = 0.0; ///< raw primary objective on the archive-validation rows
    std::optional<double> evaluation_accuracy; ///< classifier-free MOGA only
    std::vector<std::size_t> archive_sizes;     ///< MOGA only, sorted
    std::vector<std::string> skipped;           ///< archive genomes that failed to train
    /// Classifiers fitted by this arm before its search finished.
    std::uint64_t trainings_before_selection = 0;
    /// Split tag of the data each stage consumed.
    std::map<std::string, std::string> provenance;
    History history;
};

struct ArmAggregate {
    std::string arm;
    std::size_t n = 0;
    std::size_t failures = 0;
    double accuracy_mean = 0.0;
    double accuracy_std = 0.0;
    double size_mean = 0.0;
    double size_std = 0.0;
    double p_value = 1.0; ///< paired test against the ALL baseline
    double statistic = 0.0;
};

struct Baseline {
    std::string name; ///< "ALL" or "Oracle"
    double mean = 0.0;
    double stddev = 0.0;
    std::size_t size = 0;
};

struct Report {
    ExperimentConfig config;
    std::vector<ReplicationRecord> records; ///< ordered by (replication, arm)
    std::vector<ArmAggregate> aggregates;
    std::vector<Baseline> baselines;
    std::vector<double> all_accuracy; ///< ALL baseline per replication
    std::vector<double> oracle;       ///< oracle rate per replication
    std::string test_name;
};

/// Mean and sample standard deviation of accuracy and size over the
/// successful records of each arm, plus the paired test against ALL.
std::vector<ArmAggregate> replicate_stats(const std::vector<ReplicationRecord>& records,
                                          const std::vector<std::string>& arms,
                                          const std::vector<double>& all_accuracy);

struct ParetoChoice {
    Genome genome;
    double accuracy = 0.0;
    std::vector<std::string> skipped;
};

/// Trains an ensemble per archived genome and keeps the most accurate on
/// `evaluation`; ties go to the smaller ensemble, then the lower bit pattern.
/// Throws TrainError when every genome fails.
ParetoChoice evaluate_pareto(const ParetoArchive& archive, const SubspacePool& pool, const Dataset& training,
                             const Dataset& evaluation, const ExperimentConfig& config);

std::vector<TrainedClassifier> train_ensemble(const SubspacePool& pool, const Genome& genome,
                                              const Dataset& training, const ExperimentConfig& config);

Report run_classifier_free(const ExperimentConfig& config);
Report run_classifier_based(const ExperimentConfig& config);
/// Dispatches on config.mode.
Report run_experiment(const ExperimentConfig& config);

nlohmann::json to_json(const Report& report);
/// One row per arm plus ALL and Oracle rows, accuracies in percent.
std::string to_csv(const Report& report);
/// Writes report.json, report.csv and history_r<r>_<arm>.jsonl into `dir`.
void write_report(const Report& report, const std::filesystem::path& dir);

} // namespace divsel
