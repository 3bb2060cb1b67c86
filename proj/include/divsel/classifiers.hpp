#pragma once

#include "divsel/dataset.hpp"
#include "divsel/kernels.hpp"
#include "divsel/subspace.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

namespace divsel {

enum class Algorithm { Knn, Qdc, Parzen };

std::string_view to_string(Algorithm a) noexcept;
/// Accepts knn, qdc, parzen (or pwc).
Algorithm parse_algorithm(std::string_view name);

struct ClassifierParams {
    std::size_t knn_k = 1;
    /// Parzen kernel width; unset means Silverman's rule on the training data.
    std::optional<double> parzen_bandwidth;
};

namespace models {

struct Knn {
    std::size_t k = 1;
    Matrix points;
    std::vector<int> labels;
};

struct QdcClass {
    std::vector<double> mean;
    Matrix inverse_covariance;
    double log_det = 0.0;
    double log_prior = 0.0;
    double ridge = 0.0; ///< regularization that was needed, 0 when none
};

struct Qdc {
    std::vector<QdcClass> classes;
};

struct Parzen {
    double bandwidth = 1.0;
    Matrix points;
    std::vector<int> labels;
};

} // namespace models

/// A classifier fitted on one subspace. Immutable after training.
class TrainedClassifier {
public:
    using Model = std::variant<models::Knn, models::Qdc, models::Parzen>;

    TrainedClassifier(Algorithm algorithm, Subspace subspace, int class_count, ClassifierParams params, Model model);

    Algorithm algorithm() const noexcept { return algorithm_; }
    const Subspace& subspace() const noexcept { return subspace_; }
    int class_count() const noexcept { return class_count_; }
    const ClassifierParams& params() const noexcept { return params_; }
    const Model& model() const noexcept { return model_; }

    /// Crisp labels for every row of `data` (full feature space).
    std::vector<int> predict(const Dataset& data, kernels::Backend backend = kernels::default_backend()) const;

private:
    Algorithm algorithm_;
    Subspace subspace_;
    int class_count_;
    ClassifierParams params_;
    Model model_;
};

/// Fits `algorithm` on the projection of `train_data` onto `subspace`.
/// QDC covariances that are not positive definite get a ridge of
/// 1e-6 * trace / f, grown tenfold until the Cholesky factorization succeeds.
TrainedClassifier train(Algorithm algorithm, const Dataset& train_data, const Subspace& subspace,
                        const ClassifierParams& params = {});

/// Number of train() calls made on the current thread; lets pipelines prove
/// that no classifier was fitted during a given stage.
std::uint64_t training_counter() noexcept;

/// Silverman's rule bandwidth: mean feature standard deviation times
/// (4 / ((d + 2) n))^(1 / (d + 4)).
double silverman_bandwidth(const Matrix& points);

/// votes(e, x): label of sample x from classifier e.
struct VoteMatrix {
    std::size_t classifiers = 0;
    std::size_t samples = 0;
    int class_count = 0;
    std::vector<int> votes;

    int operator()(std::size_t e, std::size_t x) const { return votes[e * samples + x]; }
    std::span<const int> row(std::size_t e) const { return {votes.data() + e * samples, samples}; }

    /// Rows `members` only, in that order.
    VoteMatrix subset(std::span<const std::size_t> members) const;
};

VoteMatrix predict_votes(std::span<const TrainedClassifier> ensemble, const Dataset& data,
                         kernels::Backend backend = kernels::default_backend());

/// Modal label per sample; ties go to the smallest class id.
std::vector<int> majority_vote(const VoteMatrix& votes);

/// 1 - accuracy of the majority vote.
double mve(const VoteMatrix& votes, std::span<const int> labels);
/// Mean individual error rate.
double me(const VoteMatrix& votes, std::span<const int> labels);
/// Fraction of samples that at least one classifier labels correctly.
double oracle_rate(const VoteMatrix& votes, std::span<const int> labels);
double accuracy(std::span<const int> predicted, std::span<const int> labels);

nlohmann::json manifest(std::span<const TrainedClassifier> ensemble);
/// Refits the classifiers described by a manifest on `train_data`.
std::vector<TrainedClassifier> replay_manifest(const nlohmann::json& manifest, const Dataset& train_data);
void write_csv(const VoteMatrix& votes, const std::filesystem::path& path);

} // namespace divsel
