#include "divsel/classifiers.hpp"

#include "divsel/errors.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

namespace divsel {

namespace {

thread_local std::uint64_t trainings = 0;

using EigenMatrix = Eigen::MatrixXd;
using EigenVector = Eigen::VectorXd;

int argmax_first(std::span<const double> scores) {
    int best = 0;
    for (std::size_t c = 1; c < scores.size(); ++c)
        if (scores[c] > scores[static_cast<std::size_t>(best)]) best = static_cast<int>(c);
    return best;
}

// Cholesky succeeds and the factor is not numerically rank deficient.
bool factor(const EigenMatrix& cov, Eigen::LLT<EigenMatrix>& llt) {
    llt.compute(cov);
    if (llt.info() != Eigen::Success) return false;
    const EigenVector diag = llt.matrixL().toDenseMatrix().diagonal();
    const double lo = diag.minCoeff(), hi = diag.maxCoeff();
    return lo > 0.0 && std::isfinite(hi) && (lo * lo) / (hi * hi) > 1e-14;
}

models::Qdc fit_qdc(const Matrix& x, std::span<const int> labels, int class_count) {
    const std::size_t f = x.cols();
    std::vector<std::size_t> counts(static_cast<std::size_t>(class_count), 0);
    for (int l : labels) ++counts[static_cast<std::size_t>(l)];

    models::Qdc model;
    for (int c = 0; c < class_count; ++c) {
        const auto nc = counts[static_cast<std::size_t>(c)];
        if (nc == 0) throw TrainError("QDC: class " + std::to_string(c) + " has no training samples");
        EigenVector mean = EigenVector::Zero(static_cast<Eigen::Index>(f));
        for (std::size_t i = 0; i < x.rows(); ++i)
            if (labels[i] == c)
                for (std::size_t j = 0; j < f; ++j) mean[static_cast<Eigen::Index>(j)] += x(i, j);
        mean /= static_cast<double>(nc);
        EigenMatrix cov = EigenMatrix::Zero(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(f));
        for (std::size_t i = 0; i < x.rows(); ++i) {
            if (labels[i] != c) continue;
            EigenVector d(static_cast<Eigen::Index>(f));
            for (std::size_t j = 0; j < f; ++j)
                d[static_cast<Eigen::Index>(j)] = x(i, j) - mean[static_cast<Eigen::Index>(j)];
            cov.noalias() += d * d.transpose();
        }
        if (nc > 1) cov /= static_cast<double>(nc - 1);

        Eigen::LLT<EigenMatrix> llt;
        double ridge = 0.0;
        if (!factor(cov, llt)) {
            const double trace = cov.trace();
            ridge = trace > 0.0 ? 1e-6 * trace / static_cast<double>(f) : 1e-6;
            const auto identity = EigenMatrix::Identity(cov.rows(), cov.cols());
            int attempts = 0;
            while (!factor(cov + ridge * identity, llt)) {
                if (++attempts > 20) throw TrainError("QDC: covariance of class " + std::to_string(c) + " stays singular");
                ridge *= 10.0;
            }
        }
        models::QdcClass qc;
        qc.mean.assign(mean.data(), mean.data() + mean.size());
        const EigenMatrix inv = llt.solve(EigenMatrix::Identity(cov.rows(), cov.cols()));
        qc.inverse_covariance = Matrix(f, f);
        for (std::size_t a = 0; a < f; ++a)
            for (std::size_t b = 0; b < f; ++b)
                qc.inverse_covariance(a, b) = inv(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
        const EigenVector diag = llt.matrixL().toDenseMatrix().diagonal();
        qc.log_det = 2.0 * diag.array().log().sum();
        qc.log_prior = std::log(static_cast<double>(nc) / static_cast<double>(x.rows()));
        qc.ridge = ridge;
        model.classes.push_back(std::move(qc));
    }
    return model;
}

int predict_qdc(const models::Qdc& m, std::span<const double> x) {
    std::vector<double> scores(m.classes.size());
    std::vector<double> d(x.size());
    for (std::size_t c = 0; c < m.classes.size(); ++c) {
        const auto& qc = m.classes[c];
        for (std::size_t j = 0; j < x.size(); ++j) d[j] = x[j] - qc.mean[j];
        double q = 0.0;
        for (std::size_t a = 0; a < x.size(); ++a) {
            double row = 0.0;
            for (std::size_t b = 0; b < x.size(); ++b) row += qc.inverse_covariance(a, b) * d[b];
            q += d[a] * row;
        }
        scores[c] = -0.5 * qc.log_det - 0.5 * q + qc.log_prior;
    }
    return argmax_first(scores);
}

int predict_parzen(const models::Parzen& m, int class_count, std::span<const double> x) {
    // log-sum-exp of Gaussian kernels per class; robust for tiny bandwidths
    const double inv = 1.0 / (2.0 * m.bandwidth * m.bandwidth);
    std::vector<double> peak(static_cast<std::size_t>(class_count), -std::numeric_limits<double>::infinity());
    std::vector<double> logk(m.points.rows());
    for (std::size_t t = 0; t < m.points.rows(); ++t) {
        const auto p = m.points.row(t);
        double d = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) {
            const double diff = x[j] - p[j];
            d += diff * diff;
        }
        logk[t] = -d * inv;
        auto& pk = peak[static_cast<std::size_t>(m.labels[t])];
        pk = std::max(pk, logk[t]);
    }
    std::vector<double> sums(static_cast<std::size_t>(class_count), 0.0);
    for (std::size_t t = 0; t < m.points.rows(); ++t) {
        const auto c = static_cast<std::size_t>(m.labels[t]);
        sums[c] += std::exp(logk[t] - peak[c]);
    }
    std::vector<double> scores(static_cast<std::size_t>(class_count));
    for (std::size_t c = 0; c < scores.size(); ++c)
        scores[c] = sums[c] > 0.0 ? peak[c] + std::log(sums[c]) : -std::numeric_limits<double>::infinity();
    return argmax_first(scores);
}

} // namespace

std::string_view to_string(Algorithm a) noexcept {
    switch (a) {
    case Algorithm::Knn: return "knn";
    case Algorithm::Qdc: return "qdc";
    case Algorithm::Parzen: return "parzen";
    }
    return "unknown";
}

Algorithm parse_algorithm(std::string_view name) {
    if (name == "knn") return Algorithm::Knn;
    if (name == "qdc") return Algorithm::Qdc;
    if (name == "parzen" || name == "pwc") return Algorithm::Parzen;
    throw ConfigError("unknown classifier '" + std::string(name) + "'");
}

std::uint64_t training_counter() noexcept { return trainings; }

double silverman_bandwidth(const Matrix& x) {
    const std::size_t n = x.rows(), d = x.cols();
    if (n < 2) return 1.0;
    double mean_sd = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
        double mu = 0.0;
        for (std::size_t i = 0; i < n; ++i) mu += x(i, j);
        mu /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t i = 0; i < n; ++i) var += (x(i, j) - mu) * (x(i, j) - mu);
        mean_sd += std::sqrt(var / static_cast<double>(n - 1));
    }
    mean_sd /= static_cast<double>(d);
    if (mean_sd <= 0.0) return 1.0;
    return mean_sd * std::pow(4.0 / ((static_cast<double>(d) + 2.0) * static_cast<double>(n)),
                              1.0 / (static_cast<double>(d) + 4.0));
}

TrainedClassifier::TrainedClassifier(Algorithm algorithm, Subspace subspace, int class_count, ClassifierParams params,
                                     Model model)
    : algorithm_(algorithm), subspace_(std::move(subspace)), class_count_(class_count), params_(params),
      model_(std::move(model)) {}

TrainedClassifier train(Algorithm algorithm, const Dataset& train_data, const Subspace& subspace,
                        const ClassifierParams& params) {
    ++trainings;
    if (train_data.size() == 0) throw TrainError("empty training set");
    const Dataset projected = project(train_data, subspace);
    switch (algorithm) {
    case Algorithm::Knn: {
        if (params.knn_k < 1) throw ConfigError("knn_k must be at least 1");
        return {algorithm, subspace, train_data.class_count, params,
                models::Knn{params.knn_k, projected.samples, projected.labels}};
    }
    case Algorithm::Qdc:
        return {algorithm, subspace, train_data.class_count, params,
                fit_qdc(projected.samples, projected.labels, train_data.class_count)};
    case Algorithm::Parzen: {
        const double h = params.parzen_bandwidth.value_or(silverman_bandwidth(projected.samples));
        if (!(h > 0.0) || !std::isfinite(h)) throw ConfigError("Parzen bandwidth must be positive");
        return {algorithm, subspace, train_data.class_count, params,
                models::Parzen{h, projected.samples, projected.labels}};
    }
    }
    throw ConfigError("unknown classifier");
}

std::vector<int> TrainedClassifier::predict(const Dataset& data, kernels::Backend backend) const {
    const Dataset x = project(data, subspace_);
    std::vector<int> out(x.size());
    std::visit(
        [&](const auto& m) {
            using M = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<M, models::Knn>) {
                kernels::knn_predict(backend, m.points, m.labels, class_count_, m.k, x.samples, out);
            } else if constexpr (std::is_same_v<M, models::Qdc>) {
                kernels::for_each_index(backend, x.size(),
                                        [&](std::size_t i) { out[i] = predict_qdc(m, x.samples.row(i)); });
            } else {
                kernels::for_each_index(backend, x.size(),
                                        [&](std::size_t i) { out[i] = predict_parzen(m, class_count_, x.samples.row(i)); });
            }
        },
        model_);
    return out;
}

// --- fusion -----------------------------------------------------------------

VoteMatrix VoteMatrix::subset(std::span<const std::size_t> members) const {
    VoteMatrix out;
    out.classifiers = members.size();
    out.samples = samples;
    out.class_count = class_count;
    out.votes.reserve(members.size() * samples);
    for (auto e : members) {
        if (e >= classifiers) throw IndexError("classifier index " + std::to_string(e) + " out of range");
        auto r = row(e);
        out.votes.insert(out.votes.end(), r.begin(), r.end());
    }
    return out;
}

VoteMatrix predict_votes(std::span<const TrainedClassifier> ensemble, const Dataset& data, kernels::Backend backend) {
    VoteMatrix v;
    v.classifiers = ensemble.size();
    v.samples = data.size();
    v.class_count = data.class_count;
    for (const auto& c : ensemble) v.class_count = std::max(v.class_count, c.class_count());
    v.votes.reserve(v.classifiers * v.samples);
    for (const auto& c : ensemble) {
        auto p = c.predict(data, backend);
        v.votes.insert(v.votes.end(), p.begin(), p.end());
    }
    return v;
}

std::vector<int> majority_vote(const VoteMatrix& v) {
    if (v.classifiers == 0) throw ShapeError("majority vote of an empty ensemble");
    int classes = v.class_count;
    for (int x : v.votes) classes = std::max(classes, x + 1);
    std::vector<int> out(v.samples);
    std::vector<std::size_t> tally(static_cast<std::size_t>(classes));
    for (std::size_t x = 0; x < v.samples; ++x) {
        std::fill(tally.begin(), tally.end(), 0);
        for (std::size_t e = 0; e < v.classifiers; ++e) ++tally[static_cast<std::size_t>(v(e, x))];
        out[x] = static_cast<int>(std::max_element(tally.begin(), tally.end()) - tally.begin());
    }
    return out;
}

namespace {
void check_labels(const VoteMatrix& v, std::span<const int> labels) {
    if (labels.size() != v.samples)
        throw ShapeError("vote matrix covers " + std::to_string(v.samples) + " samples, " +
                         std::to_string(labels.size()) + " labels given");
    if (v.samples == 0) throw ShapeError("no samples to score");
    if (v.classifiers == 0) throw ShapeError("empty ensemble");
}
} // namespace

double accuracy(std::span<const int> predicted, std::span<const int> labels) {
    if (predicted.size() != labels.size()) throw ShapeError("prediction/label length mismatch");
    if (labels.empty()) throw ShapeError("no samples to score");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) hits += predicted[i] == labels[i];
    return static_cast<double>(hits) / static_cast<double>(labels.size());
}

double mve(const VoteMatrix& v, std::span<const int> labels) {
    check_labels(v, labels);
    return 1.0 - accuracy(majority_vote(v), labels);
}

double me(const VoteMatrix& v, std::span<const int> labels) {
    check_labels(v, labels);
    double total = 0.0;
    for (std::size_t e = 0; e < v.classifiers; ++e) total += 1.0 - accuracy(v.row(e), labels);
    return total / static_cast<double>(v.classifiers);
}

double oracle_rate(const VoteMatrix& v, std::span<const int> labels) {
    check_labels(v, labels);
    std::size_t hits = 0;
    for (std::size_t x = 0; x < v.samples; ++x) {
        for (std::size_t e = 0; e < v.classifiers; ++e) {
            if (v(e, x) == labels[x]) {
                ++hits;
                break;
            }
        }
    }
    return static_cast<double>(hits) / static_cast<double>(v.samples);
}

// --- manifests ------------------------------------------------------------

nlohmann::json manifest(std::span<const TrainedClassifier> ensemble) {
    nlohmann::json members = nlohmann::json::array();
    for (const auto& c : ensemble) {
        nlohmann::json params = {{"knn_k", c.params().knn_k}};
        if (const auto* p = std::get_if<models::Parzen>(&c.model())) params["parzen_bandwidth"] = p->bandwidth;
        members.push_back({{"algorithm", to_string(c.algorithm())}, {"params", params}, {"subspace", c.subspace().features}});
    }
    return {{"classifiers", members}};
}

std::vector<TrainedClassifier> replay_manifest(const nlohmann::json& j, const Dataset& train_data) {
    std::vector<TrainedClassifier> out;
    try {
        for (const auto& m : j.at("classifiers")) {
            ClassifierParams params;
            const auto& p = m.at("params");
            params.knn_k = p.value("knn_k", std::size_t{1});
            if (p.contains("parzen_bandwidth")) params.parzen_bandwidth = p.at("parzen_bandwidth").get<double>();
            Subspace s{m.at("subspace").get<std::vector<std::size_t>>()};
            out.push_back(train(parse_algorithm(m.at("algorithm").get<std::string>()), train_data, s, params));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed ensemble manifest: ") + e.what());
    }
    return out;
}

void write_csv(const VoteMatrix& v, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    for (std::size_t e = 0; e < v.classifiers; ++e) {
        for (std::size_t x = 0; x < v.samples; ++x) out << (x ? "," : "") << v(e, x);
        out << '\n';
    }
}

} // namespace divsel
