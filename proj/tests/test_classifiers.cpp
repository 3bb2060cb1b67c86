#include "divsel/classifiers.hpp"
#include "divsel/errors.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace divsel;

namespace {

Dataset one_feature(std::vector<double> xs, std::vector<int> labels, int classes = 2) {
    Dataset d;
    d.samples = Matrix(xs.size(), 1);
    for (std::size_t i = 0; i < xs.size(); ++i) d.samples(i, 0) = xs[i];
    d.labels = std::move(labels);
    d.class_count = classes;
    d.feature_names = {"x"};
    return d;
}

VoteMatrix votes_of(std::vector<std::vector<int>> rows, int classes) {
    VoteMatrix v;
    v.classifiers = rows.size();
    v.samples = rows.empty() ? 0 : rows[0].size();
    v.class_count = classes;
    for (const auto& r : rows) v.votes.insert(v.votes.end(), r.begin(), r.end());
    return v;
}

const Subspace kAll1{{0}};

} // namespace

TEST_CASE("1-NN picks the nearest training point") {
    const auto train_data = one_feature({0.0, 10.0}, {0, 1});
    const auto c = train(Algorithm::Knn, train_data, kAll1);
    CHECK(c.predict(one_feature({1.0, 9.0, 4.9}, {0, 0, 0})) == std::vector<int>{0, 1, 0});
}

TEST_CASE("KNN has zero training error on distinct points") {
    const auto d = generate_synthetic(120, 3, 3, 4, {0.5, 1.0});
    const auto c = train(Algorithm::Knn, d, {{0, 1, 2}});
    CHECK(accuracy(c.predict(d), d.labels) == 1.0);
}

TEST_CASE("QDC with equal spherical classes splits at the midpoint") {
    Rng rng(3);
    std::normal_distribution<double> g;
    std::vector<double> xs;
    std::vector<int> labels;
    // symmetric samples so both class variances are identical
    for (int i = 0; i < 200; ++i) {
        const double e = g(rng);
        xs.push_back(0.0 + e);
        labels.push_back(0);
        xs.push_back(4.0 - e);
        labels.push_back(1);
    }
    const auto c = train(Algorithm::Qdc, one_feature(xs, labels), kAll1);
    CHECK(c.predict(one_feature({1.99, 2.01, -3.0, 7.0}, {0, 0, 0, 0})) == std::vector<int>{0, 1, 0, 1});
}

TEST_CASE("QDC regularizes a singular covariance") {
    // second feature is constant within every class
    Dataset d = generate_synthetic(40, 2, 2, 1, {3.0, 0.5});
    for (std::size_t i = 0; i < d.size(); ++i) d.samples(i, 1) = 7.0;
    const auto c = train(Algorithm::Qdc, d, {{0, 1}});
    const auto& model = std::get<models::Qdc>(c.model());
    CHECK(model.classes[0].ridge > 0.0);
    CHECK(accuracy(c.predict(d), d.labels) > 0.95);
}

TEST_CASE("QDC rejects an empty class") {
    const auto d = one_feature({0.0, 1.0, 2.0}, {0, 0, 0}, 2);
    CHECK_THROWS_AS(train(Algorithm::Qdc, d, kAll1), TrainError);
}

TEST_CASE("Parzen with a tiny bandwidth reproduces training labels") {
    const auto d = generate_synthetic(60, 2, 3, 6, {0.3, 1.0});
    ClassifierParams p;
    p.parzen_bandwidth = 1e-4;
    const auto c = train(Algorithm::Parzen, d, {{0, 1}}, p);
    CHECK(accuracy(c.predict(d), d.labels) == 1.0);
}

TEST_CASE("Parzen separates blobs with the default bandwidth") {
    const auto d = generate_synthetic(90, 2, 3, 2, {5.0, 0.5});
    const auto c = train(Algorithm::Parzen, d, {{0, 1}});
    CHECK(std::get<models::Parzen>(c.model()).bandwidth == doctest::Approx(silverman_bandwidth(d.samples)));
    CHECK(accuracy(c.predict(generate_synthetic(90, 2, 3, 3, {5.0, 0.5})), d.labels) == 1.0);
}

TEST_CASE("silverman_bandwidth follows its closed form") {
    Matrix x(4, 1);
    for (std::size_t i = 0; i < 4; ++i) x(i, 0) = static_cast<double>(i);
    // sample sd of 0..3 is sqrt(5/3); d = 1, n = 4
    const double expected = std::sqrt(5.0 / 3.0) * std::pow(4.0 / (3.0 * 4.0), 1.0 / 5.0);
    CHECK(silverman_bandwidth(x) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("training counter counts fits on this thread") {
    const auto before = training_counter();
    const auto d = one_feature({0.0, 1.0}, {0, 1});
    train(Algorithm::Knn, d, kAll1);
    train(Algorithm::Parzen, d, kAll1);
    CHECK(training_counter() == before + 2);
}

TEST_CASE("predict_votes shapes") {
    const auto d = generate_synthetic(30, 3, 2, 1, {0.5, 1.0});
    const auto a = train(Algorithm::Knn, d, {{0}});
    const auto b = train(Algorithm::Knn, d, {{1, 2}});
    const std::vector<TrainedClassifier> one{a};
    const auto v1 = predict_votes(one, d);
    CHECK(std::vector<int>(v1.row(0).begin(), v1.row(0).end()) == a.predict(d));

    const std::vector<TrainedClassifier> dup{a, b, a};
    const auto v = predict_votes(dup, d);
    CHECK(v.classifiers == 3);
    CHECK(std::equal(v.row(0).begin(), v.row(0).end(), v.row(2).begin()));

    Dataset empty = d;
    empty.samples = Matrix(0, 3);
    empty.labels.clear();
    const auto e = predict_votes(dup, empty);
    CHECK(e.samples == 0);
    CHECK(e.votes.empty());

    Dataset narrow = d;
    narrow.samples = Matrix(d.size(), 2);
    CHECK_THROWS_AS(predict_votes(dup, narrow), IndexError);
}

TEST_CASE("majority_vote") {
    CHECK(majority_vote(votes_of({{0}, {0}, {1}}, 2)) == std::vector<int>{0});
    CHECK(majority_vote(votes_of({{0}, {1}}, 2)) == std::vector<int>{0});
    CHECK(majority_vote(votes_of({{2}, {1}}, 3)) == std::vector<int>{1});
    CHECK(majority_vote(votes_of({{2, 0}, {1, 2}, {2, 2}}, 3)) == std::vector<int>{2, 2});

    // exhaustive tally over every 3x1 vote column with 3 classes
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
            for (int c = 0; c < 3; ++c) {
                int count[3] = {0, 0, 0};
                ++count[a], ++count[b], ++count[c];
                int best = 0;
                for (int k = 1; k < 3; ++k)
                    if (count[k] > count[best]) best = k;
                CHECK(majority_vote(votes_of({{a}, {b}, {c}}, 3))[0] == best);
            }
}

TEST_CASE("identical classifiers vote like one") {
    Rng rng(1);
    const auto row = testing::random_labels(rng, 50, 4);
    CHECK(majority_vote(votes_of({row, row, row, row}, 4)) == row);
}

TEST_CASE("mve, me and oracle_rate") {
    const std::vector<int> truth{0, 1, 1, 0, 1};
    SUBCASE("perfect and all-wrong ensembles") {
        const std::vector<int> wrong{1, 0, 0, 1, 0};
        CHECK(mve(votes_of({truth, truth}, 2), truth) == 0.0);
        CHECK(mve(votes_of({wrong, wrong}, 2), truth) == 1.0);
        CHECK(me(votes_of({truth}, 2), truth) == 0.0);
        CHECK(oracle_rate(votes_of({wrong, truth}, 2), truth) == 1.0);
    }
    SUBCASE("hand tally on five samples") {
        // columns: [0,0,1] [1,0,0] [1,1,1] [1,1,1] [0,0,1]
        const auto v = votes_of({{0, 1, 1, 1, 0}, {0, 0, 1, 1, 0}, {1, 0, 1, 1, 1}}, 2);
        // majority: 0 0 1 1 0 -> correct on samples 0, 2 -> 2 of 5
        CHECK(mve(v, truth) == doctest::Approx(3.0 / 5));
        // individual errors 2/5, 3/5, 3/5
        CHECK(me(v, truth) == doctest::Approx(8.0 / 15));
        // sample 3 has no correct vote
        CHECK(oracle_rate(v, truth) == doctest::Approx(4.0 / 5));
    }
    SUBCASE("two classifiers with errors 0.2 and 0.4") {
        const auto v = votes_of({{1, 1, 1, 0, 1}, {1, 0, 1, 0, 1}}, 2);
        CHECK(me(v, truth) == doctest::Approx(0.3));
    }
    SUBCASE("single-classifier ensembles: me equals mve") {
        Rng rng(3);
        for (int i = 0; i < 20; ++i) {
            const auto row = testing::random_labels(rng, 5, 2);
            const auto v = votes_of({row}, 2);
            CHECK(me(v, truth) == doctest::Approx(mve(v, truth)));
        }
    }
    SUBCASE("shape errors") {
        const auto v = votes_of({{0, 1}}, 2);
        CHECK_THROWS_AS(mve(v, truth), ShapeError);
        CHECK_THROWS_AS(me(v, truth), ShapeError);
        CHECK_THROWS_AS(oracle_rate(v, truth), ShapeError);
    }
}

TEST_CASE("oracle_rate never drops when a classifier joins") {
    Rng rng(7);
    for (int trial = 0; trial < 100; ++trial) {
        const auto truth = testing::random_labels(rng, 30, 3);
        std::vector<std::vector<int>> rows;
        double previous = 0.0;
        for (int e = 0; e < 6; ++e) {
            rows.push_back(testing::random_labels(rng, 30, 3));
            const auto v = votes_of(rows, 3);
            const double o = oracle_rate(v, truth);
            CHECK(o >= previous);
            CHECK(o >= accuracy(majority_vote(v), truth));
            double per_row = 0.0;
            for (const auto& r : rows) per_row += 1.0 - accuracy(r, truth);
            CHECK(me(v, truth) == doctest::Approx(per_row / static_cast<double>(rows.size())));
            previous = o;
        }
    }
}

TEST_CASE("VoteMatrix subset keeps the requested rows in order") {
    const auto v = votes_of({{0, 0}, {1, 1}, {2, 2}}, 3);
    const std::vector<std::size_t> members{2, 0};
    const auto s = v.subset(members);
    CHECK(s.classifiers == 2);
    CHECK(s(0, 1) == 2);
    CHECK(s(1, 0) == 0);
}

TEST_CASE("manifest replay reproduces predictions") {
    const auto d = generate_synthetic(60, 4, 2, 9, {1.0, 1.0});
    ClassifierParams p;
    p.knn_k = 3;
    p.parzen_bandwidth = 0.7;
    const std::vector<TrainedClassifier> ensemble{train(Algorithm::Knn, d, {{0, 2}}, p),
                                                  train(Algorithm::Qdc, d, {{1, 3}}, p),
                                                  train(Algorithm::Parzen, d, {{0, 1, 2}}, p)};
    const auto j = manifest(ensemble);
    const auto replayed = replay_manifest(nlohmann::json::parse(j.dump()), d);
    CHECK(predict_votes(replayed, d).votes == predict_votes(ensemble, d).votes);
}

TEST_CASE("vote matrix CSV") {
    const auto dir = testing::scratch_dir("votes_csv");
    write_csv(votes_of({{0, 1}, {1, 1}}, 2), dir / "v.csv");
    const auto text = testing::read_file(dir / "v.csv");
    CHECK(text.find("0,1") != std::string::npos);
    CHECK(text.find("1,1") != std::string::npos);
}

TEST_CASE("algorithm names") {
    CHECK(parse_algorithm("pwc") == Algorithm::Parzen);
    CHECK(parse_algorithm(to_string(Algorithm::Qdc)) == Algorithm::Qdc);
    CHECK_THROWS_AS(parse_algorithm("svm"), ConfigError);
}
