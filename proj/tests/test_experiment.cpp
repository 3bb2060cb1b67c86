#include "divsel/errors.hpp"
#include "divsel/experiment.hpp"
#include "divsel/log.hpp"
#include "divsel/stats.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

using namespace divsel;

namespace {

ExperimentConfig small_blobs() {
    ExperimentConfig c;
    c.synthetic = SyntheticSource::Blobs;
    c.synthetic_samples = 240;
    c.synthetic_features = 8;
    c.synthetic_classes = 3;
    c.pool_size = 10;
    c.cardinality = 4;
    c.k_max = 5;
    c.replications = 3;
    c.ga.population_size = 20;
    c.ga.generations = 40;
    c.seed = 5;
    return c;
}

// Feature 0 separates the classes; the rest are noise.
Dataset one_good_feature(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    Dataset d;
    d.samples = Matrix(n, 5);
    d.labels.resize(n);
    d.class_count = 2;
    for (std::size_t i = 0; i < n; ++i) {
        const int y = static_cast<int>(i % 2);
        d.labels[i] = y;
        d.samples(i, 0) = 10.0 * y + 0.1 * uniform01(rng);
        for (std::size_t f = 1; f < 5; ++f) d.samples(i, f) = uniform01(rng);
    }
    for (std::size_t f = 0; f < 5; ++f) d.feature_names.push_back("f" + std::to_string(f));
    d.class_names = {"a", "b"};
    return d;
}

SubspacePool singletons(std::size_t features) {
    SubspacePool p;
    p.cardinality = 1;
    p.total_features = features;
    for (std::size_t f = 0; f < features; ++f) p.subspaces.push_back({{f}});
    return p;
}

} // namespace

TEST_CASE("parse_config") {
    const auto c = parse_config("# demo\n"
                                "name = run1\n"
                                "synthetic = blobs   # inline comment\n"
                                "diversity = rand, mirkin,jacard\n"
                                "objective = me,mve\n"
                                "split = 0.6, 0.2, 0.2\n"
                                "backend = serial\n"
                                "mutation_prob = auto\n"
                                "search = nsga2\n"
                                "knn_k = 3\n");
    CHECK(c.name == "run1");
    CHECK(c.synthetic == SyntheticSource::Blobs);
    CHECK(c.diversity == std::vector{DiversityKind::Rand, DiversityKind::Mirkin, DiversityKind::Jacard});
    CHECK(c.objectives == std::vector{ErrorObjective::Me, ErrorObjective::Mve});
    CHECK(c.split[0] == doctest::Approx(0.6));
    CHECK(c.backend == kernels::Backend::Serial);
    CHECK(c.search == SearchKind::Moga);
    CHECK(c.classifier_params.knn_k == 3);

    try {
        parse_config("name = x\n\nbogus = 1\n");
        FAIL("unknown key accepted");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_config("pool_size = ten\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("diversity = entropy\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("just some words\n"), ConfigError);
}

TEST_CASE("config validation and round trip") {
    auto c = small_blobs();
    CHECK_NOTHROW(c.validate());
    c.clusters = 1;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = small_blobs();
    c.data = "/nonexistent/file.csv";
    c.synthetic = SyntheticSource::None;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = small_blobs();
    c.optimization_data = "x.csv";
    CHECK_THROWS_AS(c.validate(), ConfigError);

    c = small_blobs();
    apply_setting(c, "generations", "7");
    CHECK(c.ga.generations == 7);
    const auto j = to_json(c);
    CHECK(j["name"] == "experiment");
    CHECK_FALSE(j.contains("backend"));
    CHECK(c.arm_names() == std::vector<std::string>{"rand"});
}

TEST_CASE("GA classifier-free selects three members every replication") {
    // blobs would give identical partitions everywhere and a flat objective
    auto c = small_blobs();
    c.synthetic = SyntheticSource::PimaStyle;
    c.clusters = 3;
    const auto r = run_experiment(c);
    REQUIRE(r.aggregates.size() == 1);
    CHECK(r.aggregates[0].failures == 0);
    CHECK(r.aggregates[0].size_mean == 3.0);
    CHECK(r.aggregates[0].size_std == 0.0);
    for (const auto& rec : r.records) {
        CHECK(rec.ok);
        CHECK(rec.clusters == 3);
        CHECK(rec.size == 3);
        CHECK(rec.trainings_before_selection == 0);
        CHECK(rec.history.size() == 41);
    }
}

TEST_CASE("classifier-free MOGA never hands test rows to a search stage") {
    auto c = small_blobs();
    c.search = SearchKind::Moga;
    c.diversity = {DiversityKind::Rand, DiversityKind::Wallace1};
    const auto r = run_experiment(c);
    REQUIRE(r.records.size() == 6);
    for (const auto& rec : r.records) {
        REQUIRE(rec.ok);
        CHECK(rec.trainings_before_selection == 0);
        CHECK(rec.evaluation_accuracy.has_value());
        CHECK_FALSE(rec.archive_sizes.empty());
        CHECK(std::find(rec.archive_sizes.begin(), rec.archive_sizes.end(), rec.size) != rec.archive_sizes.end());
        for (const auto& [stage, tag] : rec.provenance) {
            if (stage == "test")
                CHECK(tag == std::string("test"));
            else
                CHECK(tag != std::string("test"));
        }
        CHECK(rec.provenance.at("search") == std::string("optimization"));
        CHECK(rec.provenance.at("pareto_evaluation") == std::string("evaluation"));
    }
}

TEST_CASE("reports are deterministic and independent of the backend") {
    auto c = small_blobs();
    c.search = SearchKind::Moga;
    c.replications = 2;
    const auto a = to_json(run_experiment(c)).dump();
    CHECK(a == to_json(run_experiment(c)).dump());
    c.backend = kernels::Backend::Serial;
    CHECK(a == to_json(run_experiment(c)).dump());
    c.seed = 6;
    CHECK(a != to_json(run_experiment(c)).dump());
}

TEST_CASE("aggregates recompute from the records") {
    auto c = small_blobs();
    c.replications = 5;
    c.diversity = {DiversityKind::Rand, DiversityKind::Mirkin};
    const auto r = run_experiment(c);
    const auto again = replicate_stats(r.records, c.arm_names(), r.all_accuracy);
    REQUIRE(again.size() == r.aggregates.size());
    for (std::size_t i = 0; i < again.size(); ++i) {
        CHECK(again[i].accuracy_mean == r.aggregates[i].accuracy_mean);
        CHECK(again[i].p_value == r.aggregates[i].p_value);
        std::vector<double> acc;
        for (const auto& rec : r.records)
            if (rec.arm == again[i].arm) acc.push_back(rec.test_accuracy);
        CHECK(summarize(acc).mean == doctest::Approx(r.aggregates[i].accuracy_mean));
    }
    REQUIRE(r.baselines.size() == 2);
    CHECK(r.baselines[0].name == "ALL");
    CHECK(r.baselines[1].mean >= r.baselines[0].mean);
    CHECK(r.test_name == kSignedRankTestName);
}

TEST_CASE("evaluate_pareto") {
    const auto train = [] {
        auto d = one_good_feature(80, 1);
        d.tag = SplitTag::Training;
        return d;
    }();
    auto eval = one_good_feature(60, 2);
    eval.tag = SplitTag::Evaluation;
    const auto pool = singletons(5);
    ExperimentConfig c;
    c.backend = kernels::Backend::Serial;

    SUBCASE("single entry") {
        ParetoArchive a({Orientation::Maximize});
        a.insert({Genome::from_string("01110"), {0.3}, {0.3}});
        const auto choice = evaluate_pareto(a, pool, train, eval, c);
        CHECK(choice.genome.to_string() == "01110");
        CHECK(choice.skipped.empty());
    }
    SUBCASE("the ensemble holding the perfect classifier wins, and matches an exhaustive re-score") {
        ParetoArchive a({Orientation::Maximize, Orientation::Maximize});
        const std::vector<std::pair<std::string, double>> entries{
            {"01110", 0.9}, {"11100", 0.5}, {"01111", 0.8}, {"10011", 0.4}, {"11111", 0.1}};
        for (const auto& [bits, v] : entries) {
            const auto g = Genome::from_string(bits);
            // distinct trade-offs so nothing is evicted
            REQUIRE(a.insert({g, {v, static_cast<double>(g.popcount()) + v}, {v, 1.0 - v}}));
        }
        REQUIRE(a.size() == entries.size());
        const auto choice = evaluate_pareto(a, pool, train, eval, c);
        double best = -1.0;
        for (const auto& e : a.entries()) {
            const auto ens = train_ensemble(pool, e.genome, train, c);
            best = std::max(best, 1.0 - mve(predict_votes(ens, eval, c.backend), eval.labels));
        }
        CHECK(choice.accuracy == best);
        CHECK(choice.genome.test(0));
        // "11100" and "10011" tie on accuracy... whichever way, the smallest tied ensemble is kept
        std::size_t min_tied = 99;
        for (const auto& e : a.entries()) {
            const auto ens = train_ensemble(pool, e.genome, train, c);
            if (1.0 - mve(predict_votes(ens, eval, c.backend), eval.labels) == best)
                min_tied = std::min(min_tied, e.genome.popcount());
        }
        CHECK(choice.genome.popcount() == min_tied);
    }
    SUBCASE("test rows are refused") {
        ParetoArchive a({Orientation::Maximize});
        a.insert({Genome::from_string("11100"), {0.3}, {0.3}});
        auto test = eval;
        test.tag = SplitTag::Test;
        CHECK_THROWS_AS(evaluate_pareto(a, pool, train, test, c), ConfigError);
        CHECK_THROWS_AS(train_ensemble(pool, Genome::from_string("11100"), test, c), ConfigError);
        CHECK_THROWS_AS(evaluate_pareto(ParetoArchive({Orientation::Maximize}), pool, train, eval, c),
                        DegenerateError);
    }
}

TEST_CASE("classifier-based mode") {
    const auto dir = testing::scratch_dir("experiment_based");
    write_csv(one_good_feature(200, 3), dir / "train.csv");
    write_csv(one_good_feature(100, 4), dir / "test.csv");
    save_pool(singletons(5), dir / "pool.json");

    ExperimentConfig c;
    c.data = dir / "train.csv";
    c.test_data = dir / "test.csv";
    c.pool_file = dir / "pool.json";
    c.mode = Mode::Based;
    c.objectives = {ErrorObjective::Me, ErrorObjective::Mve};
    c.replications = 4;
    c.ga.population_size = 16;
    c.ga.generations = 30;
    c.classifier_params.knn_k = 3;
    const auto r = run_experiment(c);

    for (const auto& rec : r.records) {
        REQUIRE(rec.ok);
        CHECK(rec.trainings_before_selection > 0);
        CHECK(rec.provenance.at("search_fit") == "archive_validation+evaluation");
        // ME is lowest with the perfect member in the ensemble
        if (rec.arm == "me") CHECK(rec.genome.test(0));
    }

    // ALL is the majority vote of the whole pool fitted on the training file
    const auto train = load_csv(c.data, c.label_column);
    const auto test = load_csv(c.test_data, c.label_column);
    auto tagged = train;
    tagged.tag = SplitTag::Training;
    const auto ens = train_ensemble(singletons(5), Genome::from_string("11111"), tagged, c);
    const double all = accuracy(majority_vote(predict_votes(ens, test)), test.labels);
    for (double a : r.all_accuracy) CHECK(a == doctest::Approx(all));

    SUBCASE("a perfect pool reaches zero validation error") {
        auto blobs = small_blobs();
        blobs.mode = Mode::Based;
        blobs.replications = 2;
        const auto b = run_experiment(blobs);
        for (const auto& rec : b.records) {
            REQUIRE(rec.ok);
            CHECK(rec.validation_value == 0.0);
            CHECK(rec.test_accuracy == 1.0);
        }
    }
}

TEST_CASE("failed replications are reported without aborting") {
    const auto dir = testing::scratch_dir("experiment_fail");
    // the class c rows overflow every covariance entry, so QDC cannot be fitted
    std::ostringstream train, test;
    train << "x,y,class\n";
    test << "x,y,class\n";
    Rng rng(9);
    for (int i = 0; i < 60; ++i) {
        train << uniform01(rng) + (i % 2) * 5 << ',' << uniform01(rng) << ',' << (i % 2 ? 'b' : 'a') << '\n';
        test << uniform01(rng) + (i % 2) * 5 << ',' << uniform01(rng) << ',' << (i % 2 ? 'b' : 'a') << '\n';
    }
    train << "1e300,1e300,c\n-1e300,-1e300,c\n1e300,-1e300,c\n";
    test << "9,9,c\n";
    testing::write_file(dir / "train.csv", train.str());
    testing::write_file(dir / "test.csv", test.str());

    ExperimentConfig c;
    c.data = dir / "train.csv";
    c.test_data = dir / "test.csv";
    c.classifier = Algorithm::Qdc;
    c.pool_size = 4;
    c.cardinality = 1;
    c.clusters = 2;
    c.replications = 3;
    c.ga.population_size = 8;
    c.ga.generations = 5;
    Report r;
    {
        ScopedWarningCapture warnings;
        REQUIRE_NOTHROW(r = run_experiment(c));
        const auto& m = warnings.messages();
        CHECK(std::any_of(m.begin(), m.end(), [](const auto& w) { return w.find("ALL baseline") != std::string::npos; }));
    }
    REQUIRE(r.aggregates.size() == 1);
    CHECK(r.aggregates[0].failures == 3);
    CHECK(r.aggregates[0].n == 0);
    for (const auto& rec : r.records) {
        CHECK_FALSE(rec.ok);
        CHECK(rec.error.find("stays singular") != std::string::npos);
    }
    CHECK(std::isnan(r.baselines[0].mean));
    const auto out = testing::scratch_dir("experiment_fail_out");
    write_report(r, out);
    CHECK(nlohmann::json::parse(testing::read_file(out / "report.json"))["records"].size() == 3);
}

TEST_CASE("write_report") {
    auto c = small_blobs();
    c.replications = 2;
    c.diversity = {DiversityKind::Rand, DiversityKind::FowlkesMallows};
    const auto r = run_experiment(c);
    const auto dir = testing::scratch_dir("experiment_report");
    write_report(r, dir);
    CHECK(std::filesystem::exists(dir / "report.json"));
    CHECK(std::filesystem::exists(dir / "history_r0_rand.jsonl"));
    CHECK(std::filesystem::exists(dir / "history_r1_fm.jsonl"));
    const auto csv = testing::read_file(dir / "report.csv");
    CHECK(csv.rfind("dataset,classifier,search,mode,method,n,failures,", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 5); // header, 2 arms, ALL, Oracle
    CHECK(csv.find("ALL") != std::string::npos);
    CHECK(csv == to_csv(r));
    const auto j = nlohmann::json::parse(testing::read_file(dir / "report.json"));
    CHECK(j["test"] == "wilcoxon-signed-rank");
    CHECK(j["aggregates"].size() == 2);
}

TEST_CASE("disjoint search files") {
    const auto dir = testing::scratch_dir("experiment_disjoint");
    write_csv(generate_synthetic(90, 6, 3, 1), dir / "train.csv");
    write_csv(generate_synthetic(60, 6, 3, 2), dir / "test.csv");
    write_csv(generate_synthetic(60, 6, 3, 3), dir / "opt.csv");
    write_csv(generate_synthetic(30, 6, 3, 4), dir / "val.csv");
    write_csv(generate_synthetic(30, 6, 3, 5), dir / "eval.csv");
    ExperimentConfig c;
    c.data = dir / "train.csv";
    c.test_data = dir / "test.csv";
    c.optimization_data = dir / "opt.csv";
    c.validation_data = dir / "val.csv";
    c.evaluation_data = dir / "eval.csv";
    c.search = SearchKind::Moga;
    c.pool_size = 6;
    c.cardinality = 3;
    c.replications = 2;
    c.ga.population_size = 12;
    c.ga.generations = 10;
    const auto r = run_experiment(c);
    for (const auto& rec : r.records) {
        REQUIRE(rec.ok);
        CHECK(rec.provenance.at("pareto_fit") == "training");
        CHECK(rec.evaluation_accuracy == 1.0);
    }
}

TEST_CASE("load_config resolves paths against the config file") {
    const char* env = std::getenv("DIVSEL_TEST_DATA");
    REQUIRE(env);
    const std::filesystem::path data_dir(env);
    const auto wine = load_csv(data_dir / "wine.csv", std::string("class"));
    CHECK(wine.size() == 178);
    CHECK(wine.feature_count() == 13);
    CHECK(wine.class_count == 3);

    const auto dir = testing::scratch_dir("experiment_config");
    std::filesystem::create_directories(dir / "cfg");
    testing::write_file(dir / "cfg" / "a.cfg", "data = ../wine.csv\npool_file = /abs/pool.json\n");
    const auto c = load_config(dir / "cfg" / "a.cfg");
    CHECK(c.data == dir / "cfg" / ".." / "wine.csv");
    CHECK(c.pool_file == "/abs/pool.json");
    CHECK_THROWS_AS(load_config(dir / "missing.cfg"), IoError);
}
