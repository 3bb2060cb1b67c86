// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include "divsel/classifiers.hpp"
#include "divsel/clustering.hpp"
#include "divsel/diversity.hpp"
#include "divsel/experiment.hpp"
#include "divsel/log.hpp"
#include "divsel/rng.hpp"
#include "divsel/search.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace divsel;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

int failures = 0;

void run(int id, const char* name, const std::function<Outcome()>& check) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = check();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s %d %s: %s (%.2fs)\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failures;
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

std::vector<int> random_partition(Rng& rng, std::size_t n, int k) {
    std::vector<int> p(n);
    for (auto& v : p) v = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(k)));
    return p;
}

// j dominates i under the archive's orientations?
bool dominates_brute(const std::vector<double>& j, const std::vector<double>& i, const std::vector<Orientation>& o) {
    bool better = false;
    for (std::size_t m = 0; m < o.size(); ++m) {
        const double a = o[m] == Orientation::Maximize ? j[m] : -j[m];
        const double b = o[m] == Orientation::Maximize ? i[m] : -i[m];
        if (a < b) return false;
        if (a > b) better = true;
    }
    return better;
}

bool archive_non_dominated_brute(const ParetoArchive& a) {
    const auto& e = a.entries();
    for (std::size_t i = 0; i < e.size(); ++i)
        for (std::size_t j = 0; j < e.size(); ++j) {
            if (i == j) continue;
            if (dominates_brute(e[j].validation, e[i].validation, a.orientations())) return false;
            if (e[i].validation == e[j].validation || e[i].genome == e[j].genome) return false;
        }
    return true;
}

std::vector<std::size_t> oracle_ranks(const std::vector<std::vector<double>>& pts) {
    const std::vector<Orientation> maxi(pts.empty() ? 0 : pts[0].size(), Orientation::Maximize);
    std::vector<std::size_t> rank(pts.size(), 0);
    std::vector<bool> done(pts.size(), false);
    for (std::size_t level = 0, assigned = 0; assigned < pts.size(); ++level) {
        std::vector<std::size_t> front;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (done[i]) continue;
            bool dominated = false;
            for (std::size_t j = 0; j < pts.size() && !dominated; ++j)
                dominated = !done[j] && j != i && dominates_brute(pts[j], pts[i], maxi);
            if (!dominated) front.push_back(i);
        }
        for (auto i : front) rank[i] = level, done[i] = true;
        assigned += front.size();
    }
    return rank;
}

// Partitions of a Pima-style sample over a random pool.
std::vector<Partition> desk_partitions(std::size_t pool_size, std::uint64_t seed, int k) {
    ScopedWarningCapture quiet; // small pools over 8 features repeat subspaces
    const auto data = generate_pima_style(seed);
    const auto pool = generate_pool(data.feature_count(), 4, pool_size, seed + 1);
    return cluster_pool(data, pool, k, seed + 2);
}

Outcome golden() {
    const std::vector<int> a{0, 0, 0, 1}, b{0, 0, 1, 2};
    const auto c = pair_counts(contingency(a, b));
    if (!(c.c11 == 1 && c.c10 == 2 && c.c01 == 0 && c.c00 == 3))
        return {false, fmt("counts (%lld,%lld,%lld,%lld)", (long long)c.c11, (long long)c.c10, (long long)c.c01,
                           (long long)c.c00)};
    const std::pair<DiversityKind, double> expect[] = {
        {DiversityKind::Wallace1, 1.0 / 3},  {DiversityKind::Wallace2, 1.0},
        {DiversityKind::FowlkesMallows, std::sqrt(1.0 / 3)}, {DiversityKind::Rand, 2.0 / 3},
        {DiversityKind::Jacard, 1.0 / 3},    {DiversityKind::Mirkin, 4.0}};
    for (const auto& [kind, v] : expect)
        if (std::abs(measure(c, kind) - v) > 1e-12)
            return {false, fmt("%s = %.15g, expected %.15g", std::string(to_string(kind)).c_str(), measure(c, kind), v)};
    return {true, "(C11,C10,C01,C00) = (1,2,0,3); all six indices within 1e-12"};
}

struct PairCorpus {
    std::vector<std::pair<std::vector<int>, std::vector<int>>> pairs;
};

PairCorpus make_corpus() {
    Rng rng(20240611);
    PairCorpus c;
    for (int t = 0; t < 1200; ++t) {
        const std::size_t n = 2 + uniform_index(rng, 199);
        const int ka = 1 + static_cast<int>(uniform_index(rng, 10));
        const int kb = 1 + static_cast<int>(uniform_index(rng, 10));
        c.pairs.emplace_back(random_partition(rng, n, ka), random_partition(rng, n, kb));
    }
    return c;
}

Outcome oracle_equivalence(const PairCorpus& corpus) {
    for (std::size_t t = 0; t < corpus.pairs.size(); ++t) {
        const auto& [a, b] = corpus.pairs[t];
        const auto fast = pair_counts(contingency(a, b));
        const auto slow = brute_force_pair_counts(a, b);
        if (!(fast == slow)) return {false, fmt("pair %zu differs from brute force", t)};
        const auto n = static_cast<std::int64_t>(a.size());
        if (fast.c11 + fast.c00 + fast.c10 + fast.c01 != n * (n - 1) / 2)
            return {false, fmt("pair %zu breaks the pair-sum identity", t)};
    }
    return {true, fmt("%zu random pairs, exact match and sum identity", corpus.pairs.size())};
}

Outcome mirkin_rand(const PairCorpus& corpus) {
    double worst = 0.0;
    for (const auto& [a, b] : corpus.pairs) {
        const auto c = pair_counts(contingency(a, b));
        const double n = static_cast<double>(a.size());
        const double diff =
            std::abs(measure(c, DiversityKind::Mirkin) - n * (n - 1) * (1.0 - measure(c, DiversityKind::Rand)));
        worst = std::max(worst, diff);
    }
    return {worst <= 1e-9, fmt("max |Mirkin - n(n-1)(1-Rand)| = %.3g", worst)};
}

Outcome ga_min_size() {
    constexpr int kReps = 30;
    std::vector<int> at_min(std::size(kAllDiversityKinds), 0);
    for (int r = 0; r < kReps; ++r) {
        const auto parts = desk_partitions(10, 1000 + r, 3);
        for (std::size_t k = 0; k < std::size(kAllDiversityKinds); ++k) {
            const auto m = pairwise_matrix(parts, kAllDiversityKinds[k]);
            GaConfig c;
            c.generations = 200;
            c.seed = 77 + r;
            const auto res = ga_run({m.size(), diversity_objective(m), false}, c, {});
            if (res.best.popcount() == c.min_size) ++at_min[k];
        }
    }
    std::string detail;
    bool pass = true;
    for (std::size_t k = 0; k < at_min.size(); ++k) {
        detail += fmt("%s %d/30 ", std::string(to_string(kAllDiversityKinds[k])).c_str(), at_min[k]);
        pass = pass && at_min[k] >= 27;
    }
    detail.pop_back();
    return {pass, "popcount 3: " + detail};
}

Outcome nsga2_properties() {
    const auto parts = desk_partitions(20, 31, 3);
    const auto m = pairwise_matrix(parts, DiversityKind::Rand);
    GaConfig c;
    c.seed = 5;
    c.generations = 200;
    std::size_t generations = 0;
    bool archive_ok = true;
    nsga2_run({m.size(), diversity_objective(m), false}, c, {},
              [&](std::size_t, std::span<const Genome>, const ParetoArchive* archive) {
                  ++generations;
                  archive_ok = archive_ok && archive && archive_non_dominated_brute(*archive);
              });
    if (!archive_ok) return {false, "archive held a dominated or duplicate entry"};

    Rng rng(99);
    for (int t = 0; t < 100; ++t) {
        const std::size_t n = 10 + uniform_index(rng, 91);
        const std::size_t dims = 2 + uniform_index(rng, 2);
        std::vector<std::vector<double>> pts(n, std::vector<double>(dims));
        for (auto& p : pts)
            for (auto& v : p) v = static_cast<double>(uniform_index(rng, 12));
        const auto fronts = non_dominated_sort(pts);
        const auto ranks = oracle_ranks(pts);
        std::vector<bool> seen(n, false);
        for (std::size_t f = 0; f < fronts.size(); ++f)
            for (auto i : fronts[f]) {
                if (ranks[i] != f || seen[i]) return {false, fmt("set %d: front assignment differs from oracle", t)};
                seen[i] = true;
            }
        if (std::find(seen.begin(), seen.end(), false) != seen.end()) return {false, fmt("set %d: point missing", t)};
    }
    return {true, fmt("archive non-dominated after all %zu generations; 100 random sets match the oracle", generations)};
}

Outcome moga_spread() {
    const auto parts = desk_partitions(20, 47, 3);
    const auto m = pairwise_matrix(parts, DiversityKind::Rand);
    GaConfig c;
    c.seed = 12;
    const auto r = nsga2_run({m.size(), diversity_objective(m), false}, c, {});
    std::vector<std::size_t> sizes;
    for (const auto& e : r.archive.entries()) sizes.push_back(e.genome.popcount());
    std::sort(sizes.begin(), sizes.end());
    const std::set<std::size_t> distinct(sizes.begin(), sizes.end());
    const double median = sizes.size() % 2 ? static_cast<double>(sizes[sizes.size() / 2])
                                           : 0.5 * static_cast<double>(sizes[sizes.size() / 2 - 1] + sizes[sizes.size() / 2]);
    return {distinct.size() >= 4 && median > static_cast<double>(c.min_size),
            fmt("%zu archived genomes, %zu distinct sizes (%zu..%zu), median %.1f", sizes.size(), distinct.size(),
                sizes.front(), sizes.back(), median)};
}

ExperimentConfig pima_moga() {
    ExperimentConfig c;
    c.name = "pima-moga";
    c.synthetic = SyntheticSource::PimaStyle;
    c.pool_size = 10;
    c.cardinality = 4;
    c.clusters = 3;
    c.classifier = Algorithm::Knn;
    c.search = SearchKind::Moga;
    c.diversity.assign(std::begin(kAllDiversityKinds), std::end(kAllDiversityKinds));
    c.replications = 30;
    c.seed = 2024;
    return c;
}

Outcome pima_sanity() {
    Report r;
    {
        ScopedWarningCapture quiet;
        r = run_experiment(pima_moga());
    }
    const double all = r.baselines.at(0).mean;
    std::string detail = fmt("ALL %.2f%%;", 100 * all);
    bool pass = std::isfinite(all);
    for (const auto& a : r.aggregates) {
        const double gap = 100 * (a.accuracy_mean - all);
        detail += fmt(" %s %.2f%% (%+.2f)", a.arm.c_str(), 100 * a.accuracy_mean, gap);
        pass = pass && a.failures == 0 && a.n == 30 && std::abs(gap) <= 5.0;
    }
    return {pass, detail};
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Outcome determinism() {
    const auto base = std::filesystem::temp_directory_path() / "divsel_acceptance_determinism";
    std::filesystem::remove_all(base);
    auto c = pima_moga();
    c.replications = 4;
    c.diversity = {DiversityKind::Rand, DiversityKind::Jacard};
    auto based = c;
    based.mode = Mode::Based;
    based.objectives = {ErrorObjective::Me, ErrorObjective::Mve};
    int runs = 0;
    for (const auto& cfg : {c, based}) {
        std::string first;
        for (int i = 0; i < 2; ++i) {
            const auto dir = base / fmt("%d_%d", runs, i);
            ScopedWarningCapture quiet;
            write_report(run_experiment(cfg), dir);
            const auto text = slurp(dir / "report.json");
            if (text.empty()) return {false, "report.json missing"};
            if (i == 0)
                first = text;
            else if (text != first)
                return {false, std::string(to_string(cfg.mode)) + " mode report.json differs between runs"};
        }
        ++runs;
    }
    std::filesystem::remove_all(base);
    return {true, "classifier-free and classifier-based report.json byte-identical across repeated runs"};
}

Outcome fusion() {
    Rng rng(424242);
    std::size_t cases = 0;
    for (int t = 0; t < 10000; ++t) {
        VoteMatrix v;
        v.classifiers = 1 + uniform_index(rng, 9);
        v.samples = 1 + uniform_index(rng, 30);
        v.class_count = 2 + static_cast<int>(uniform_index(rng, 5));
        v.votes = random_partition(rng, v.classifiers * v.samples, v.class_count);
        const auto labels = random_partition(rng, v.samples, v.class_count);
        const auto mv = majority_vote(v);
        for (std::size_t x = 0; x < v.samples; ++x) {
            std::vector<std::size_t> tally(static_cast<std::size_t>(v.class_count), 0);
            for (std::size_t e = 0; e < v.classifiers; ++e) ++tally[static_cast<std::size_t>(v(e, x))];
            // first maximum is the smallest class id among ties
            const int expect = static_cast<int>(std::max_element(tally.begin(), tally.end()) - tally.begin());
            if (mv[x] != expect) return {false, fmt("matrix %d sample %zu: vote %d, tally %d", t, x, mv[x], expect)};
        }
        if (oracle_rate(v, labels) < accuracy(mv, labels))
            return {false, fmt("matrix %d: oracle below majority-vote accuracy", t)};
        ++cases;
    }
    return {true, fmt("%zu random vote matrices agree with the tally; oracle >= MV accuracy", cases)};
}

} // namespace

int main() {
    const auto corpus = make_corpus();
    run(1, "golden pair counts", golden);
    run(2, "pair counts vs brute force", [&] { return oracle_equivalence(corpus); });
    run(3, "Mirkin-Rand identity", [&] { return mirkin_rand(corpus); });
    run(4, "GA converges to the minimum size", ga_min_size);
    run(5, "NSGA-II archive and sorting", nsga2_properties);
    run(6, "MOGA size spread", moga_spread);
    run(7, "Pima-style MOGA near ALL", pima_sanity);
    run(8, "deterministic report.json", determinism);
    run(9, "majority vote and oracle", fusion);
    return failures == 0 ? 0 : 1;
}
