// Command-line front end: experiments plus the individual pipeline stages.

#include "divsel/classifiers.hpp"
#include "divsel/clustering.hpp"
#include "divsel/dataset.hpp"
#include "divsel/diversity.hpp"
#include "divsel/errors.hpp"
#include "divsel/experiment.hpp"
#include "divsel/stats.hpp"
#include "divsel/subspace.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

namespace {

using namespace divsel;

Dataset load_or_synth(const std::string& data, const std::string& label_column) {
    if (data == "pima") return generate_pima_style(0);
    return load_csv(data, parse_column_ref(label_column));
}

std::vector<double> arm_accuracies(const nlohmann::json& report, const std::string& arm) {
    std::vector<double> out;
    for (const auto& r : report.at("records")) {
        if (r.at("arm") != arm) continue;
        out.push_back(r.at("ok").get<bool>() ? r.at("test_accuracy").get<double>() : std::nan(""));
    }
    return out;
}

nlohmann::json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read '" + path + "'");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw IoError(path + ": " + e.what());
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Classifier-free ensemble selection over random subspaces"};
    app.require_subcommand(1);

    // run
    auto* run = app.add_subcommand("run", "Run an experiment and write report.json, report.csv and histories");
    std::string config_path, out_dir = "out", mode, search, diversity, objective, data, label_column, split_text;
    std::uint64_t seed = 0;
    std::size_t replications = 0;
    std::vector<std::string> settings;
    run->add_option("--config", config_path, "key = value config file");
    run->add_option("--mode", mode, "free | based");
    run->add_option("--search", search, "ga | moga");
    run->add_option("--diversity", diversity, "comma list of wallace1,wallace2,fm,rand,jacard,mirkin");
    run->add_option("--objective", objective, "comma list of me,mve");
    run->add_option("--data", data, "CSV data file");
    run->add_option("--label-column", label_column, "label column name or index");
    run->add_option("--split", split_text, "optimization,validation,evaluation fractions");
    auto* seed_opt = run->add_option("--seed", seed, "master seed");
    run->add_option("--replications", replications, "replication count");
    run->add_option("--set", settings, "extra key=value settings")->take_all();
    run->add_option("--out", out_dir, "output directory");

    // synth
    auto* synth = app.add_subcommand("synth", "Write a synthetic data set as CSV");
    std::string synth_kind = "blobs", synth_out;
    std::size_t synth_n = 600, synth_f = 8;
    int synth_classes = 3;
    std::uint64_t synth_seed = 0;
    double synth_sep = 10.0, synth_sd = 0.1;
    synth->add_option("--kind", synth_kind, "blobs | pima")->check(CLI::IsMember({"blobs", "pima"}));
    synth->add_option("--samples", synth_n);
    synth->add_option("--features", synth_f);
    synth->add_option("--classes", synth_classes);
    synth->add_option("--separation", synth_sep);
    synth->add_option("--stddev", synth_sd);
    synth->add_option("--seed", synth_seed);
    synth->add_option("--out", synth_out)->required();

    // pool
    auto* pool_cmd = app.add_subcommand("pool", "Draw a random subspace pool");
    std::size_t pool_features = 0, pool_card = 4, pool_size = 10;
    std::uint64_t pool_seed = 0;
    std::string pool_out;
    pool_cmd->add_option("--features", pool_features, "total feature count")->required();
    pool_cmd->add_option("--cardinality", pool_card);
    pool_cmd->add_option("--size", pool_size);
    pool_cmd->add_option("--seed", pool_seed);
    pool_cmd->add_option("--out", pool_out)->required();

    // matrix
    auto* matrix_cmd = app.add_subcommand("matrix", "Cluster each pool subspace and write the pairwise diversity matrix");
    std::string m_data, m_label = "class", m_pool, m_kind = "rand", m_out;
    int m_k = 3;
    std::uint64_t m_seed = 0;
    matrix_cmd->add_option("--data", m_data, "CSV file, or 'pima' for the built-in synthetic set")->required();
    matrix_cmd->add_option("--label-column", m_label);
    matrix_cmd->add_option("--pool", m_pool, "pool JSON")->required();
    matrix_cmd->add_option("--k", m_k);
    matrix_cmd->add_option("--diversity", m_kind);
    matrix_cmd->add_option("--seed", m_seed);
    matrix_cmd->add_option("--out", m_out)->required();

    // select-k
    auto* selk = app.add_subcommand("select-k", "Choose a cluster count by the Xie-Beni index");
    std::string s_data, s_label = "class";
    int k_min = 2, k_max = 10;
    std::uint64_t s_seed = 0;
    selk->add_option("--data", s_data)->required();
    selk->add_option("--label-column", s_label);
    selk->add_option("--k-min", k_min);
    selk->add_option("--k-max", k_max);
    selk->add_option("--seed", s_seed);

    // compare
    auto* cmp = app.add_subcommand("compare", "Paired signed-rank test between two report arms");
    std::string cmp_a, cmp_b, arm_a, arm_b;
    cmp->add_option("a", cmp_a, "first report.json")->required();
    cmp->add_option("b", cmp_b, "second report.json")->required();
    cmp->add_option("--arm-a", arm_a, "arm of the first report (default: its first arm)");
    cmp->add_option("--arm-b", arm_b, "arm of the second report (default: its first arm)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            ExperimentConfig config = config_path.empty() ? ExperimentConfig{} : load_config(config_path);
            std::vector<std::pair<std::string, std::string>> overrides;
            if (!mode.empty()) overrides.emplace_back("mode", mode);
            if (!search.empty()) overrides.emplace_back("search", search);
            if (!diversity.empty()) overrides.emplace_back("diversity", diversity);
            if (!objective.empty()) overrides.emplace_back("objective", objective);
            if (!data.empty()) overrides.emplace_back("data", data);
            if (!label_column.empty()) overrides.emplace_back("label_column", label_column);
            if (!split_text.empty()) overrides.emplace_back("split", split_text);
            if (*seed_opt) overrides.emplace_back("seed", std::to_string(seed));
            if (replications) overrides.emplace_back("replications", std::to_string(replications));
            for (const auto& s : settings) {
                const auto eq = s.find('=');
                if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
                overrides.emplace_back(s.substr(0, eq), s.substr(eq + 1));
            }
            for (const auto& [k, v] : overrides) {
                try {
                    apply_setting(config, k, v);
                } catch (Error& e) {
                    e.prepend("option " + k);
                    throw;
                }
            }
            const auto report = run_experiment(config);
            write_report(report, out_dir);
            std::cout << to_csv(report);
            std::size_t failures = 0;
            for (const auto& a : report.aggregates) failures += a.failures;
            if (failures) std::cerr << failures << " replication(s) failed; see report.json\n";
        } else if (*synth) {
            const Dataset d = synth_kind == "pima" ? generate_pima_style(synth_seed)
                                                   : generate_synthetic(synth_n, synth_f, synth_classes, synth_seed,
                                                                        {synth_sep, synth_sd});
            write_csv(d, synth_out);
        } else if (*pool_cmd) {
            save_pool(generate_pool(pool_features, pool_card, pool_size, pool_seed), pool_out);
        } else if (*matrix_cmd) {
            const auto d = load_or_synth(m_data, m_label);
            const auto pool = load_pool(m_pool);
            const auto parts = cluster_pool(d, pool, m_k, m_seed);
            write_csv(pairwise_matrix(parts, parse_diversity_kind(m_kind)), m_out);
        } else if (*selk) {
            const auto d = load_or_synth(s_data, s_label);
            std::cout << select_k(d, k_min, k_max, s_seed) << "\n";
        } else if (*cmp) {
            const auto ja = read_json(cmp_a), jb = read_json(cmp_b);
            if (arm_a.empty()) arm_a = ja.at("config").at("arms").at(0);
            if (arm_b.empty()) arm_b = jb.at("config").at("arms").at(0);
            const auto a = arm_accuracies(ja, arm_a), b = arm_accuracies(jb, arm_b);
            std::vector<double> xa, xb;
            for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i)
                if (std::isfinite(a[i]) && std::isfinite(b[i])) {
                    xa.push_back(a[i]);
                    xb.push_back(b[i]);
                }
            if (xa.empty()) throw ConfigError("no paired successful replications to compare");
            const auto t = wilcoxon_signed_rank(xa, xb);
            const auto sa = summarize(xa), sb = summarize(xb);
            std::printf("%s: %.4f +/- %.4f\n%s: %.4f +/- %.4f\n%s n=%zu W+=%.1f p=%.4g%s\n", arm_a.c_str(), sa.mean,
                        sa.stddev, arm_b.c_str(), sb.mean, sb.stddev, std::string(kSignedRankTestName).c_str(),
                        t.n_used, t.statistic, t.p_value, t.exact ? " (exact)" : "");
        }
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
