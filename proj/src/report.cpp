#include "divsel/experiment.hpp"

#include "divsel/errors.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace divsel {

namespace {

nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

nlohmann::json to_json(const ReplicationRecord& r) {
    nlohmann::json j{{"replication", r.replication}, {"arm", r.arm}, {"seed", r.seed}, {"ok", r.ok}};
    if (!r.ok) {
        j["error"] = r.error;
        return j;
    }
    j["clusters"] = r.clusters;
    j["genome"] = r.genome.to_string();
    j["selected"] = r.genome.selected();
    j["size"] = r.size;
    j["test_accuracy"] = r.test_accuracy;
    j["search_value"] = number_or_null(r.search_value);
    j["validation_value"] = number_or_null(r.validation_value);
    j["evaluation_accuracy"] = r.evaluation_accuracy ? nlohmann::json(*r.evaluation_accuracy) : nlohmann::json(nullptr);
    j["archive_sizes"] = r.archive_sizes;
    j["skipped"] = r.skipped;
    j["trainings_before_selection"] = r.trainings_before_selection;
    j["provenance"] = r.provenance;
    j["generations"] = r.history.empty() ? 0 : r.history.size() - 1;
    return j;
}

std::string percent(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
    return buf;
}

std::string fixed(double v, int digits) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string safe_name(std::string s) {
    for (char& ch : s)
        if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '_')) ch = '_';
    return s;
}

} // namespace

nlohmann::json to_json(const Report& report) {
    nlohmann::json records = nlohmann::json::array();
    for (const auto& r : report.records) records.push_back(to_json(r));
    nlohmann::json aggregates = nlohmann::json::array();
    for (const auto& a : report.aggregates)
        aggregates.push_back({{"arm", a.arm},
                              {"n", a.n},
                              {"failures", a.failures},
                              {"accuracy_mean", a.accuracy_mean},
                              {"accuracy_std", a.accuracy_std},
                              {"size_mean", a.size_mean},
                              {"size_std", a.size_std},
                              {"statistic_vs_all", a.statistic},
                              {"p_value_vs_all", a.p_value}});
    nlohmann::json baselines = nlohmann::json::array();
    for (const auto& b : report.baselines)
        baselines.push_back({{"name", b.name}, {"mean", b.mean}, {"std", b.stddev}, {"size", b.size}});
    nlohmann::json all = nlohmann::json::array(), oracle = nlohmann::json::array();
    for (double v : report.all_accuracy) all.push_back(number_or_null(v));
    for (double v : report.oracle) oracle.push_back(number_or_null(v));
    return {{"config", to_json(report.config)},
            {"test", report.test_name},
            {"records", records},
            {"aggregates", aggregates},
            {"baselines", baselines},
            {"all_accuracy", all},
            {"oracle", oracle}};
}

std::string to_csv(const Report& report) {
    const auto& c = report.config;
    const std::string prefix =
        c.name + "," + std::string(to_string(c.classifier)) + "," + std::string(to_string(c.search)) + "," +
        std::string(to_string(c.mode)) + ",";
    std::string out = "dataset,classifier,search,mode,method,n,failures,accuracy_mean,accuracy_std,size_mean,size_std,"
                      "p_value,cell\n";
    for (const auto& a : report.aggregates) {
        out += prefix + a.arm + "," + std::to_string(a.n) + "," + std::to_string(a.failures) + "," +
               percent(a.accuracy_mean) + "," + percent(a.accuracy_std) + "," + fixed(a.size_mean, 2) + "," +
               fixed(a.size_std, 2) + "," + fixed(a.p_value, 4) + "," + percent(a.accuracy_mean) + " ± " +
               percent(a.accuracy_std) + " % (" + fixed(a.size_mean, 2) + ")\n";
    }
    for (const auto& b : report.baselines) {
        const std::string cell = b.name == "Oracle" ? percent(b.mean) + " %"
                                                    : percent(b.mean) + " ± " + percent(b.stddev) + " %";
        out += prefix + b.name + "," + std::to_string(report.all_accuracy.size()) + ",0," + percent(b.mean) + "," +
               percent(b.stddev) + "," + fixed(static_cast<double>(b.size), 2) + ",0.00,," + cell + "\n";
    }
    return out;
}

void write_report(const Report& report, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
    auto write = [&](const std::filesystem::path& p, const std::string& text) {
        std::ofstream out(p, std::ios::binary);
        if (!out) throw IoError("cannot write '" + p.string() + "'");
        out << text;
    };
    write(dir / "report.json", to_json(report).dump(2) + "\n");
    write(dir / "report.csv", to_csv(report));
    for (const auto& r : report.records) {
        if (r.history.empty()) continue;
        write(dir / ("history_r" + std::to_string(r.replication) + "_" + safe_name(r.arm) + ".jsonl"),
              to_jsonl(r.history));
    }
}

} // namespace divsel
