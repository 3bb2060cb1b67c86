#include "divsel/experiment.hpp"

#include "divsel/errors.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace divsel {

std::string_view to_string(Mode m) noexcept { return m == Mode::Free ? "free" : "based"; }
std::string_view to_string(SearchKind s) noexcept { return s == SearchKind::Ga ? "ga" : "moga"; }
std::string_view to_string(ErrorObjective o) noexcept { return o == ErrorObjective::Me ? "me" : "mve"; }

Mode parse_mode(std::string_view s) {
    if (s == "free") return Mode::Free;
    if (s == "based") return Mode::Based;
    throw ConfigError("unknown mode '" + std::string(s) + "' (expected free or based)");
}

SearchKind parse_search(std::string_view s) {
    if (s == "ga") return SearchKind::Ga;
    if (s == "moga" || s == "nsga2") return SearchKind::Moga;
    throw ConfigError("unknown search '" + std::string(s) + "' (expected ga or moga)");
}

ErrorObjective parse_error_objective(std::string_view s) {
    if (s == "me") return ErrorObjective::Me;
    if (s == "mve") return ErrorObjective::Mve;
    throw ConfigError("unknown objective '" + std::string(s) + "' (expected me or mve)");
}

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split_list(std::string_view s) {
    std::vector<std::string_view> out;
    while (true) {
        const auto comma = s.find(',');
        const auto item = trim(s.substr(0, comma));
        if (!item.empty()) out.push_back(item);
        if (comma == std::string_view::npos) break;
        s.remove_prefix(comma + 1);
    }
    return out;
}

template <class T>
T parse_number(std::string_view key, std::string_view value) {
    T out{};
    const auto* end = value.data() + value.size();
    auto [ptr, ec] = std::from_chars(value.data(), end, out);
    if (ec != std::errc() || ptr != end)
        throw ConfigError("'" + std::string(key) + "' expects a number, got '" + std::string(value) + "'");
    return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
    if (value == "true" || value == "yes" || value == "1") return true;
    if (value == "false" || value == "no" || value == "0") return false;
    throw ConfigError("'" + std::string(key) + "' expects true or false, got '" + std::string(value) + "'");
}

void require_file(const std::filesystem::path& p, const char* key) {
    if (!p.empty() && !std::filesystem::is_regular_file(p))
        throw ConfigError(std::string(key) + " '" + p.string() + "' does not exist");
}

} // namespace

void apply_setting(ExperimentConfig& c, std::string_view key, std::string_view value) {
    auto size = [&] { return parse_number<std::size_t>(key, value); };
    auto real = [&] { return parse_number<double>(key, value); };
    auto integer = [&] { return parse_number<int>(key, value); };

    if (key == "name") c.name = value;
    else if (key == "data") c.data = value;
    else if (key == "test_data") c.test_data = value;
    else if (key == "optimization_data") c.optimization_data = value;
    else if (key == "validation_data") c.validation_data = value;
    else if (key == "evaluation_data") c.evaluation_data = value;
    else if (key == "label_column") c.label_column = parse_column_ref(value);
    else if (key == "test_fraction") c.test_fraction = real();
    else if (key == "split") {
        const auto parts = split_list(value);
        if (parts.size() != 3) throw ConfigError("split expects three comma-separated fractions");
        for (std::size_t i = 0; i < 3; ++i) c.split[i] = parse_number<double>(key, parts[i]);
    } else if (key == "synthetic") {
        if (value == "none") c.synthetic = SyntheticSource::None;
        else if (value == "pima") c.synthetic = SyntheticSource::PimaStyle;
        else if (value == "blobs") c.synthetic = SyntheticSource::Blobs;
        else throw ConfigError("synthetic expects none, pima or blobs");
    } else if (key == "synthetic_samples") c.synthetic_samples = size();
    else if (key == "synthetic_features") c.synthetic_features = size();
    else if (key == "synthetic_classes") c.synthetic_classes = integer();
    else if (key == "pool_size") c.pool_size = size();
    else if (key == "cardinality") c.cardinality = size();
    else if (key == "pool_file") c.pool_file = value;
    else if (key == "pool_per_replication") c.pool_per_replication = parse_bool(key, value);
    else if (key == "clusters") c.clusters = integer();
    else if (key == "k_min") c.k_min = integer();
    else if (key == "k_max") c.k_max = integer();
    else if (key == "kmeans_max_iter") c.kmeans_max_iter = size();
    else if (key == "kmeans_tol") c.kmeans_tol = real();
    else if (key == "cache_dir") c.cache_dir = value;
    else if (key == "mode") c.mode = parse_mode(value);
    else if (key == "search") c.search = parse_search(value);
    else if (key == "diversity") {
        c.diversity.clear();
        for (auto item : split_list(value)) c.diversity.push_back(parse_diversity_kind(item));
    } else if (key == "objective") {
        c.objectives.clear();
        for (auto item : split_list(value)) c.objectives.push_back(parse_error_objective(item));
    } else if (key == "classifier") c.classifier = parse_algorithm(value);
    else if (key == "knn_k") c.classifier_params.knn_k = size();
    else if (key == "parzen_bandwidth") {
        if (value == "auto") c.classifier_params.parzen_bandwidth.reset();
        else c.classifier_params.parzen_bandwidth = real();
    } else if (key == "population_size") c.ga.population_size = size();
    else if (key == "generations") c.ga.generations = size();
    else if (key == "crossover_prob") c.ga.crossover_prob = real();
    else if (key == "mutation_prob") {
        if (value == "auto") c.ga.mutation_prob.reset();
        else c.ga.mutation_prob = real();
    } else if (key == "min_size") c.ga.min_size = size();
    else if (key == "elitism_count") c.ga.elitism_count = size();
    else if (key == "replications") c.replications = size();
    else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "backend") {
        if (value == "serial") c.backend = kernels::Backend::Serial;
        else if (value == "openmp") c.backend = kernels::Backend::OpenMP;
        else throw ConfigError("backend expects serial or openmp");
    } else throw ConfigError("unknown key '" + std::string(key) + "'");
}

ExperimentConfig parse_config(std::string_view text) {
    ExperimentConfig c;
    std::size_t line_no = 0;
    while (!text.empty()) {
        ++line_no;
        const auto nl = text.find('\n');
        auto line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        try {
            if (eq == std::string_view::npos) throw ConfigError("expected 'key = value'");
            const auto key = trim(line.substr(0, eq));
            const auto value = trim(line.substr(eq + 1));
            if (key.empty()) throw ConfigError("missing key");
            apply_setting(c, key, value);
        } catch (Error& e) {
            e.prepend("line " + std::to_string(line_no));
            throw;
        }
    }
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config '" + path.string() + "'");
    std::ostringstream text;
    text << in.rdbuf();
    ExperimentConfig c;
    try {
        c = parse_config(text.str());
    } catch (Error& e) {
        e.prepend(path.string());
        throw;
    }
    // relative file names are taken from the config's directory
    const auto base = path.parent_path();
    for (auto* p : {&c.data, &c.test_data, &c.optimization_data, &c.validation_data, &c.evaluation_data, &c.pool_file,
                    &c.cache_dir})
        if (!p->empty() && p->is_relative()) *p = base / *p;
    return c;
}

void ExperimentConfig::validate() const {
    if (replications < 1) throw ConfigError("replications must be at least 1");
    if (synthetic == SyntheticSource::None) {
        if (data.empty()) throw ConfigError("no data file configured");
        require_file(data, "data");
    }
    require_file(test_data, "test_data");
    const int disjoint = !optimization_data.empty() + !validation_data.empty() + !evaluation_data.empty();
    if (disjoint != 0 && disjoint != 3)
        throw ConfigError("optimization_data, validation_data and evaluation_data must be given together");
    require_file(optimization_data, "optimization_data");
    require_file(validation_data, "validation_data");
    require_file(evaluation_data, "evaluation_data");
    require_file(pool_file, "pool_file");
    if (test_data.empty() && !(test_fraction > 0.0 && test_fraction < 1.0))
        throw ConfigError("test_fraction must lie in (0, 1)");
    if (clusters != 0 && clusters < 2) throw ConfigError("clusters must be 0 (select) or at least 2");
    if (clusters == 0 && !(2 <= k_min && k_min <= k_max)) throw ConfigError("need 2 <= k_min <= k_max");
    if (mode == Mode::Free && diversity.empty()) throw ConfigError("classifier-free mode needs a diversity kind");
    if (mode == Mode::Based && objectives.empty()) throw ConfigError("classifier-based mode needs an objective");
    if (pool_file.empty()) {
        if (pool_size < 3) throw ConfigError("pool_size must be at least 3");
        if (cardinality < 1) throw ConfigError("cardinality must be at least 1");
        ga.validate(pool_size);
    }
}

std::vector<std::string> ExperimentConfig::arm_names() const {
    std::vector<std::string> out;
    if (mode == Mode::Free)
        for (auto k : diversity) out.emplace_back(to_string(k));
    else
        for (auto o : objectives) out.emplace_back(to_string(o));
    return out;
}

nlohmann::json to_json(const ExperimentConfig& c) {
    nlohmann::json j;
    j["name"] = c.name;
    j["data"] = c.data.string();
    j["test_data"] = c.test_data.string();
    j["optimization_data"] = c.optimization_data.string();
    j["validation_data"] = c.validation_data.string();
    j["evaluation_data"] = c.evaluation_data.string();
    j["label_column"] = std::visit([](const auto& v) { return nlohmann::json(v); }, c.label_column);
    j["test_fraction"] = c.test_fraction;
    j["split"] = c.split;
    j["score_holdout"] = c.score_holdout;
    j["synthetic"] = c.synthetic == SyntheticSource::None        ? "none"
                     : c.synthetic == SyntheticSource::PimaStyle ? "pima"
                                                                 : "blobs";
    if (c.synthetic == SyntheticSource::Blobs)
        j["synthetic_shape"] = {c.synthetic_samples, c.synthetic_features, c.synthetic_classes};
    j["pool_size"] = c.pool_size;
    j["cardinality"] = c.cardinality;
    j["pool_file"] = c.pool_file.string();
    j["pool_per_replication"] = c.pool_per_replication;
    j["clusters"] = c.clusters;
    j["k_range"] = {c.k_min, c.k_max};
    j["kmeans"] = {{"max_iter", c.kmeans_max_iter}, {"tol", c.kmeans_tol}};
    j["mode"] = to_string(c.mode);
    j["search"] = to_string(c.search);
    j["arms"] = c.arm_names();
    j["classifier"] = to_string(c.classifier);
    j["knn_k"] = c.classifier_params.knn_k;
    j["parzen_bandwidth"] = c.classifier_params.parzen_bandwidth ? nlohmann::json(*c.classifier_params.parzen_bandwidth)
                                                                 : nlohmann::json("auto");
    j["ga"] = {{"population_size", c.ga.population_size},
               {"generations", c.ga.generations},
               {"crossover_prob", c.ga.crossover_prob},
               {"mutation_prob", c.ga.mutation_prob ? nlohmann::json(*c.ga.mutation_prob) : nlohmann::json("auto")},
               {"min_size", c.ga.min_size},
               {"elitism_count", c.ga.elitism_count}};
    j["replications"] = c.replications;
    j["seed"] = c.seed;
    return j;
}

} // namespace divsel
