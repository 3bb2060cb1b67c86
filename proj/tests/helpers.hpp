#pragma once

#include "divsel/rng.hpp"

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace testing {

// Fresh, empty scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("divsel_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::filesystem::path write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream(path, std::ios::binary) << text;
    return path;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::vector<int> random_labels(divsel::Rng& rng, std::size_t n, int k) {
    std::vector<int> out(n);
    for (auto& v : out) v = static_cast<int>(divsel::uniform_index(rng, static_cast<std::size_t>(k)));
    return out;
}

} // namespace testing
