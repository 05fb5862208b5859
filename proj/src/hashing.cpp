#include "herdgen/hashing.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "herdgen/raster.hpp"

namespace fs = std::filesystem;

namespace herdgen {

uint64_t hash_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot hash missing file: " + path);
    uint64_t h = 0xcbf29ce484222325ull;
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof buf);
        h = fnv1a64(buf, size_t(in.gcount()), h);
    }
    return h;
}

uint64_t hash_tree(const std::string& root, const std::vector<std::string>& exclude) {
    if (!fs::is_directory(root)) throw Error("not a directory: " + root);
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (!entry.is_regular_file()) continue;
        const fs::path rel = fs::relative(entry.path(), root);
        const std::string top = rel.begin()->string();
        if (std::find(exclude.begin(), exclude.end(), top) != exclude.end()) continue;
        files.push_back(rel);
    }
    std::sort(files.begin(), files.end());
    uint64_t h = 0xcbf29ce484222325ull;
    for (const fs::path& rel : files) {
        const std::string name = rel.generic_string();
        h = fnv1a64(name.data(), name.size(), h);
        const uint64_t fh = hash_file((fs::path(root) / rel).string());
        h = fnv1a64(&fh, sizeof fh, h);
    }
    return h;
}

std::string hash_hex(uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)h);
    return buf;
}

} // namespace herdgen
