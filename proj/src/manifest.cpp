#include "herdgen/manifest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "herdgen/rng.hpp"

namespace herdgen {

namespace {

void sort_entries(DatasetManifest& m) {
    std::sort(m.entries.begin(), m.entries.end(),
              [](const ManifestEntry& a, const ManifestEntry& b) {
                  return a.image_path < b.image_path;
              });
}

} // namespace

DatasetManifest parse_manifest(const std::string& text) {
    DatasetManifest m;
    std::istringstream stream(text);
    std::string line;
    int line_no = 0;
    bool saw_version = false;
    std::set<std::string> seen;
    while (std::getline(stream, line)) {
        ++line_no;
        std::istringstream ss(line);
        std::string key;
        if (!(ss >> key)) continue;
        if (key == "format_version") {
            if (!(ss >> m.format_version) || m.format_version != 1)
                throw ManifestError("line " + std::to_string(line_no) +
                                    ": unsupported format_version");
            saw_version = true;
        } else if (key == "seed") {
            if (!(ss >> m.seed))
                throw ManifestError("line " + std::to_string(line_no) + ": bad seed");
        } else if (key == "entry") {
            ManifestEntry e;
            std::string tag;
            if (!(ss >> e.image_path >> e.label_path >> tag))
                throw ManifestError("line " + std::to_string(line_no) +
                                    ": entry needs image, label, split");
            if (tag == "train")
                e.split = Split::train;
            else if (tag == "test")
                e.split = Split::test;
            else
                throw ManifestError("line " + std::to_string(line_no) +
                                    ": split tag must be train or test");
            if (!seen.insert(e.image_path).second)
                throw ManifestError("line " + std::to_string(line_no) +
                                    ": duplicate path " + e.image_path);
            m.entries.push_back(std::move(e));
        } else {
            throw ManifestError("line " + std::to_string(line_no) + ": unknown key '" +
                                key + "'");
        }
    }
    if (!saw_version) throw ManifestError("missing format_version");
    sort_entries(m);
    return m;
}

std::string write_manifest(const DatasetManifest& m) {
    std::ostringstream out;
    out << "format_version " << m.format_version << "\n";
    out << "seed " << m.seed << "\n";
    DatasetManifest sorted = m;
    sort_entries(sorted);
    for (const ManifestEntry& e : sorted.entries) {
        out << "entry " << e.image_path << " " << e.label_path << " "
            << (e.split == Split::train ? "train" : "test") << "\n";
    }
    return out.str();
}

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ManifestError("cannot open manifest " + path);
    std::stringstream buf;
    buf << f.rdbuf();
    return parse_manifest(buf.str());
}

void save_manifest(const std::string& path, const DatasetManifest& m) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ManifestError("cannot write manifest " + path);
    f << write_manifest(m);
}

DatasetManifest split_dataset(const DatasetManifest& manifest, double test_fraction,
                              uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw ManifestError("test_fraction must be in (0,1)");
    const size_t n = manifest.entries.size();
    if (n < 2) throw TooFewImages();

    size_t n_test = static_cast<size_t>(std::floor(test_fraction * double(n) + 0.5));
    n_test = std::min(std::max<size_t>(n_test, 1), n - 1);

    DatasetManifest out = manifest;
    sort_entries(out);
    out.seed = seed;

    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(mix_seed(seed, 0x5917u, n)); // split stream
    for (size_t i = n; i-- > 1;) {
        size_t j = rng.bounded(i + 1);
        std::swap(order[i], order[j]);
    }
    for (size_t i = 0; i < n; ++i)
        out.entries[order[i]].split = i < n_test ? Split::test : Split::train;
    return out;
}

} // namespace herdgen
