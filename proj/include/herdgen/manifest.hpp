#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "herdgen/raster.hpp"

namespace herdgen {

struct ManifestError : Error {
    explicit ManifestError(const std::string& msg) : Error(msg) {}
};

struct TooFewImages : Error {
    TooFewImages() : Error("split requires at least 2 entries") {}
};

enum class Split { train, test };

struct ManifestEntry {
    std::string image_path; // relative to the dataset root
    std::string label_path;
    Split split = Split::train;
};

// Source-corpus index. Entries are kept sorted lexicographically by image
// path so every seeded operation sees a stable order.
struct DatasetManifest {
    int format_version = 1;
    uint64_t seed = 0;
    std::vector<ManifestEntry> entries;
};

DatasetManifest parse_manifest(const std::string& text);
std::string write_manifest(const DatasetManifest& m);

DatasetManifest load_manifest(const std::string& path);
void save_manifest(const std::string& path, const DatasetManifest& m);

// Seeded shuffle split; test count = round-half-up(test_fraction * N).
DatasetManifest split_dataset(const DatasetManifest& manifest, double test_fraction,
                              uint64_t seed);

} // namespace herdgen
