#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace herdgen {

// FNV-1a, 64-bit: stable content fingerprints for manifests and determinism
// checks. Not cryptographic.
inline uint64_t fnv1a64(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ull) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

uint64_t hash_file(const std::string& path);

// Hash of every regular file under root (relative path + contents), sorted by
// path; directories named in `exclude` (top-level) are skipped.
uint64_t hash_tree(const std::string& root,
                   const std::vector<std::string>& exclude = {});

std::string hash_hex(uint64_t h);

} // namespace herdgen
