#include "herdgen/raster.hpp"

#include <algorithm>

namespace herdgen {

std::vector<std::vector<uint32_t>> connected_components(const BinaryMask& mask) {
    const int w = mask.width, h = mask.height;
    std::vector<std::vector<uint32_t>> comps;
    std::vector<uint8_t> seen(static_cast<size_t>(w) * h, 0);
    std::vector<uint32_t> stack;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            uint32_t idx = static_cast<uint32_t>(y) * w + x;
            if (!mask.bits[idx] || seen[idx]) continue;
            std::vector<uint32_t> comp;
            stack.clear();
            stack.push_back(idx);
            seen[idx] = 1;
            while (!stack.empty()) {
                uint32_t p = stack.back();
                stack.pop_back();
                comp.push_back(p);
                int px = static_cast<int>(p % w), py = static_cast<int>(p / w);
                const int nx[4] = {px - 1, px + 1, px, px};
                const int ny[4] = {py, py, py - 1, py + 1};
                for (int k = 0; k < 4; ++k) {
                    if (nx[k] < 0 || nx[k] >= w || ny[k] < 0 || ny[k] >= h) continue;
                    uint32_t q = static_cast<uint32_t>(ny[k]) * w + nx[k];
                    if (mask.bits[q] && !seen[q]) {
                        seen[q] = 1;
                        stack.push_back(q);
                    }
                }
            }
            std::sort(comp.begin(), comp.end());
            comps.push_back(std::move(comp));
        }
    }
    return comps;
}

BinaryMask largest_component(const BinaryMask& mask) {
    auto comps = connected_components(mask);
    BinaryMask out(mask.width, mask.height);
    if (comps.empty()) return out;
    size_t best = 0;
    for (size_t i = 1; i < comps.size(); ++i)
        if (comps[i].size() > comps[best].size()) best = i;
    for (uint32_t idx : comps[best]) out.bits[idx] = 1;
    return out;
}

BinaryMask erode3x3(const BinaryMask& mask) {
    const int w = mask.width, h = mask.height;
    BinaryMask out(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            uint8_t v = 1;
            for (int dy = -1; dy <= 1 && v; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    int nx = x + dx, ny = y + dy;
                    if (nx < 0 || nx >= w || ny < 0 || ny >= h || !mask.at(nx, ny)) {
                        v = 0;
                        break;
                    }
                }
            }
            out.at(x, y) = v;
        }
    }
    return out;
}

BinaryMask dilate3x3(const BinaryMask& mask) {
    const int w = mask.width, h = mask.height;
    BinaryMask out(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            uint8_t v = 0;
            for (int dy = -1; dy <= 1 && !v; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    int nx = x + dx, ny = y + dy;
                    if (nx >= 0 && nx < w && ny >= 0 && ny < h && mask.at(nx, ny)) {
                        v = 1;
                        break;
                    }
                }
            }
            out.at(x, y) = v;
        }
    }
    return out;
}

BinaryMask dilate_chebyshev(const BinaryMask& mask, int radius) {
    if (radius <= 0) return mask;
    const int w = mask.width, h = mask.height;
    BinaryMask tmp(w, h), out(w, h);
    // horizontal run-max
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            uint8_t v = 0;
            int lo = std::max(0, x - radius), hi = std::min(w - 1, x + radius);
            for (int k = lo; k <= hi; ++k)
                if (mask.at(k, y)) {
                    v = 1;
                    break;
                }
            tmp.at(x, y) = v;
        }
    }
    // vertical run-max
    for (int x = 0; x < w; ++x) {
        for (int y = 0; y < h; ++y) {
            uint8_t v = 0;
            int lo = std::max(0, y - radius), hi = std::min(h - 1, y + radius);
            for (int k = lo; k <= hi; ++k)
                if (tmp.at(x, k)) {
                    v = 1;
                    break;
                }
            out.at(x, y) = v;
        }
    }
    return out;
}

} // namespace herdgen
