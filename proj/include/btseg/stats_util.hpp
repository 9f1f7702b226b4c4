// stats_util.hpp
// Small shared numeric helpers.

#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace btseg {

// Percentile with linear interpolation between order statistics
// (rank = q/100 * (n-1)). q in [0,100].
template <typename T>
double percentile(std::vector<T> values, double q) {
    if (values.empty())
        throw std::invalid_argument("percentile: empty input");
    if (q < 0.0 || q > 100.0)
        throw std::invalid_argument("percentile: q out of [0,100]");
    const double rank = q / 100.0 * static_cast<double>(values.size() - 1);
    const size_t lo = static_cast<size_t>(std::floor(rank));
    const size_t hi = static_cast<size_t>(std::ceil(rank));
    std::nth_element(values.begin(), values.begin() + lo, values.end());
    const double vlo = static_cast<double>(values[lo]);
    if (hi == lo) return vlo;
    std::nth_element(values.begin() + lo + 1, values.begin() + hi,
                     values.end());
    const double vhi = static_cast<double>(values[hi]);
    return vlo + (rank - static_cast<double>(lo)) * (vhi - vlo);
}

inline double mean_of(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

inline double median_of(std::vector<double> v) {
    if (v.empty()) throw std::invalid_argument("median: empty input");
    const size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    double m = v[mid];
    if (v.size() % 2 == 0) {
        std::nth_element(v.begin(), v.begin() + mid - 1, v.begin() + mid);
        m = 0.5 * (m + v[mid - 1]);
    }
    return m;
}

}  // namespace btseg
