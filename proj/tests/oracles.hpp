#pragma once

// Straightforward reference implementations used to cross-check the analysis code.

#include "vmld/trace.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace oracle
{
    inline double mean(const std::vector<double> &v)
    {
        long double s = 0;
        for (double x : v)
            s += x;
        return static_cast<double>(s / v.size());
    }

    // Textbook Pearson with long-double accumulation.
    inline double pearson(const std::vector<double> &a, const std::vector<double> &b)
    {
        const long double ma = mean(a), mb = mean(b);
        long double sab = 0, saa = 0, sbb = 0;
        for (std::size_t i = 0; i < a.size(); ++i)
        {
            sab += (a[i] - ma) * (b[i] - mb);
            saa += (a[i] - ma) * (a[i] - ma);
            sbb += (b[i] - mb) * (b[i] - mb);
        }
        return static_cast<double>(sab / std::sqrt(saa * sbb));
    }

    // O(N * window) moving average.
    inline std::vector<double> moving_fdr(const std::vector<std::uint8_t> &x, std::size_t w)
    {
        std::vector<double> out;
        for (std::size_t k = 0; k + w <= x.size(); ++k)
        {
            std::size_t s = 0;
            for (std::size_t j = k; j < k + w; ++j)
                s += x[j];
            out.push_back(static_cast<double>(s) / static_cast<double>(w));
        }
        return out;
    }

    // k-th order statistic with k = smallest integer with k / N >= p.
    inline double percentile(std::vector<double> v, double p)
    {
        std::sort(v.begin(), v.end());
        std::size_t k = 1;
        while (k < v.size() && static_cast<double>(k) < p * static_cast<double>(v.size()) - 1e-9)
            ++k;
        return v[k - 1];
    }

    inline double stddev(const std::vector<double> &v)
    {
        const long double m = mean(v);
        long double s = 0;
        for (double x : v)
            s += (x - m) * (x - m);
        return static_cast<double>(std::sqrt(s / v.size()));
    }

    // Density per bin by direct counting over [lo, lo + bins * w); out-of-range values fold into the end bins.
    inline std::vector<double> histogram(const std::vector<double> &v, double lo, double w, std::size_t bins)
    {
        std::vector<double> y(bins, 0.0);
        for (double x : v)
        {
            long k = static_cast<long>(std::floor((x - lo) / w));
            k = std::clamp<long>(k, 0, static_cast<long>(bins) - 1);
            y[static_cast<std::size_t>(k)] += 1.0;
        }
        for (auto &c : y)
            c /= static_cast<double>(v.size()) * w;
        return y;
    }

    inline double exceedance(const std::vector<double> &v, double x)
    {
        std::size_t n = 0;
        for (double d : v)
            n += d > x ? 1 : 0;
        return static_cast<double>(n) / static_cast<double>(v.size());
    }

    inline bool rel_close(double got, double want, double rel)
    {
        const double scale = std::max({std::fabs(got), std::fabs(want), 1e-300});
        return std::fabs(got - want) <= rel * scale || std::fabs(got - want) <= 1e-12;
    }
} // namespace oracle
