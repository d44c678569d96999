// SPDX-License-Identifier: Apache-2.0

#ifndef TFJKO_COMMON_HPP
#define TFJKO_COMMON_HPP

#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace tfjko
{

struct Error : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

// Bad arguments or violated preconditions.
struct InputError : Error
{
    using Error::Error;
};

// Iterative solver did not deliver.
struct SolverError : Error
{
    using Error::Error;
};

// Non-finite value produced while evaluating a user-supplied function.
struct EvaluationError : Error
{
    using Error::Error;
};

using WarningSink = std::function<void(const std::string&)>;

inline WarningSink& warning_sink()
{
    static WarningSink sink = [](const std::string& msg) { std::cerr << "warning: " << msg << '\n'; };
    return sink;
}

inline void warn(const std::string& msg)
{
    if (auto& sink = warning_sink())
        sink(msg);
}

inline std::string fmt17(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::vector<double> linspace(double a, double b, std::size_t n)
{
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i)
        out[i] = (n == 1) ? a : a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
    if (n > 1)
        out.back() = b;
    return out;
}

inline std::vector<double> logspace(double lo, double hi, std::size_t n)
{
    std::vector<double> out = linspace(std::log10(lo), std::log10(hi), n);
    for (auto& v : out)
        v = std::pow(10.0, v);
    return out;
}

} // namespace tfjko

#endif
