#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <vector>

namespace divbelief {

/// log(sum_i exp(x_i)), shifted by the maximum so that no term overflows.
/// Returns -inf for an empty range or when every x_i is -inf.
double log_sum_exp(std::span<const double> x) noexcept;

/// Normalized weights exp(x_i) / sum_k exp(x_k), computed stably.
std::vector<double> softmax(std::span<const double> x);

/// exp(x) that throws SaturationError instead of returning inf or a
/// subnormal/zero result.
double checked_exp(double x);

/// Streaming mean/variance (Welford) with an exact-order merge so that parallel
/// partial results can be folded deterministically.
class RunningStats {
public:
    void add(double x) noexcept;
    void merge(const RunningStats& other) noexcept;

    std::size_t count() const noexcept { return n_; }
    double mean() const noexcept { return n_ ? mean_ : std::numeric_limits<double>::quiet_NaN(); }
    /// Population variance (divides by n).
    double variance() const noexcept;
    double stddev() const noexcept { return std::sqrt(variance()); }
    /// Sample variance (divides by n - 1).
    double sample_variance() const noexcept;

private:
    std::size_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

/// Bisection on a bracket with f(lo) and f(hi) of opposite signs. Stops when
/// the bracket is narrower than xtol or cannot be split further. Throws
/// BracketError if the endpoints do not bracket a root.
double bisect(const std::function<double(double)>& f, double lo, double hi, double xtol);

} // namespace divbelief
