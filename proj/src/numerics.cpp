#include "divbelief/numerics.hpp"

#include <algorithm>

#include "divbelief/errors.hpp"

namespace divbelief {

double log_sum_exp(std::span<const double> x) noexcept {
    if (x.empty()) {
        return -std::numeric_limits<double>::infinity();
    }
    const double m = *std::max_element(x.begin(), x.end());
    if (!std::isfinite(m)) {
        return m;
    }
    double sum = 0.0;
    for (double v : x) {
        sum += std::exp(v - m);
    }
    return m + std::log(sum);
}

std::vector<double> softmax(std::span<const double> x) {
    std::vector<double> w(x.size());
    if (x.empty()) {
        return w;
    }
    const double m = *std::max_element(x.begin(), x.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        w[i] = std::exp(x[i] - m);
        sum += w[i];
    }
    for (double& v : w) {
        v /= sum;
    }
    return w;
}

double checked_exp(double x) {
    static const double hi = std::log(std::numeric_limits<double>::max());
    static const double lo = std::log(std::numeric_limits<double>::min());
    if (!(x <= hi && x >= lo)) {
        throw SaturationError(x);
    }
    return std::exp(x);
}

void RunningStats::add(double x) noexcept {
    ++n_;
    const double delta = x - mean_;
    mean_ += delta / static_cast<double>(n_);
    m2_ += delta * (x - mean_);
}

void RunningStats::merge(const RunningStats& other) noexcept {
    if (other.n_ == 0) {
        return;
    }
    if (n_ == 0) {
        *this = other;
        return;
    }
    const double na = static_cast<double>(n_);
    const double nb = static_cast<double>(other.n_);
    const double n = na + nb;
    const double delta = other.mean_ - mean_;
    mean_ += delta * nb / n;
    m2_ += other.m2_ + delta * delta * na * nb / n;
    n_ += other.n_;
}

double RunningStats::variance() const noexcept {
    if (n_ == 0) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    return m2_ / static_cast<double>(n_);
}

double RunningStats::sample_variance() const noexcept {
    if (n_ < 2) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    return m2_ / static_cast<double>(n_ - 1);
}

double bisect(const std::function<double(double)>& f, double lo, double hi, double xtol) {
    double flo = f(lo);
    const double fhi = f(hi);
    if (flo == 0.0) {
        return lo;
    }
    if (fhi == 0.0) {
        return hi;
    }
    if ((flo < 0.0) == (fhi < 0.0) || std::isnan(flo) || std::isnan(fhi)) {
        throw BracketError("bisect: endpoints do not bracket a root");
    }
    while (hi - lo > xtol) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) {
            break;
        }
        const double fm = f(mid);
        if (fm == 0.0) {
            return mid;
        }
        if ((fm < 0.0) == (flo < 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

} // namespace divbelief
