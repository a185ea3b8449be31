// Independent reference computations used only by the tests. None of these
// call into the library; they are deliberately naive.
#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <vector>

namespace tsfl::oracle {

// Feature table of the toy series y = 10, 20, ..., 60 with rows t = 1..6.
// Column order: Lag k=1..5, RW(w=3) k=1..3, EW w=1..5. nullopt marks "-".
inline const std::vector<std::vector<std::optional<double>>>& toy_table() {
    using O = std::optional<double>;
    const O u = std::nullopt;
    static const std::vector<std::vector<O>> table = {
        {u, u, u, u, u, u, u, u, u, u, u, u, u},
        {10, u, u, u, u, u, u, u, 10, u, u, u, u},
        {20, 10, u, u, u, u, u, u, 20, 15, u, u, u},
        {30, 20, 10, u, u, 20, u, u, 30, 25, 20, u, u},
        {40, 30, 20, 10, u, 30, 20, u, 40, 35, 30, 25, u},
        {50, 40, 30, 20, 10, 40, 30, 20, 50, 45, 40, 35, 30},
    };
    return table;
}

// Features by direct summation over explicit 1-based ranges.
inline std::optional<double> lag(const std::vector<double>& y, long t, long k) {
    const long i = t - k;
    if (i < 1) return std::nullopt;
    return y.at(static_cast<std::size_t>(i - 1));
}

inline std::optional<double> mean_range(const std::vector<double>& y, long lo, long hi) {
    if (lo < 1 || hi < lo) return std::nullopt;
    double s = 0.0;
    for (long i = lo; i <= hi; ++i) s += y.at(static_cast<std::size_t>(i - 1));
    return s / static_cast<double>(hi - lo + 1);
}

inline std::optional<double> rolling(const std::vector<double>& y, long t, long k, long w) {
    return mean_range(y, t - k - w + 1, t - k);
}

inline std::optional<double> expanding(const std::vector<double>& y, long t, long w) {
    return mean_range(y, t - w, t - 1);
}

// Solves A x = b by Gaussian elimination with partial pivoting.
inline std::vector<double> gauss_solve(std::vector<std::vector<double>> a, std::vector<double> b) {
    const std::size_t n = b.size();
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < n; ++r) {
            if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
        }
        if (std::abs(a[piv][c]) < 1e-300) throw std::runtime_error("singular");
        std::swap(a[piv], a[c]);
        std::swap(b[piv], b[c]);
        for (std::size_t r = c + 1; r < n; ++r) {
            const double f = a[r][c] / a[c][c];
            for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
            b[r] -= f * b[c];
        }
    }
    std::vector<double> x(n);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t k = i + 1; k < n; ++k) s -= a[i][k] * x[k];
        x[i] = s / a[i][i];
    }
    return x;
}

// Weighted ridge normal equations on the design [1 | X]; the intercept is not
// penalised. Returns (intercept, coefficients...).
inline std::vector<double> weighted_ridge(const std::vector<std::vector<double>>& x, const std::vector<double>& y,
                                          const std::vector<double>& w, double ridge) {
    const std::size_t p = x.size();
    const std::size_t d = x.empty() ? 1 : x.front().size() + 1;
    std::vector<std::vector<double>> ata(d, std::vector<double>(d, 0.0));
    std::vector<double> aty(d, 0.0);
    for (std::size_t i = 0; i < p; ++i) {
        std::vector<double> row(d, 1.0);
        for (std::size_t j = 1; j < d; ++j) row[j] = x[i][j - 1];
        for (std::size_t r = 0; r < d; ++r) {
            aty[r] += w[i] * row[r] * y[i];
            for (std::size_t c = 0; c < d; ++c) ata[r][c] += w[i] * row[r] * row[c];
        }
    }
    for (std::size_t j = 1; j < d; ++j) ata[j][j] += ridge;
    return gauss_solve(ata, aty);
}

// U for sample a: pairs with a > b, plus half of the ties.
inline double pair_count_u(const std::vector<double>& a, const std::vector<double>& b) {
    double u = 0.0;
    for (double x : a) {
        for (double y : b) {
            if (x > y) u += 1.0;
            else if (x == y) u += 0.5;
        }
    }
    return u;
}

// Clipped centered moving average, written out per element.
inline std::vector<double> moving_average(const std::vector<double>& y, std::size_t m) {
    const long h = static_cast<long>(m / 2);
    const long n = static_cast<long>(y.size());
    std::vector<double> out;
    for (long t = 0; t < n; ++t) {
        double s = 0.0;
        long c = 0;
        for (long i = t - h; i <= t + h; ++i) {
            if (i >= 0 && i < n) {
                s += y[static_cast<std::size_t>(i)];
                ++c;
            }
        }
        out.push_back(s / static_cast<double>(c));
    }
    return out;
}

// Holt linear trend recursion, one explicit step at a time.
inline double holt_linear_forecast(const std::vector<double>& y, double alpha, double beta) {
    double level = y[0];
    double trend = y[1] - y[0];
    for (std::size_t t = 1; t < y.size(); ++t) {
        const double prev = level;
        level = alpha * y[t] + (1 - alpha) * (level + trend);
        trend = beta * (level - prev) + (1 - beta) * trend;
    }
    return level + trend;
}

}  // namespace tsfl::oracle
