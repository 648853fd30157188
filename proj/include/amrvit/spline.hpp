#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace amrvit {

// Natural cubic spline through (x_k, y_k) with strictly increasing x.
// Second derivatives vanish at both ends; interior ones come from the
// standard tridiagonal system solved with the Thomas algorithm.
class CubicSpline {
public:
    CubicSpline(std::span<const double> xs, std::span<const double> ys) : x_(xs.begin(), xs.end()), y_(ys.begin(), ys.end()) {
        const size_t n = x_.size();
        if (n < 2 || y_.size() != n) throw std::invalid_argument("CubicSpline: need >= 2 matching knots");
        for (size_t k = 1; k < n; ++k)
            if (x_[k] <= x_[k - 1]) throw std::invalid_argument("CubicSpline: knots must be strictly increasing");
        m_.assign(n, 0.0);
        if (n == 2) return;  // straight line

        const size_t ni = n - 2;  // interior knots
        std::vector<double> diag(ni), off(ni - 1 + 1), rhs(ni);
        for (size_t k = 0; k < ni; ++k) {
            const double h0 = x_[k + 1] - x_[k];
            const double h1 = x_[k + 2] - x_[k + 1];
            diag[k] = 2.0 * (h0 + h1);
            if (k + 1 < ni) off[k] = h1;
            rhs[k] = 6.0 * ((y_[k + 2] - y_[k + 1]) / h1 - (y_[k + 1] - y_[k]) / h0);
        }
        // Thomas forward sweep; the sub-diagonal equals the super-diagonal
        // of the previous row for this system.
        for (size_t k = 1; k < ni; ++k) {
            const double w = off[k - 1] / diag[k - 1];
            diag[k] -= w * off[k - 1];
            rhs[k] -= w * rhs[k - 1];
        }
        m_[ni] = rhs[ni - 1] / diag[ni - 1];
        for (size_t k = ni - 1; k >= 1; --k) m_[k] = (rhs[k - 1] - off[k - 1] * m_[k + 1]) / diag[k - 1];
    }

    double operator()(double x) const {
        const size_t n = x_.size();
        size_t lo = 0, hi = n - 1;
        if (x <= x_.front()) {
            hi = 1;
        } else if (x >= x_.back()) {
            lo = n - 2;
        } else {
            while (hi - lo > 1) {
                const size_t mid = (lo + hi) / 2;
                (x_[mid] <= x ? lo : hi) = mid;
            }
        }
        const double h = x_[hi] - x_[lo];
        const double a = (x_[hi] - x) / h;
        const double b = (x - x_[lo]) / h;
        return a * y_[lo] + b * y_[hi] +
               ((a * a * a - a) * m_[lo] + (b * b * b - b) * m_[hi]) * h * h / 6.0;
    }

private:
    std::vector<double> x_, y_, m_;
};

}  // namespace amrvit
