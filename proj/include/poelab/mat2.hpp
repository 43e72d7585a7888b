#pragma once
// Small 2x2 real matrix type with closed-form singular values; everything the
// projective-circle cocycles need and nothing more.

#include <cmath>
#include <stdexcept>

namespace poelab {

struct Vec2 {
    double x = 0.0, y = 0.0;
    double norm() const { return std::hypot(x, y); }
};

struct Mat2 {
    // row-major [a b; c d]
    double a = 1.0, b = 0.0, c = 0.0, d = 1.0;

    static Mat2 identity() { return {}; }
    static Mat2 diag(double x, double y) { return {x, 0.0, 0.0, y}; }
    static Mat2 rotation(double t) {
        return {std::cos(t), -std::sin(t), std::sin(t), std::cos(t)};
    }
    static Mat2 scale(double s) { return {s, 0.0, 0.0, s}; }

    Vec2 apply(const Vec2& v) const { return {a * v.x + b * v.y, c * v.x + d * v.y}; }

    Mat2 operator*(const Mat2& o) const {
        return {a * o.a + b * o.c, a * o.b + b * o.d,
                c * o.a + d * o.c, c * o.b + d * o.d};
    }
    Mat2 operator-(const Mat2& o) const {
        return {a - o.a, b - o.b, c - o.c, d - o.d};
    }
    Mat2 times(double s) const { return {a * s, b * s, c * s, d * s}; }

    double det() const { return a * d - b * c; }

    Mat2 inverse() const {
        double dd = det();
        if (dd == 0.0) throw std::domain_error("singular 2x2 matrix");
        return {d / dd, -b / dd, -c / dd, a / dd};
    }

    // largest singular value
    double op_norm() const {
        double g11 = a * a + c * c, g22 = b * b + d * d, g12 = a * b + c * d;
        double tr = g11 + g22;
        double disc = (g11 - g22) * (g11 - g22) + 4.0 * g12 * g12;
        return std::sqrt(0.5 * (tr + std::sqrt(std::max(disc, 0.0))));
    }
    double sigma_min() const {
        double s1 = op_norm();
        return s1 > 0.0 ? std::abs(det()) / s1 : 0.0;
    }
    double cond() const {
        double s2 = sigma_min();
        return s2 > 0.0 ? op_norm() / s2 : 1.0 / 0.0;
    }
    double frob() const { return std::sqrt(a * a + b * b + c * c + d * d); }
};

} // namespace poelab
