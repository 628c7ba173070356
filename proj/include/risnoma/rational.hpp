#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>

namespace risnoma {

// Exact rational arithmetic for BER term weights. Magnitudes stay tiny
// (denominators are products of per-dimension level counts), so plain
// int64 with gcd normalization is plenty.
struct Rational {
    std::int64_t num{0};
    std::int64_t den{1};

    constexpr Rational() = default;
    constexpr explicit Rational(std::int64_t n) : num(n), den(1) {}

    Rational(std::int64_t n, std::int64_t d) : num(n), den(d) {
        if (den == 0) throw std::invalid_argument("Rational: zero denominator");
        if (den < 0) {
            num = -num;
            den = -den;
        }
        const std::int64_t g = std::gcd(num < 0 ? -num : num, den);
        if (g > 1) {
            num /= g;
            den /= g;
        }
    }

    static Rational integer(std::int64_t n) { return Rational(n, 1); }

    [[nodiscard]] Rational operator+(const Rational& o) const {
        return Rational(num * o.den + o.num * den, den * o.den);
    }
    [[nodiscard]] Rational operator-(const Rational& o) const {
        return Rational(num * o.den - o.num * den, den * o.den);
    }
    [[nodiscard]] Rational operator*(const Rational& o) const {
        return Rational(num * o.num, den * o.den);
    }
    [[nodiscard]] Rational operator-() const { return Rational(-num, den); }

    bool operator==(const Rational& o) const { return num == o.num && den == o.den; }
    bool operator!=(const Rational& o) const { return !(*this == o); }

    [[nodiscard]] bool is_zero() const { return num == 0; }
    [[nodiscard]] double value() const { return static_cast<double>(num) / static_cast<double>(den); }

    [[nodiscard]] std::string str() const {
        if (den == 1) return std::to_string(num);
        return std::to_string(num) + "/" + std::to_string(den);
    }
};

}  // namespace risnoma
