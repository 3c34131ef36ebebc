#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>

namespace stlsynth {

// Exact rational arithmetic for temporal-interval bounds and the grid step c.
// All divisibility decisions are made here, never with floating-point modulo.
struct Rational {
    std::int64_t num = 0;
    std::int64_t den = 1;

    Rational() = default;
    Rational(std::int64_t n) : num(n), den(1) {}
    Rational(std::int64_t n, std::int64_t d) : num(n), den(d) { normalize(); }

    void normalize() {
        if (den == 0) throw std::invalid_argument("rational with zero denominator");
        if (den < 0) { num = -num; den = -den; }
        std::int64_t g = std::gcd(num < 0 ? -num : num, den);
        if (g > 1) { num /= g; den /= g; }
        if (num == 0) den = 1;
    }

    double to_double() const { return static_cast<double>(num) / static_cast<double>(den); }

    friend Rational operator+(Rational a, Rational b) {
        return Rational(check_mul(a.num, b.den) + check_mul(b.num, a.den), check_mul(a.den, b.den));
    }
    friend Rational operator-(Rational a, Rational b) {
        return Rational(check_mul(a.num, b.den) - check_mul(b.num, a.den), check_mul(a.den, b.den));
    }
    friend Rational operator*(Rational a, Rational b) {
        return Rational(check_mul(a.num, b.num), check_mul(a.den, b.den));
    }
    friend Rational operator/(Rational a, Rational b) {
        if (b.num == 0) throw std::domain_error("rational division by zero");
        return Rational(check_mul(a.num, b.den), check_mul(a.den, b.num));
    }
    friend bool operator==(const Rational& a, const Rational& b) {
        return a.num == b.num && a.den == b.den;
    }
    friend bool operator!=(const Rational& a, const Rational& b) { return !(a == b); }
    friend bool operator<(const Rational& a, const Rational& b) {
        return static_cast<__int128>(a.num) * b.den < static_cast<__int128>(b.num) * a.den;
    }
    friend bool operator<=(const Rational& a, const Rational& b) { return a < b || a == b; }
    friend bool operator>(const Rational& a, const Rational& b) { return b < a; }
    friend bool operator>=(const Rational& a, const Rational& b) { return b <= a; }

    // true iff *this is an integer multiple of c (c > 0), decided exactly.
    bool divisible_by(const Rational& c) const {
        if (c.num <= 0) throw std::domain_error("divisor must be positive");
        __int128 n = static_cast<__int128>(num) * c.den;
        __int128 d = static_cast<__int128>(den) * c.num;
        return n % d == 0;
    }

    // (*this)/c as an exact integer; precondition: divisible_by(c).
    std::int64_t exact_quotient(const Rational& c) const {
        __int128 n = static_cast<__int128>(num) * c.den;
        __int128 d = static_cast<__int128>(den) * c.num;
        return static_cast<std::int64_t>(n / d);
    }

    std::string str() const {
        if (den == 1) return std::to_string(num);
        return std::to_string(num) + "/" + std::to_string(den);
    }

    // Parses "3", "-1/2" or decimal "0.125". Decimals are exact base-10 rationals.
    static Rational parse(const std::string& s);

private:
    static std::int64_t check_mul(std::int64_t a, std::int64_t b) {
        __int128 r = static_cast<__int128>(a) * b;
        if (r > INT64_MAX || r < INT64_MIN) throw std::overflow_error("rational overflow");
        return static_cast<std::int64_t>(r);
    }
};

inline Rational Rational::parse(const std::string& s) {
    if (s.empty()) throw std::invalid_argument("empty rational literal");
    auto slash = s.find('/');
    if (slash != std::string::npos) {
        return Rational(std::stoll(s.substr(0, slash)), std::stoll(s.substr(slash + 1)));
    }
    auto dot = s.find('.');
    if (dot == std::string::npos) return Rational(std::stoll(s));
    std::string ip = s.substr(0, dot), fp = s.substr(dot + 1);
    bool neg = !ip.empty() && ip[0] == '-';
    std::int64_t den = 1;
    for (std::size_t i = 0; i < fp.size(); ++i) {
        den = Rational::check_mul(den, 10);
    }
    std::int64_t whole = ip.empty() || ip == "-" ? 0 : std::stoll(ip);
    std::int64_t frac = fp.empty() ? 0 : std::stoll(fp);
    std::int64_t n = Rational::check_mul(whole < 0 ? -whole : whole, den) + frac;
    if (neg || whole < 0) n = -n;
    return Rational(n, den);
}

}  // namespace stlsynth
