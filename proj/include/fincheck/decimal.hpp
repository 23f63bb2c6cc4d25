#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace fincheck {

/// Exact decimal number: value = coefficient * 10^(-scale).
///
/// Addition, subtraction, multiplication and comparison are exact.
/// Division is exact when the quotient terminates within kDivDigits
/// significant digits, otherwise rounded half-even at kDivDigits.
/// Threshold comparisons (0.05, 0.02, ...) therefore never hinge on
/// binary representation error.
class Decimal {
public:
  using Int = boost::multiprecision::cpp_int;

  static constexpr int kDivDigits = 40;

  Decimal() = default;
  Decimal(long long v) : coeff_(v) { normalize(); }
  Decimal(Int coeff, int scale) : coeff_(std::move(coeff)), scale_(scale) { normalize(); }

  /// Parses [+-]?digits[.digits]. Returns nullopt on any other shape.
  static std::optional<Decimal> parse(std::string_view text) {
    if (text.empty()) return std::nullopt;
    size_t i = 0;
    bool neg = false;
    if (text[i] == '+' || text[i] == '-') {
      neg = text[i] == '-';
      ++i;
    }
    Int coeff = 0;
    int scale = 0;
    size_t int_digits = 0, frac_digits = 0;
    while (i < text.size() && text[i] >= '0' && text[i] <= '9') {
      coeff = coeff * 10 + (text[i] - '0');
      ++int_digits;
      ++i;
    }
    if (i < text.size() && text[i] == '.') {
      ++i;
      while (i < text.size() && text[i] >= '0' && text[i] <= '9') {
        coeff = coeff * 10 + (text[i] - '0');
        ++frac_digits;
        ++i;
      }
      if (frac_digits == 0) return std::nullopt;
    }
    if (i != text.size() || int_digits == 0) return std::nullopt;
    scale = static_cast<int>(frac_digits);
    if (neg) coeff = -coeff;
    return Decimal(std::move(coeff), scale);
  }

  bool is_zero() const { return coeff_ == 0; }
  bool is_negative() const { return coeff_ < 0; }

  bool is_integer() const { return scale_ <= 0; }

  Decimal operator-() const { return Decimal(-coeff_, scale_); }

  friend Decimal operator+(const Decimal& a, const Decimal& b) {
    auto [ca, cb, s] = aligned(a, b);
    return Decimal(ca + cb, s);
  }
  friend Decimal operator-(const Decimal& a, const Decimal& b) {
    auto [ca, cb, s] = aligned(a, b);
    return Decimal(ca - cb, s);
  }
  friend Decimal operator*(const Decimal& a, const Decimal& b) {
    return Decimal(a.coeff_ * b.coeff_, a.scale_ + b.scale_);
  }

  /// nullopt iff divisor is zero.
  static std::optional<Decimal> divide(const Decimal& a, const Decimal& b) {
    if (b.coeff_ == 0) return std::nullopt;
    if (a.coeff_ == 0) return Decimal();
    // Scale the dividend so the integer quotient carries kDivDigits
    // significant digits, then round half-even on the remainder.
    int extra = kDivDigits + digit_count(b.coeff_) - digit_count(a.coeff_);
    if (extra < 0) extra = 0;
    Int num = a.coeff_ * pow10(extra);
    Int den = b.coeff_;
    Int q = num / den;
    Int r = num % den;
    int scale = a.scale_ - b.scale_ + extra;
    if (r != 0) {
      // Half-even rounding toward the true quotient.
      bool neg = (num < 0) != (den < 0);
      Int absr2 = 2 * abs(r);
      Int absden = abs(den);
      bool bump = absr2 > absden || (absr2 == absden && ((q % 2) != 0));
      if (bump) q += neg ? -1 : 1;
    }
    return Decimal(std::move(q), scale);
  }

  friend bool operator==(const Decimal& a, const Decimal& b) {
    return a.coeff_ == b.coeff_ && a.scale_ == b.scale_;
  }
  friend std::strong_ordering operator<=>(const Decimal& a, const Decimal& b) {
    auto [ca, cb, s] = aligned(a, b);
    if (ca < cb) return std::strong_ordering::less;
    if (ca > cb) return std::strong_ordering::greater;
    return std::strong_ordering::equal;
  }

  /// Canonical plain-notation rendering: no exponent, no trailing
  /// fraction zeros, no leading zeros, "-0" never emitted.
  std::string to_string() const {
    if (coeff_ == 0) return "0";
    Int a = abs(coeff_);
    std::string digits = a.str();
    std::string out;
    if (coeff_ < 0) out += '-';
    if (scale_ <= 0) {
      out += digits;
      out.append(static_cast<size_t>(-scale_), '0');
    } else if (static_cast<size_t>(scale_) < digits.size()) {
      out += digits.substr(0, digits.size() - scale_);
      out += '.';
      out += digits.substr(digits.size() - scale_);
    } else {
      out += "0.";
      out.append(static_cast<size_t>(scale_) - digits.size(), '0');
      out += digits;
    }
    return out;
  }

  double to_double() const {
    return std::stod(to_string());
  }

  const Int& coefficient() const { return coeff_; }
  int scale() const { return scale_; }

private:
  Int coeff_ = 0;
  int scale_ = 0;

  void normalize() {
    if (coeff_ == 0) {
      scale_ = 0;
      return;
    }
    while (scale_ > 0 && coeff_ % 10 == 0) {
      coeff_ /= 10;
      --scale_;
    }
  }

  static Int pow10(int n) {
    Int p = 1;
    for (int i = 0; i < n; ++i) p *= 10;
    return p;
  }

  static int digit_count(const Int& v) {
    Int a = abs(v);
    return static_cast<int>(a.str().size());
  }

  struct Aligned {
    Int a, b;
    int scale;
  };
  static Aligned aligned(const Decimal& x, const Decimal& y) {
    if (x.scale_ == y.scale_) return {x.coeff_, y.coeff_, x.scale_};
    if (x.scale_ < y.scale_) return {x.coeff_ * pow10(y.scale_ - x.scale_), y.coeff_, y.scale_};
    return {x.coeff_, y.coeff_ * pow10(x.scale_ - y.scale_), x.scale_};
  }
};

}  // namespace fincheck
