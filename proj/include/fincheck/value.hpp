#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>

#include "fincheck/calendar.hpp"
#include "fincheck/decimal.hpp"

namespace fincheck {

/// Concrete runtime value kinds. Unknown is not a kind: it is the
/// absence of a concrete value (see TypedValue).
enum class ValueType : std::uint8_t { Number, Text, Boolean, Date };

inline const char* to_token(ValueType t) {
  switch (t) {
    case ValueType::Number: return "number";
    case ValueType::Text: return "text";
    case ValueType::Boolean: return "boolean";
    case ValueType::Date: return "date";
  }
  return "?";
}

/// Kleene three-valued boolean.
enum class Tri : std::uint8_t { False = 0, True = 1, Unknown = 2 };

inline Tri tri_of(bool b) { return b ? Tri::True : Tri::False; }

inline Tri tri_not(Tri a) {
  if (a == Tri::Unknown) return Tri::Unknown;
  return a == Tri::True ? Tri::False : Tri::True;
}

inline Tri tri_and(Tri a, Tri b) {
  if (a == Tri::False || b == Tri::False) return Tri::False;
  if (a == Tri::Unknown || b == Tri::Unknown) return Tri::Unknown;
  return Tri::True;
}

inline Tri tri_or(Tri a, Tri b) {
  if (a == Tri::True || b == Tri::True) return Tri::True;
  if (a == Tri::Unknown || b == Tri::Unknown) return Tri::Unknown;
  return Tri::False;
}

inline const char* to_token(Tri t) {
  switch (t) {
    case Tri::False: return "false";
    case Tri::True: return "true";
    case Tri::Unknown: return "unknown";
  }
  return "?";
}

/// Evaluation result / table cell: one of the four concrete kinds, or
/// Unknown (the missing-data marker, also used for Null cells).
/// operator== is model equality: Unknown equals Unknown and differs
/// from every concrete value. Kleene comparison lives in the evaluator.
class TypedValue {
public:
  TypedValue() = default;  // Unknown

  static TypedValue unknown() { return TypedValue(); }
  static TypedValue number(Decimal d) { return TypedValue(Storage(std::move(d))); }
  static TypedValue text(std::string s) { return TypedValue(Storage(std::move(s))); }
  static TypedValue boolean(bool b) { return TypedValue(Storage(b)); }
  static TypedValue date(Date d) { return TypedValue(Storage(d)); }

  bool is_unknown() const { return std::holds_alternative<std::monostate>(v_); }

  std::optional<ValueType> kind() const {
    if (std::holds_alternative<Decimal>(v_)) return ValueType::Number;
    if (std::holds_alternative<std::string>(v_)) return ValueType::Text;
    if (std::holds_alternative<bool>(v_)) return ValueType::Boolean;
    if (std::holds_alternative<Date>(v_)) return ValueType::Date;
    return std::nullopt;
  }

  const Decimal* as_number() const { return std::get_if<Decimal>(&v_); }
  const std::string* as_text() const { return std::get_if<std::string>(&v_); }
  const bool* as_boolean() const { return std::get_if<bool>(&v_); }
  const Date* as_date() const { return std::get_if<Date>(&v_); }

  Tri as_tri() const {
    if (auto* b = as_boolean()) return tri_of(*b);
    return Tri::Unknown;
  }

  friend bool operator==(const TypedValue& a, const TypedValue& b) { return a.v_ == b.v_; }

  /// Canonical display: decimals plain, dates ISO, booleans lowercase,
  /// Unknown as "unknown".
  std::string to_display_string() const {
    if (auto* n = as_number()) return n->to_string();
    if (auto* t = as_text()) return *t;
    if (auto* b = as_boolean()) return *b ? "true" : "false";
    if (auto* d = as_date()) return d->to_string();
    return "unknown";
  }

private:
  using Storage = std::variant<std::monostate, Decimal, std::string, bool, Date>;
  explicit TypedValue(Storage v) : v_(std::move(v)) {}
  Storage v_;
};

}  // namespace fincheck
