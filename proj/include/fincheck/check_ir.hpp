#pragma once

#include <cctype>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "fincheck/value.hpp"

namespace fincheck {

/// Static expression types. Column references (and parameters without a
/// known binding) are Dynamic: their concrete kind is only known against
/// a table, so static checking is shape-level and the evaluator settles
/// the rest at runtime (mismatches become Unknown, never faults).
enum class IrType : std::uint8_t { Number, Text, Boolean, Date, Dynamic };

inline const char* to_token(IrType t) {
  switch (t) {
    case IrType::Number: return "number";
    case IrType::Text: return "text";
    case IrType::Boolean: return "boolean";
    case IrType::Date: return "date";
    case IrType::Dynamic: return "dynamic";
  }
  return "?";
}

inline IrType ir_type_of(ValueType v) {
  switch (v) {
    case ValueType::Number: return IrType::Number;
    case ValueType::Text: return IrType::Text;
    case ValueType::Boolean: return IrType::Boolean;
    case ValueType::Date: return IrType::Date;
  }
  return IrType::Dynamic;
}

struct IrSyntaxError : std::runtime_error {
  IrSyntaxError(size_t pos, const std::string& expected)
      : std::runtime_error("syntax error at position " + std::to_string(pos) + ": expected " +
                           expected),
        position(pos),
        expected(expected) {}
  size_t position;
  std::string expected;
};

struct IrTypeError : std::runtime_error {
  IrTypeError(size_t pos, const std::string& expected, const std::string& found)
      : std::runtime_error("type error at position " + std::to_string(pos) + ": expected " +
                           expected + ", found " + found),
        position(pos),
        expected(expected),
        found(found) {}
  size_t position;
  std::string expected;
  std::string found;
};

enum class BinaryOp : std::uint8_t {
  Add, Sub, Mul, Div,
  Eq, Ne, Lt, Le, Gt, Ge,
  And, Or,
};

inline bool is_comparison(BinaryOp op) {
  return op == BinaryOp::Eq || op == BinaryOp::Ne || op == BinaryOp::Lt || op == BinaryOp::Le ||
         op == BinaryOp::Gt || op == BinaryOp::Ge;
}
inline bool is_arithmetic(BinaryOp op) {
  return op == BinaryOp::Add || op == BinaryOp::Sub || op == BinaryOp::Mul || op == BinaryOp::Div;
}
inline bool is_ordering(BinaryOp op) {
  return op == BinaryOp::Lt || op == BinaryOp::Le || op == BinaryOp::Gt || op == BinaryOp::Ge;
}

enum class UnaryOp : std::uint8_t { Neg, Not };
enum class AggOp : std::uint8_t { Sum, Count, Min, Max, Avg };
enum class QuantOp : std::uint8_t { Exists, Forall };
enum class DateFnOp : std::uint8_t { DaysBetween, WithinDays };

inline const char* to_token(AggOp op) {
  switch (op) {
    case AggOp::Sum: return "sum";
    case AggOp::Count: return "count";
    case AggOp::Min: return "min";
    case AggOp::Max: return "max";
    case AggOp::Avg: return "avg";
  }
  return "?";
}

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct NumberLit { Decimal value; };
struct TextLit { std::string value; };
struct BoolLit { bool value; };
struct DateLit { Date value; };
struct ColumnRef { std::string name; };
struct ParamRef { std::string name; };
struct Unary { UnaryOp op; ExprPtr operand; };
struct Binary { BinaryOp op; ExprPtr lhs; ExprPtr rhs; };
struct Aggregate { AggOp op; ExprPtr arg; ExprPtr where; /* may be null */ };
struct Quantifier { QuantOp op; ExprPtr pred; ExprPtr where; /* may be null */ };
struct DateFn { DateFnOp op; std::vector<ExprPtr> args; };

/// Immutable AST node with source position and the type assigned by the
/// static check. Expressions are shared freely across threads.
struct Expr {
  using Node = std::variant<NumberLit, TextLit, BoolLit, DateLit, ColumnRef, ParamRef, Unary,
                            Binary, Aggregate, Quantifier, DateFn>;
  size_t pos = 0;
  IrType type = IrType::Dynamic;
  Node node;
};

inline ExprPtr make_expr(size_t pos, IrType type, Expr::Node node) {
  auto e = std::make_shared<Expr>();
  e->pos = pos;
  e->type = type;
  e->node = std::move(node);
  return e;
}

namespace detail {

enum class Tok : std::uint8_t {
  End, Number, String, Ident, Keyword,
  LParen, RParen, Comma,
  Plus, Minus, Star, Slash,
  Eq, Ne, Lt, Le, Gt, Ge,
};

struct Token {
  Tok tok = Tok::End;
  size_t pos = 0;
  std::string text;   // ident/keyword/string payload
  Decimal number;
};

inline const std::set<std::string>& ir_keywords() {
  static const std::set<std::string> kw = {
      "and", "or", "not", "exists", "forall", "where", "sum",  "count",       "min",
      "max", "avg", "param", "within_days", "days_between", "true", "false", "date"};
  return kw;
}

inline std::vector<Token> lex(std::string_view text) {
  std::vector<Token> out;
  size_t i = 0;
  auto err = [&](const std::string& what) { throw IrSyntaxError(i, what); };
  while (i < text.size()) {
    char c = text[i];
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      ++i;
      continue;
    }
    Token t;
    t.pos = i;
    if (std::isdigit(static_cast<unsigned char>(c))) {
      size_t j = i;
      while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
      if (j < text.size() && text[j] == '.') {
        ++j;
        if (j >= text.size() || !std::isdigit(static_cast<unsigned char>(text[j])))
          throw IrSyntaxError(j, "digit after decimal point");
        while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
      }
      auto d = Decimal::parse(text.substr(i, j - i));
      if (!d) err("number");
      t.tok = Tok::Number;
      t.number = *d;
      i = j;
    } else if (c == '"') {
      std::string s;
      size_t j = i + 1;
      bool closed = false;
      while (j < text.size()) {
        if (text[j] == '\\' && j + 1 < text.size() && (text[j + 1] == '"' || text[j + 1] == '\\')) {
          s += text[j + 1];
          j += 2;
        } else if (text[j] == '"') {
          closed = true;
          ++j;
          break;
        } else {
          s += text[j];
          ++j;
        }
      }
      if (!closed) throw IrSyntaxError(text.size(), "closing '\"'");
      t.tok = Tok::String;
      t.text = std::move(s);
      i = j;
    } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      size_t j = i;
      while (j < text.size() &&
             (std::isalnum(static_cast<unsigned char>(text[j])) || text[j] == '_'))
        ++j;
      t.text = std::string(text.substr(i, j - i));
      t.tok = ir_keywords().count(t.text) ? Tok::Keyword : Tok::Ident;
      i = j;
    } else {
      switch (c) {
        case '(': t.tok = Tok::LParen; ++i; break;
        case ')': t.tok = Tok::RParen; ++i; break;
        case ',': t.tok = Tok::Comma; ++i; break;
        case '+': t.tok = Tok::Plus; ++i; break;
        case '-': t.tok = Tok::Minus; ++i; break;
        case '*': t.tok = Tok::Star; ++i; break;
        case '/': t.tok = Tok::Slash; ++i; break;
        case '=': t.tok = Tok::Eq; ++i; break;
        case '!':
          if (i + 1 < text.size() && text[i + 1] == '=') {
            t.tok = Tok::Ne;
            i += 2;
          } else {
            err("'=' after '!'");
          }
          break;
        case '<':
          if (i + 1 < text.size() && text[i + 1] == '=') {
            t.tok = Tok::Le;
            i += 2;
          } else {
            t.tok = Tok::Lt;
            ++i;
          }
          break;
        case '>':
          if (i + 1 < text.size() && text[i + 1] == '=') {
            t.tok = Tok::Ge;
            i += 2;
          } else {
            t.tok = Tok::Gt;
            ++i;
          }
          break;
        default:
          err("token");
      }
    }
    out.push_back(std::move(t));
  }
  Token end;
  end.tok = Tok::End;
  end.pos = text.size();
  out.push_back(end);
  return out;
}

/// Recursive-descent parser. Precedence, loosest to tightest:
///   or < and < comparison < not < additive < multiplicative < unary minus.
/// ('not' binds tighter than comparisons, per the published grammar.)
class Parser {
public:
  explicit Parser(std::string_view text) : toks_(lex(text)) {}

  ExprPtr parse() {
    ExprPtr e = parse_or();
    expect(Tok::End, "end of input");
    return e;
  }

private:
  std::vector<Token> toks_;
  size_t at_ = 0;

  const Token& peek() const { return toks_[at_]; }
  Token take() { return toks_[at_++]; }
  bool accept(Tok t) {
    if (peek().tok == t) {
      ++at_;
      return true;
    }
    return false;
  }
  bool accept_kw(std::string_view kw) {
    if (peek().tok == Tok::Keyword && peek().text == kw) {
      ++at_;
      return true;
    }
    return false;
  }
  void expect(Tok t, const std::string& what) {
    if (!accept(t)) throw IrSyntaxError(peek().pos, what);
  }

  ExprPtr parse_or() {
    ExprPtr e = parse_and();
    while (peek().tok == Tok::Keyword && peek().text == "or") {
      size_t pos = take().pos;
      e = make_expr(pos, IrType::Dynamic, Binary{BinaryOp::Or, e, parse_and()});
    }
    return e;
  }

  ExprPtr parse_and() {
    ExprPtr e = parse_comparison();
    while (peek().tok == Tok::Keyword && peek().text == "and") {
      size_t pos = take().pos;
      e = make_expr(pos, IrType::Dynamic, Binary{BinaryOp::And, e, parse_comparison()});
    }
    return e;
  }

  ExprPtr parse_comparison() {
    ExprPtr e = parse_not();
    std::optional<BinaryOp> op;
    switch (peek().tok) {
      case Tok::Eq: op = BinaryOp::Eq; break;
      case Tok::Ne: op = BinaryOp::Ne; break;
      case Tok::Lt: op = BinaryOp::Lt; break;
      case Tok::Le: op = BinaryOp::Le; break;
      case Tok::Gt: op = BinaryOp::Gt; break;
      case Tok::Ge: op = BinaryOp::Ge; break;
      default: break;
    }
    if (op) {
      size_t pos = take().pos;
      e = make_expr(pos, IrType::Dynamic, Binary{*op, e, parse_not()});
    }
    return e;
  }

  ExprPtr parse_not() {
    if (peek().tok == Tok::Keyword && peek().text == "not") {
      size_t pos = take().pos;
      return make_expr(pos, IrType::Dynamic, Unary{UnaryOp::Not, parse_not()});
    }
    return parse_additive();
  }

  ExprPtr parse_additive() {
    ExprPtr e = parse_multiplicative();
    while (peek().tok == Tok::Plus || peek().tok == Tok::Minus) {
      BinaryOp op = peek().tok == Tok::Plus ? BinaryOp::Add : BinaryOp::Sub;
      size_t pos = take().pos;
      e = make_expr(pos, IrType::Dynamic, Binary{op, e, parse_multiplicative()});
    }
    return e;
  }

  ExprPtr parse_multiplicative() {
    ExprPtr e = parse_unary();
    while (peek().tok == Tok::Star || peek().tok == Tok::Slash) {
      BinaryOp op = peek().tok == Tok::Star ? BinaryOp::Mul : BinaryOp::Div;
      size_t pos = take().pos;
      e = make_expr(pos, IrType::Dynamic, Binary{op, e, parse_unary()});
    }
    return e;
  }

  ExprPtr parse_unary() {
    if (peek().tok == Tok::Minus) {
      size_t pos = take().pos;
      return make_expr(pos, IrType::Dynamic, Unary{UnaryOp::Neg, parse_unary()});
    }
    return parse_primary();
  }

  ExprPtr parse_primary() {
    const Token& t = peek();
    switch (t.tok) {
      case Tok::Number: {
        Token tok = take();
        return make_expr(tok.pos, IrType::Number, NumberLit{tok.number});
      }
      case Tok::String: {
        Token tok = take();
        return make_expr(tok.pos, IrType::Text, TextLit{tok.text});
      }
      case Tok::LParen: {
        take();
        ExprPtr e = parse_or();
        expect(Tok::RParen, "')'");
        return e;
      }
      case Tok::Ident: {
        Token tok = take();
        return make_expr(tok.pos, IrType::Dynamic, ColumnRef{tok.text});
      }
      case Tok::Keyword:
        return parse_keyword_primary();
      default:
        throw IrSyntaxError(t.pos, "expression");
    }
  }

  ExprPtr parse_keyword_primary() {
    Token t = take();
    const std::string& kw = t.text;
    if (kw == "true") return make_expr(t.pos, IrType::Boolean, BoolLit{true});
    if (kw == "false") return make_expr(t.pos, IrType::Boolean, BoolLit{false});
    if (kw == "date") {
      expect(Tok::LParen, "'('");
      if (peek().tok != Tok::String) throw IrSyntaxError(peek().pos, "date string literal");
      Token s = take();
      auto d = Date::parse(s.text);
      if (!d) throw IrSyntaxError(s.pos, "calendar date \"YYYY-MM-DD\"");
      expect(Tok::RParen, "')'");
      return make_expr(t.pos, IrType::Date, DateLit{*d});
    }
    if (kw == "param") {
      expect(Tok::LParen, "'('");
      if (peek().tok != Tok::Ident && peek().tok != Tok::Keyword)
        throw IrSyntaxError(peek().pos, "parameter name");
      Token name = take();
      expect(Tok::RParen, "')'");
      return make_expr(t.pos, IrType::Dynamic, ParamRef{name.text});
    }
    auto agg_body = [&](auto make_node) {
      expect(Tok::LParen, "'('");
      ExprPtr arg = parse_or();
      ExprPtr where;
      if (accept_kw("where")) where = parse_or();
      expect(Tok::RParen, "')'");
      return make_node(std::move(arg), std::move(where));
    };
    if (kw == "sum" || kw == "count" || kw == "min" || kw == "max" || kw == "avg") {
      AggOp op = kw == "sum"     ? AggOp::Sum
                 : kw == "count" ? AggOp::Count
                 : kw == "min"   ? AggOp::Min
                 : kw == "max"   ? AggOp::Max
                                 : AggOp::Avg;
      return agg_body([&](ExprPtr arg, ExprPtr where) {
        return make_expr(t.pos, IrType::Number, Aggregate{op, std::move(arg), std::move(where)});
      });
    }
    if (kw == "exists" || kw == "forall") {
      QuantOp op = kw == "exists" ? QuantOp::Exists : QuantOp::Forall;
      return agg_body([&](ExprPtr pred, ExprPtr where) {
        return make_expr(t.pos, IrType::Boolean, Quantifier{op, std::move(pred), std::move(where)});
      });
    }
    if (kw == "days_between" || kw == "within_days") {
      DateFnOp op = kw == "days_between" ? DateFnOp::DaysBetween : DateFnOp::WithinDays;
      expect(Tok::LParen, "'('");
      std::vector<ExprPtr> args;
      args.push_back(parse_or());
      size_t arity = op == DateFnOp::DaysBetween ? 2 : 3;
      while (args.size() < arity) {
        expect(Tok::Comma, "','");
        args.push_back(parse_or());
      }
      expect(Tok::RParen, "')'");
      return make_expr(t.pos, op == DateFnOp::DaysBetween ? IrType::Number : IrType::Boolean,
                       DateFn{op, std::move(args)});
    }
    throw IrSyntaxError(t.pos, "expression");
  }
};

}  // namespace detail

/// Optional static environment for parameter types. Column types are
/// never known statically.
using ParamTypes = std::map<std::string, IrType>;

namespace detail {

inline bool type_compatible(IrType a, IrType b) {
  return a == IrType::Dynamic || b == IrType::Dynamic || a == b;
}

inline IrType merge_dynamic(IrType a, IrType fallback) {
  return a == IrType::Dynamic ? fallback : a;
}

/// Assigns types bottom-up, throwing IrTypeError on shape violations.
/// `where_nest` counts enclosing aggregation/quantifier `where`
/// predicates; at most two aggregation levels may stack inside a
/// where-chain.
class TypeChecker {
public:
  TypeChecker(const ParamTypes* params, bool require_params)
      : params_(params), require_params_(require_params) {}

  IrType check(const ExprPtr& e, int where_nest) {
    IrType t = infer(e, where_nest);
    const_cast<Expr*>(e.get())->type = t;
    return t;
  }

private:
  const ParamTypes* params_;
  bool require_params_;

  [[noreturn]] void fail(const ExprPtr& e, const std::string& expected, IrType found) {
    throw IrTypeError(e->pos, expected, to_token(found));
  }

  IrType require_boolean(const ExprPtr& e, int nest) {
    IrType t = check(e, nest);
    if (!type_compatible(t, IrType::Boolean)) fail(e, "boolean", t);
    return t;
  }

  IrType require_number(const ExprPtr& e, int nest) {
    IrType t = check(e, nest);
    if (!type_compatible(t, IrType::Number)) fail(e, "number", t);
    return t;
  }

  IrType require_date(const ExprPtr& e, int nest) {
    IrType t = check(e, nest);
    if (!type_compatible(t, IrType::Date)) fail(e, "date", t);
    return t;
  }

  IrType infer(const ExprPtr& e, int nest) {
    return std::visit(
        [&](const auto& n) -> IrType {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, NumberLit>) return IrType::Number;
          else if constexpr (std::is_same_v<T, TextLit>) return IrType::Text;
          else if constexpr (std::is_same_v<T, BoolLit>) return IrType::Boolean;
          else if constexpr (std::is_same_v<T, DateLit>) return IrType::Date;
          else if constexpr (std::is_same_v<T, ColumnRef>) return IrType::Dynamic;
          else if constexpr (std::is_same_v<T, ParamRef>) {
            if (params_) {
              auto it = params_->find(n.name);
              if (it != params_->end()) return it->second;
              if (require_params_)
                throw IrTypeError(e->pos, "declared parameter", "param(" + n.name + ")");
            }
            return IrType::Dynamic;
          } else if constexpr (std::is_same_v<T, Unary>) {
            if (n.op == UnaryOp::Neg) {
              require_number(n.operand, nest);
              return IrType::Number;
            }
            require_boolean(n.operand, nest);
            return IrType::Boolean;
          } else if constexpr (std::is_same_v<T, Binary>) {
            if (is_arithmetic(n.op)) {
              require_number(n.lhs, nest);
              require_number(n.rhs, nest);
              return IrType::Number;
            }
            if (is_comparison(n.op)) {
              IrType lt = check(n.lhs, nest);
              IrType rt = check(n.rhs, nest);
              if (!type_compatible(lt, rt))
                throw IrTypeError(e->pos, to_token(lt), to_token(rt));
              if (is_ordering(n.op)) {
                // Order is defined on numbers and dates only.
                for (IrType t : {lt, rt})
                  if (t == IrType::Text || t == IrType::Boolean)
                    throw IrTypeError(e->pos, "number or date", to_token(t));
              }
              return IrType::Boolean;
            }
            require_boolean(n.lhs, nest);
            require_boolean(n.rhs, nest);
            return IrType::Boolean;
          } else if constexpr (std::is_same_v<T, Aggregate>) {
            enter_nested_scope(e, nest);
            if (n.op == AggOp::Count)
              check(n.arg, nest);
            else
              require_number(n.arg, nest);
            if (n.where) require_boolean(n.where, nest + 1);
            return IrType::Number;
          } else if constexpr (std::is_same_v<T, Quantifier>) {
            enter_nested_scope(e, nest);
            require_boolean(n.pred, nest);
            if (n.where) require_boolean(n.where, nest + 1);
            return IrType::Boolean;
          } else if constexpr (std::is_same_v<T, DateFn>) {
            require_date(n.args[0], nest);
            require_date(n.args[1], nest);
            if (n.op == DateFnOp::WithinDays) {
              require_number(n.args[2], nest);
              return IrType::Boolean;
            }
            return IrType::Number;
          }
        },
        e->node);
  }

  void enter_nested_scope(const ExprPtr& e, int nest) {
    if (nest >= 2)
      throw IrTypeError(e->pos, "expression without further row-set nesting",
                        "aggregation/quantifier nested beyond depth 2 in where predicates");
  }
};

}  // namespace detail

/// Parses IR text to a typed AST. Deterministic: same text, same AST.
/// When `params` is given, param() references are typed from it, and if
/// `require_params` is set an unresolved reference is a type error
/// (compile_cu uses that; bare parse_expr leaves them Dynamic).
inline ExprPtr parse_expr(std::string_view text, const ParamTypes* params = nullptr,
                          bool require_params = false) {
  detail::Parser parser(text);
  ExprPtr e = parser.parse();
  detail::TypeChecker tc(params, require_params);
  tc.check(e, 0);
  return e;
}

/// The exact set of column names referenced anywhere in the expression.
inline void collect_columns(const ExprPtr& e, std::set<std::string>& out) {
  if (!e) return;
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, ColumnRef>) {
          out.insert(n.name);
        } else if constexpr (std::is_same_v<T, Unary>) {
          collect_columns(n.operand, out);
        } else if constexpr (std::is_same_v<T, Binary>) {
          collect_columns(n.lhs, out);
          collect_columns(n.rhs, out);
        } else if constexpr (std::is_same_v<T, Aggregate>) {
          collect_columns(n.arg, out);
          collect_columns(n.where, out);
        } else if constexpr (std::is_same_v<T, Quantifier>) {
          collect_columns(n.pred, out);
          collect_columns(n.where, out);
        } else if constexpr (std::is_same_v<T, DateFn>) {
          for (const auto& a : n.args) collect_columns(a, out);
        }
      },
      e->node);
}

inline std::set<std::string> free_columns(const ExprPtr& e) {
  std::set<std::string> out;
  collect_columns(e, out);
  return out;
}

/// Collects param() names.
inline void collect_params(const ExprPtr& e, std::set<std::string>& out) {
  if (!e) return;
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, ParamRef>) {
          out.insert(n.name);
        } else if constexpr (std::is_same_v<T, Unary>) {
          collect_params(n.operand, out);
        } else if constexpr (std::is_same_v<T, Binary>) {
          collect_params(n.lhs, out);
          collect_params(n.rhs, out);
        } else if constexpr (std::is_same_v<T, Aggregate>) {
          collect_params(n.arg, out);
          collect_params(n.where, out);
        } else if constexpr (std::is_same_v<T, Quantifier>) {
          collect_params(n.pred, out);
          collect_params(n.where, out);
        } else if constexpr (std::is_same_v<T, DateFn>) {
          for (const auto& a : n.args) collect_params(a, out);
        }
      },
      e->node);
}

/// Folds a literal expression (literal, or unary minus on a number
/// literal) to its value; nullopt if the expression is not a literal.
inline std::optional<TypedValue> fold_literal(const ExprPtr& e) {
  if (!e) return std::nullopt;
  if (auto* n = std::get_if<NumberLit>(&e->node)) return TypedValue::number(n->value);
  if (auto* t = std::get_if<TextLit>(&e->node)) return TypedValue::text(t->value);
  if (auto* b = std::get_if<BoolLit>(&e->node)) return TypedValue::boolean(b->value);
  if (auto* d = std::get_if<DateLit>(&e->node)) return TypedValue::date(d->value);
  if (auto* u = std::get_if<Unary>(&e->node); u && u->op == UnaryOp::Neg) {
    if (auto* n = std::get_if<NumberLit>(&u->operand->node))
      return TypedValue::number(-n->value);
  }
  return std::nullopt;
}

}  // namespace fincheck
