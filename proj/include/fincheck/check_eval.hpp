#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fincheck/check_ir.hpp"
#include "fincheck/table.hpp"

namespace fincheck {

/// One data cell consulted during evaluation. `row` is -1 for reads
/// resolved against the whole column (row-scope-free references).
struct ColumnCite {
  std::string column;
  long row = -1;
  TypedValue value;

  friend bool operator==(const ColumnCite&, const ColumnCite&) = default;
};

struct TraceNote {
  enum class Kind {
    MissingColumn,
    AmbiguousColumn,   // row-scope-free read over unequal values
    DivisionByZero,
    TypeMismatch,
    AggregationSkip,   // Unknown cells skipped inside an aggregation
    WhereUnknown,      // aggregation membership uncertain
    EmptyRowSet,
    MissingParam,
  };
  Kind kind;
  std::string message;
  long count = 0;

  friend bool operator==(const TraceNote&, const TraceNote&) = default;
};

inline const char* to_token(TraceNote::Kind k) {
  using K = TraceNote::Kind;
  switch (k) {
    case K::MissingColumn: return "missing_column";
    case K::AmbiguousColumn: return "ambiguous_column";
    case K::DivisionByZero: return "division_by_zero";
    case K::TypeMismatch: return "type_mismatch";
    case K::AggregationSkip: return "aggregation_skip";
    case K::WhereUnknown: return "where_unknown";
    case K::EmptyRowSet: return "empty_row_set";
    case K::MissingParam: return "missing_param";
  }
  return "?";
}

/// Append-only evaluation audit: every column read plus structured
/// notes. Deterministic for fixed inputs.
struct EvalTrace {
  std::vector<ColumnCite> reads;
  std::vector<TraceNote> notes;

  std::set<std::string> columns_read() const {
    std::set<std::string> out;
    for (const auto& r : reads) out.insert(r.column);
    return out;
  }

  void merge(const EvalTrace& other) {
    reads.insert(reads.end(), other.reads.begin(), other.reads.end());
    notes.insert(notes.end(), other.notes.begin(), other.notes.end());
  }
};

using ParamMap = std::map<std::string, TypedValue>;

/// Evaluation scope: a table, an optional current row (set inside
/// aggregations/quantifiers and per-row filters), and parameters.
struct EvalScope {
  const DataTable* table = nullptr;
  std::optional<size_t> row;
  const ParamMap* params = nullptr;
};

namespace detail {

class Evaluator {
public:
  Evaluator(const EvalScope& scope, EvalTrace& trace) : scope_(scope), trace_(trace) {}

  TypedValue eval(const ExprPtr& e) {
    return std::visit([&](const auto& n) { return eval_node(e, n); }, e->node);
  }

private:
  EvalScope scope_;
  EvalTrace& trace_;

  void note(TraceNote::Kind kind, std::string message, long count = 0) {
    trace_.notes.push_back({kind, std::move(message), count});
  }

  TypedValue eval_node(const ExprPtr&, const NumberLit& n) { return TypedValue::number(n.value); }
  TypedValue eval_node(const ExprPtr&, const TextLit& n) { return TypedValue::text(n.value); }
  TypedValue eval_node(const ExprPtr&, const BoolLit& n) { return TypedValue::boolean(n.value); }
  TypedValue eval_node(const ExprPtr&, const DateLit& n) { return TypedValue::date(n.value); }

  TypedValue eval_node(const ExprPtr&, const ParamRef& n) {
    if (scope_.params) {
      auto it = scope_.params->find(n.name);
      if (it != scope_.params->end()) return it->second;
    }
    note(TraceNote::Kind::MissingParam, n.name);
    return TypedValue::unknown();
  }

  TypedValue eval_node(const ExprPtr&, const ColumnRef& n) {
    if (!scope_.table) {
      note(TraceNote::Kind::MissingColumn, n.name);
      return TypedValue::unknown();
    }
    auto col = scope_.table->column_index(n.name);
    if (!col) {
      note(TraceNote::Kind::MissingColumn, n.name);
      return TypedValue::unknown();
    }
    if (scope_.row) {
      const TypedValue& v = scope_.table->cell(*scope_.row, *col);
      trace_.reads.push_back({n.name, static_cast<long>(*scope_.row), v});
      return v;
    }
    // Row-scope-free reference: the column's unique non-null value.
    // All rows are inspected (and cited); unequal values are ambiguous.
    std::optional<TypedValue> unique;
    bool ambiguous = false;
    for (size_t r = 0; r < scope_.table->row_count(); ++r) {
      const TypedValue& v = scope_.table->cell(r, *col);
      trace_.reads.push_back({n.name, static_cast<long>(r), v});
      if (v.is_unknown()) continue;
      if (!unique)
        unique = v;
      else if (!(*unique == v))
        ambiguous = true;
    }
    if (ambiguous) {
      note(TraceNote::Kind::AmbiguousColumn, n.name);
      return TypedValue::unknown();
    }
    if (!unique) return TypedValue::unknown();
    return *unique;
  }

  TypedValue eval_node(const ExprPtr&, const Unary& n) {
    TypedValue v = eval(n.operand);
    if (n.op == UnaryOp::Not) {
      if (v.is_unknown()) return TypedValue::unknown();
      if (auto* b = v.as_boolean()) return TypedValue::boolean(!*b);
      note(TraceNote::Kind::TypeMismatch, "not: operand is not boolean");
      return TypedValue::unknown();
    }
    if (v.is_unknown()) return TypedValue::unknown();
    if (auto* d = v.as_number()) return TypedValue::number(-*d);
    note(TraceNote::Kind::TypeMismatch, "-: operand is not a number");
    return TypedValue::unknown();
  }

  TypedValue eval_node(const ExprPtr&, const Binary& n) {
    if (n.op == BinaryOp::And || n.op == BinaryOp::Or) {
      // Both operands always evaluated: Kleene truth tables are
      // order-independent and the trace stays deterministic.
      Tri a = to_tri(eval(n.lhs), "boolean connective");
      Tri b = to_tri(eval(n.rhs), "boolean connective");
      Tri r = n.op == BinaryOp::And ? tri_and(a, b) : tri_or(a, b);
      return from_tri(r);
    }
    TypedValue a = eval(n.lhs);
    TypedValue b = eval(n.rhs);
    if (is_arithmetic(n.op)) return arith(n.op, a, b);
    return compare(n.op, a, b);
  }

  TypedValue eval_node(const ExprPtr&, const Aggregate& n) { return aggregate(n); }
  TypedValue eval_node(const ExprPtr&, const Quantifier& n) { return quantify(n); }

  TypedValue eval_node(const ExprPtr&, const DateFn& n) {
    TypedValue a = eval(n.args[0]);
    TypedValue b = eval(n.args[1]);
    if (a.is_unknown() || b.is_unknown()) return TypedValue::unknown();
    const Date* da = a.as_date();
    const Date* db = b.as_date();
    if (!da || !db) {
      note(TraceNote::Kind::TypeMismatch, "temporal helper: operand is not a date");
      return TypedValue::unknown();
    }
    std::int64_t days = days_between(*da, *db);
    if (n.op == DateFnOp::DaysBetween) return TypedValue::number(Decimal(days));
    TypedValue limit = eval(n.args[2]);
    if (limit.is_unknown()) return TypedValue::unknown();
    const Decimal* lim = limit.as_number();
    if (!lim) {
      note(TraceNote::Kind::TypeMismatch, "within_days: limit is not a number");
      return TypedValue::unknown();
    }
    Decimal mag(days < 0 ? -days : days);
    return TypedValue::boolean(mag <= *lim);
  }

  Tri to_tri(const TypedValue& v, const char* what) {
    if (v.is_unknown()) return Tri::Unknown;
    if (auto* b = v.as_boolean()) return tri_of(*b);
    note(TraceNote::Kind::TypeMismatch, std::string(what) + ": operand is not boolean");
    return Tri::Unknown;
  }

  static TypedValue from_tri(Tri t) {
    if (t == Tri::Unknown) return TypedValue::unknown();
    return TypedValue::boolean(t == Tri::True);
  }

  TypedValue arith(BinaryOp op, const TypedValue& a, const TypedValue& b) {
    if (a.is_unknown() || b.is_unknown()) return TypedValue::unknown();
    const Decimal* x = a.as_number();
    const Decimal* y = b.as_number();
    if (!x || !y) {
      note(TraceNote::Kind::TypeMismatch, "arithmetic: operand is not a number");
      return TypedValue::unknown();
    }
    switch (op) {
      case BinaryOp::Add: return TypedValue::number(*x + *y);
      case BinaryOp::Sub: return TypedValue::number(*x - *y);
      case BinaryOp::Mul: return TypedValue::number(*x * *y);
      case BinaryOp::Div: {
        auto q = Decimal::divide(*x, *y);
        if (!q) {
          note(TraceNote::Kind::DivisionByZero, x->to_string() + " / 0");
          return TypedValue::unknown();
        }
        return TypedValue::number(*q);
      }
      default: return TypedValue::unknown();
    }
  }

  TypedValue compare(BinaryOp op, const TypedValue& a, const TypedValue& b) {
    if (a.is_unknown() || b.is_unknown()) return TypedValue::unknown();
    if (a.kind() != b.kind()) {
      note(TraceNote::Kind::TypeMismatch, "comparison: mismatched operand kinds");
      return TypedValue::unknown();
    }
    if (op == BinaryOp::Eq) return TypedValue::boolean(a == b);
    if (op == BinaryOp::Ne) return TypedValue::boolean(!(a == b));
    // Ordering: numbers and dates only.
    if (auto* x = a.as_number()) {
      const Decimal& y = *b.as_number();
      return TypedValue::boolean(ordered(op, *x <=> y));
    }
    if (auto* x = a.as_date()) {
      const Date& y = *b.as_date();
      return TypedValue::boolean(ordered(op, *x <=> y));
    }
    note(TraceNote::Kind::TypeMismatch, "ordering is defined on numbers and dates only");
    return TypedValue::unknown();
  }

  static bool ordered(BinaryOp op, std::strong_ordering cmp) {
    switch (op) {
      case BinaryOp::Lt: return cmp < 0;
      case BinaryOp::Le: return cmp <= 0;
      case BinaryOp::Gt: return cmp > 0;
      case BinaryOp::Ge: return cmp >= 0;
      default: return false;
    }
  }

  /// Membership of a row in an aggregation/quantifier row set:
  /// where absent => included; where false => excluded; where Unknown
  /// poisons aggregations (membership uncertain) but folds through
  /// Kleene connectives for quantifiers.
  Tri row_membership(const ExprPtr& where, size_t row) {
    if (!where) return Tri::True;
    EvalScope inner = scope_;
    inner.row = row;
    Evaluator sub(inner, trace_);
    return sub.to_tri(sub.eval(where), "where");
  }

  TypedValue row_value(const ExprPtr& arg, size_t row) {
    EvalScope inner = scope_;
    inner.row = row;
    Evaluator sub(inner, trace_);
    return sub.eval(arg);
  }

  TypedValue aggregate(const Aggregate& n) {
    if (!scope_.table) {
      note(TraceNote::Kind::MissingColumn, "aggregation over absent table");
      return TypedValue::unknown();
    }
    const size_t rows = scope_.table->row_count();
    bool membership_unknown = false;
    long skipped = 0;
    long included = 0;
    Decimal sum;
    std::optional<Decimal> min, max;
    for (size_t r = 0; r < rows; ++r) {
      Tri member = row_membership(n.where, r);
      if (member == Tri::Unknown) {
        membership_unknown = true;
        continue;
      }
      if (member == Tri::False) continue;
      TypedValue v = row_value(n.arg, r);
      if (v.is_unknown()) {
        ++skipped;
        continue;
      }
      if (n.op == AggOp::Count) {
        ++included;
        continue;
      }
      const Decimal* d = v.as_number();
      if (!d) {
        note(TraceNote::Kind::TypeMismatch, std::string(to_token(n.op)) + ": cell is not a number");
        ++skipped;
        continue;
      }
      ++included;
      sum = sum + *d;
      if (!min || *d < *min) min = *d;
      if (!max || *d > *max) max = *d;
    }
    if (skipped > 0)
      note(TraceNote::Kind::AggregationSkip, to_token(n.op), skipped);
    if (membership_unknown) {
      note(TraceNote::Kind::WhereUnknown, to_token(n.op));
      return TypedValue::unknown();
    }
    switch (n.op) {
      case AggOp::Count: return TypedValue::number(Decimal(included));
      case AggOp::Sum: return TypedValue::number(sum);
      case AggOp::Min:
      case AggOp::Max: {
        const auto& v = n.op == AggOp::Min ? min : max;
        if (!v) {
          note(TraceNote::Kind::EmptyRowSet, to_token(n.op));
          return TypedValue::unknown();
        }
        return TypedValue::number(*v);
      }
      case AggOp::Avg: {
        if (included == 0) {
          note(TraceNote::Kind::EmptyRowSet, "avg");
          return TypedValue::unknown();
        }
        auto q = Decimal::divide(sum, Decimal(included));
        return TypedValue::number(*q);
      }
    }
    return TypedValue::unknown();
  }

  TypedValue quantify(const Quantifier& n) {
    if (!scope_.table) {
      note(TraceNote::Kind::MissingColumn, "quantifier over absent table");
      return TypedValue::unknown();
    }
    const size_t rows = scope_.table->row_count();
    // exists(p where w) == OR over rows of (w AND p);
    // forall(p where w) == AND over rows of (NOT w OR p).
    // Empty row set: exists=false, forall=true. All rows evaluated.
    Tri acc = n.op == QuantOp::Exists ? Tri::False : Tri::True;
    for (size_t r = 0; r < rows; ++r) {
      Tri member = row_membership(n.where, r);
      EvalScope inner = scope_;
      inner.row = r;
      Evaluator sub(inner, trace_);
      Tri p = sub.to_tri(sub.eval(n.pred), "quantifier predicate");
      Tri contrib = n.op == QuantOp::Exists ? tri_and(member, p) : tri_or(tri_not(member), p);
      acc = n.op == QuantOp::Exists ? tri_or(acc, contrib) : tri_and(acc, contrib);
    }
    return from_tri(acc);
  }
};

}  // namespace detail

/// Pure, deterministic evaluation. Missing columns, null cells, runtime
/// type mismatches and division by zero yield Unknown with trace notes;
/// evaluation never throws. Repeated evaluation yields identical value
/// and identical trace.
inline TypedValue eval_expr(const ExprPtr& expr, const EvalScope& scope, EvalTrace& trace) {
  detail::Evaluator ev(scope, trace);
  return ev.eval(expr);
}

inline TypedValue eval_expr(const ExprPtr& expr, const EvalScope& scope) {
  EvalTrace trace;
  return eval_expr(expr, scope, trace);
}

}  // namespace fincheck
