#pragma once

#include <string>
#include <string_view>

#include "fincheck/check_eval.hpp"
#include "fincheck/table.hpp"

namespace fincheck {

/// Subtable of rows where the predicate evaluates strictly true; rows
/// with an Unknown predicate are excluded (a row uncertain to match is
/// not selected). Column structure and key designations preserved; the
/// input table is untouched.
inline DataTable select_rows(const DataTable& table, const ExprPtr& predicate,
                             const ParamMap* params = nullptr) {
  std::vector<std::vector<TypedValue>> kept;
  for (size_t r = 0; r < table.row_count(); ++r) {
    EvalScope scope{&table, r, params};
    EvalTrace trace;
    TypedValue v = eval_expr(predicate, scope, trace);
    if (const bool* b = v.as_boolean(); b && *b) kept.push_back(table.rows()[r]);
  }
  DataTable out(table.name(), table.columns(), std::move(kept));
  out.set_keys(table.entity_key(), table.period_key());
  return out;
}

/// Text-predicate convenience; the predicate must type-check boolean.
inline DataTable select_rows(const DataTable& table, std::string_view predicate_text,
                             const ParamMap* params = nullptr) {
  ExprPtr p = parse_expr(predicate_text);
  if (p->type != IrType::Boolean && p->type != IrType::Dynamic)
    throw IrTypeError(0, "boolean predicate", to_token(p->type));
  return select_rows(table, p, params);
}

}  // namespace fincheck
