#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "fincheck/check_eval.hpp"
#include "fincheck/check_ir.hpp"
#include "fincheck/cu_model.hpp"
#include "fincheck/task_model.hpp"

namespace fincheck {

/// Annotation string carried on a compiled check, optionally tagged
/// with the CU / edge identifiers it traces back to.
struct Comment {
  std::string text;
  std::vector<std::string> tags;

  friend bool operator==(const Comment&, const Comment&) = default;
};

/// Compiled, validated check: condition gate + constraint body in the
/// IR, resolved parameters, and the exact column set the expressions
/// reference (computed, never declared). Immutable once built.
struct CheckProgram {
  std::string cu_id;
  ExprPtr condition_gate;  // null = unconditional
  ExprPtr constraint_body;
  std::string gate_text;   // source form, empty when no gate
  std::string body_text;
  ParamMap parameters;
  std::set<std::string> required_columns;
  std::vector<Comment> comments;
};

/// Per-CU authored inputs for compilation: expression texts plus
/// parameter literals. A definitional CU (no constraint) may omit the
/// body; it compiles to literal `true`. `subject_column` opts in to
/// compiling the CU's subject disjunction as a row filter on the gate.
struct CuBinding {
  std::optional<std::string> gate;
  std::optional<std::string> body;
  std::map<std::string, std::string> params;  // literal expression texts
  std::optional<std::string> subject_column;
  std::vector<Comment> comments;
};

struct BindingSheet {
  std::map<std::string, CuBinding> by_cu;
};

struct MissingBindingError : std::runtime_error {
  explicit MissingBindingError(const std::string& cu_id, const std::string& why = {})
      : std::runtime_error("missing binding for CU " + cu_id + (why.empty() ? "" : ": " + why)),
        cu_id(cu_id) {}
  std::string cu_id;
};

struct UnresolvedReferenceError : std::runtime_error {
  explicit UnresolvedReferenceError(const RelationEdge& edge)
      : std::runtime_error("unresolved reference: " + edge.label()), edge(edge) {}
  RelationEdge edge;
};

namespace detail {

inline TypedValue parse_param_literal(const std::string& cu_id, const std::string& name,
                                      const std::string& text) {
  ExprPtr e = parse_expr(text);
  auto v = fold_literal(e);
  if (!v)
    throw IrTypeError(0, "literal parameter value for " + cu_id + "." + name, text);
  return *v;
}

/// Transitive ReferTo closure from `cu_id`, breadth-first, targets in
/// canonical (source-order, then id) order. The graph has been
/// validated, so the ReferTo subgraph is acyclic.
inline std::vector<std::string> refer_closure(const ComplianceGraph& graph,
                                              const std::string& cu_id,
                                              std::vector<RelationEdge>* used_edges) {
  std::vector<std::string> order;
  std::set<std::string> seen{cu_id};
  std::vector<std::string> frontier{cu_id};
  std::vector<RelationEdge> edges = graph.edges;
  std::sort(edges.begin(), edges.end());
  while (!frontier.empty()) {
    std::vector<std::string> next;
    for (const auto& src : frontier) {
      for (const auto& e : edges) {
        if (e.kind != RelationKind::ReferTo || e.source != src) continue;
        if (used_edges) used_edges->push_back(e);
        if (seen.insert(e.target).second) {
          order.push_back(e.target);
          next.push_back(e.target);
        }
      }
    }
    frontier = std::move(next);
  }
  return order;
}

inline ExprPtr subject_filter(const ComplianceUnit& cu, const std::string& column) {
  ExprPtr filter;
  for (const auto& phrase : cu.subject) {
    ExprPtr eq = make_expr(0, IrType::Boolean,
                           Binary{BinaryOp::Eq, make_expr(0, IrType::Dynamic, ColumnRef{column}),
                                  make_expr(0, IrType::Text, TextLit{phrase})});
    filter = filter ? make_expr(0, IrType::Boolean, Binary{BinaryOp::Or, filter, eq}) : eq;
  }
  return filter;
}

}  // namespace detail

/// Compiles one CU against its binding. ReferTo edges are resolved
/// first (transitively; the target CUs' parameters are imported into
/// scope, own parameters shadowing imported ones) and the result is
/// type-checked with the full parameter environment. Unresolved
/// references fail compilation, never evaluation.
inline CheckProgram compile_cu(const ComplianceUnit& cu, const BindingSheet& sheet,
                               const ComplianceGraph& graph) {
  auto own = sheet.by_cu.find(cu.id);
  if (own == sheet.by_cu.end()) throw MissingBindingError(cu.id);
  const CuBinding& binding = own->second;
  if (!binding.body && !cu.constraint.empty())
    throw MissingBindingError(cu.id, "CU has constraints but the binding supplies no body");

  CheckProgram program;
  program.cu_id = cu.id;
  program.comments.push_back({"check compiled from CU " + cu.id, {cu.id}});

  // Parameter environment: imports first (farther shadowed by nearer),
  // own parameters last.
  std::vector<RelationEdge> refer_edges;
  std::vector<std::string> imports = detail::refer_closure(graph, cu.id, &refer_edges);
  for (auto it = imports.rbegin(); it != imports.rend(); ++it) {
    auto target = sheet.by_cu.find(*it);
    if (target == sheet.by_cu.end()) {
      for (const auto& e : refer_edges)
        if (e.target == *it) throw UnresolvedReferenceError(e);
      throw UnresolvedReferenceError({cu.id, *it, RelationKind::ReferTo});
    }
    for (const auto& [name, text] : target->second.params)
      program.parameters[name] = detail::parse_param_literal(*it, name, text);
  }
  for (const auto& e : refer_edges)
    program.comments.push_back({"imports definitions from CU " + e.target + " via refer_to",
                                {e.label(), e.target}});
  for (const auto& [name, text] : binding.params)
    program.parameters[name] = detail::parse_param_literal(cu.id, name, text);

  ParamTypes param_types;
  for (const auto& [name, value] : program.parameters)
    param_types[name] = value.kind() ? ir_type_of(*value.kind()) : IrType::Dynamic;

  if (binding.gate) {
    program.gate_text = *binding.gate;
    program.condition_gate = parse_expr(*binding.gate, &param_types, /*require_params=*/true);
    if (program.condition_gate->type != IrType::Boolean &&
        program.condition_gate->type != IrType::Dynamic)
      throw IrTypeError(0, "boolean condition gate", to_token(program.condition_gate->type));
  }
  program.body_text = binding.body.value_or("true");
  program.constraint_body = parse_expr(program.body_text, &param_types, /*require_params=*/true);
  if (program.constraint_body->type != IrType::Boolean &&
      program.constraint_body->type != IrType::Dynamic)
    throw IrTypeError(0, "boolean constraint body", to_token(program.constraint_body->type));

  // Subject disjunction compiles to a row filter when a subject-role
  // column is declared; otherwise subjects stay report metadata.
  if (binding.subject_column && !cu.subject.empty()) {
    ExprPtr filter = detail::subject_filter(cu, *binding.subject_column);
    ExprPtr pred = program.condition_gate
                       ? program.condition_gate
                       : make_expr(0, IrType::Boolean, BoolLit{true});
    program.condition_gate =
        make_expr(0, IrType::Boolean, Quantifier{QuantOp::Exists, pred, filter});
    program.gate_text.clear();  // synthesized form has no single source text
  }

  program.required_columns = free_columns(program.constraint_body);
  if (program.condition_gate) {
    auto gate_cols = free_columns(program.condition_gate);
    program.required_columns.insert(gate_cols.begin(), gate_cols.end());
  }
  for (const auto& c : binding.comments) program.comments.push_back(c);
  return program;
}

/// Renders a parameter value back to IR literal syntax (round-trips
/// through parse_expr + fold_literal).
inline std::string to_ir_literal(const TypedValue& v) {
  if (auto* n = v.as_number()) return n->to_string();
  if (auto* t = v.as_text()) {
    std::string out = "\"";
    for (char c : *t) {
      if (c == '"' || c == '\\') out += '\\';
      out += c;
    }
    return out + "\"";
  }
  if (auto* b = v.as_boolean()) return *b ? "true" : "false";
  if (auto* d = v.as_date()) return "date(\"" + d->to_string() + "\")";
  throw std::logic_error("unknown value has no literal form");
}

enum class Verdict : std::uint8_t { Compliant, NonCompliant, NotApplicable, Unknown };

inline const char* to_token(Verdict v) {
  switch (v) {
    case Verdict::Compliant: return "Compliant";
    case Verdict::NonCompliant: return "NonCompliant";
    case Verdict::NotApplicable: return "NotApplicable";
    case Verdict::Unknown: return "Unknown";
  }
  return "?";
}

inline std::optional<Verdict> parse_verdict(std::string_view token) {
  if (token == "Compliant") return Verdict::Compliant;
  if (token == "NonCompliant") return Verdict::NonCompliant;
  if (token == "NotApplicable") return Verdict::NotApplicable;
  if (token == "Unknown") return Verdict::Unknown;
  return std::nullopt;
}

/// Outcome of executing one CheckProgram against a table, before any
/// relation effects. `satisfied` is Unknown and `body_evaluated` false
/// when the gate came out strictly false (the body is then never
/// touched and none of its columns appear in the trace).
/// `body_when_forced` is an optional side channel the pipeline fills
/// for ShouldInclude targets: the constraint body evaluated gate-free,
/// so graph evaluation can derive a forced verdict (its trace is kept
/// separately and only merged into reports when the force fires).
struct RawResult {
  Tri triggered = Tri::True;
  Tri satisfied = Tri::Unknown;
  bool body_evaluated = false;
  Verdict raw_verdict = Verdict::Unknown;
  EvalTrace trace;
  std::optional<Tri> body_when_forced;
  EvalTrace forced_trace;
};

inline Verdict raw_verdict_of(Tri triggered, Tri satisfied) {
  if (triggered == Tri::False) return Verdict::NotApplicable;
  if (triggered == Tri::Unknown) return Verdict::Unknown;
  switch (satisfied) {
    case Tri::True: return Verdict::Compliant;
    case Tri::False: return Verdict::NonCompliant;
    case Tri::Unknown: return Verdict::Unknown;
  }
  return Verdict::Unknown;
}

/// Executes the gate, then (unless the gate is strictly false) the
/// body. Missing columns are handled by the Unknown semantics; this
/// never throws.
inline RawResult run_check(const CheckProgram& program, const DataTable& table) {
  RawResult result;
  EvalScope scope{&table, std::nullopt, &program.parameters};
  if (program.condition_gate) {
    TypedValue g = eval_expr(program.condition_gate, scope, result.trace);
    result.triggered = g.as_tri();
  } else {
    result.triggered = Tri::True;
  }
  if (result.triggered != Tri::False) {
    TypedValue b = eval_expr(program.constraint_body, scope, result.trace);
    result.satisfied = b.as_tri();
    result.body_evaluated = true;
  }
  result.raw_verdict = raw_verdict_of(result.triggered, result.satisfied);
  return result;
}

/// Constraint body alone, gate ignored; used by the pipeline to supply
/// RawResult::body_when_forced for ShouldInclude targets.
inline std::pair<Tri, EvalTrace> run_body_unconditionally(const CheckProgram& program,
                                                          const DataTable& table) {
  EvalScope scope{&table, std::nullopt, &program.parameters};
  EvalTrace trace;
  TypedValue b = eval_expr(program.constraint_body, scope, trace);
  return {b.as_tri(), std::move(trace)};
}

/// Splices candidate fragments into an "ir" task's masked template and
/// compiles the result as a whole. Syntax or type errors in the spliced
/// program are the candidate's failure, not a harness fault.
inline CheckProgram splice_completion(const CodeTask& task,
                                      const std::vector<std::string>& fragments) {
  if (task.language != "ir")
    throw TaskFormatError("task " + task.id + ": splice_completion applies to ir tasks; " +
                          task.language + " candidates run through the sandbox");
  std::string body = splice_text(task, fragments);

  CheckProgram program;
  program.cu_id = task.id;
  for (const auto& [name, text] : task.params)
    program.parameters[name] = detail::parse_param_literal(task.id, name, text);
  ParamTypes param_types;
  for (const auto& [name, value] : program.parameters)
    param_types[name] = value.kind() ? ir_type_of(*value.kind()) : IrType::Dynamic;

  if (task.gate) {
    program.gate_text = *task.gate;
    program.condition_gate = parse_expr(*task.gate, &param_types, /*require_params=*/true);
  }
  program.body_text = body;
  program.constraint_body = parse_expr(body, &param_types, /*require_params=*/true);
  if (program.constraint_body->type != IrType::Boolean &&
      program.constraint_body->type != IrType::Dynamic)
    throw IrTypeError(0, "boolean constraint body", to_token(program.constraint_body->type));

  program.required_columns = free_columns(program.constraint_body);
  if (program.condition_gate) {
    auto gate_cols = free_columns(program.condition_gate);
    program.required_columns.insert(gate_cols.begin(), gate_cols.end());
  }
  program.comments.push_back({"candidate completion for task " + task.id, task.provenance_cu_ids});
  return program;
}

}  // namespace fincheck
