#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "fincheck/text.hpp"

namespace fincheck {

/// Character-offset interval [start, end) into the source document,
/// in Unicode scalar values.
struct Span {
  std::uint32_t start = 0;
  std::uint32_t end = 0;

  friend bool operator==(const Span&, const Span&) = default;
  friend auto operator<=>(const Span&, const Span&) = default;
};

/// One minimal actionable regulatory statement.
struct ComplianceUnit {
  std::string id;
  std::string clause_id;
  std::vector<std::string> subject;          // disjunction ("|" in running text)
  std::vector<std::string> condition;        // empty = always triggered
  std::vector<std::string> constraint;       // empty = definitional only
  std::vector<std::string> contextual_info;  // metadata only
  Span span;

  friend bool operator==(const ComplianceUnit&, const ComplianceUnit&) = default;
};

enum class RelationKind : std::uint8_t { ReferTo, Exclude, OnlyInclude, ShouldInclude };

inline const char* to_token(RelationKind k) {
  switch (k) {
    case RelationKind::ReferTo: return "refer_to";
    case RelationKind::Exclude: return "exclude";
    case RelationKind::OnlyInclude: return "only_include";
    case RelationKind::ShouldInclude: return "should_include";
  }
  return "?";
}

inline std::optional<RelationKind> parse_relation_kind(std::string_view token) {
  if (token == "refer_to") return RelationKind::ReferTo;
  if (token == "exclude") return RelationKind::Exclude;
  if (token == "only_include") return RelationKind::OnlyInclude;
  if (token == "should_include") return RelationKind::ShouldInclude;
  return std::nullopt;
}

/// Exclude / OnlyInclude / ShouldInclude act during post-execution
/// evaluation; ReferTo is an information dependency used at compile time.
inline bool is_effect_kind(RelationKind k) { return k != RelationKind::ReferTo; }

struct RelationEdge {
  std::string source;
  std::string target;
  RelationKind kind = RelationKind::ReferTo;

  /// Canonical edge identifier, used for comment tags and audit lines.
  std::string label() const {
    return source + "->" + target + ":" + to_token(kind);
  }

  friend bool operator==(const RelationEdge&, const RelationEdge&) = default;
  friend auto operator<=>(const RelationEdge& a, const RelationEdge& b) {
    return std::tie(a.source, a.target, a.kind) <=> std::tie(b.source, b.target, b.kind);
  }
};

/// CUs plus typed directed relation edges over one regulation document.
/// Immutable after construction; unrestricted concurrent reads are safe.
struct ComplianceGraph {
  std::vector<ComplianceUnit> units;
  std::vector<RelationEdge> edges;
  std::string source_text;

  const ComplianceUnit* find_unit(std::string_view id) const {
    for (const auto& u : units)
      if (u.id == id) return &u;
    return nullptr;
  }

  friend bool operator==(const ComplianceGraph&, const ComplianceGraph&) = default;
};

/// Structural rule broken by a graph (or annotation). Violations are
/// data, not failures: validation never throws on them.
struct Violation {
  enum class Rule {
    DuplicateUnitId,
    EmptyClauseId,
    BadSpan,
    EmptySubjectEntry,
    DuplicateSubjectEntry,
    MissingConditionAndConstraint,
    SelfLoop,
    DuplicateEdge,
    UnknownEndpoint,
    EffectCycle,
    ReferCycle,
    SpanPartialOverlap,   // annotation-level
    IdenticalSpans,       // annotation-level, severity Warning
  };
  enum class Severity { Error, Warning };

  Rule rule;
  Severity severity = Severity::Error;
  std::vector<std::string> subjects;  // unit/edge ids involved
  std::string detail;

  friend bool operator==(const Violation&, const Violation&) = default;
};

inline const char* to_token(Violation::Rule r) {
  using R = Violation::Rule;
  switch (r) {
    case R::DuplicateUnitId: return "duplicate_unit_id";
    case R::EmptyClauseId: return "empty_clause_id";
    case R::BadSpan: return "bad_span";
    case R::EmptySubjectEntry: return "empty_subject_entry";
    case R::DuplicateSubjectEntry: return "duplicate_subject_entry";
    case R::MissingConditionAndConstraint: return "missing_condition_and_constraint";
    case R::SelfLoop: return "self_loop";
    case R::DuplicateEdge: return "duplicate_edge";
    case R::UnknownEndpoint: return "unknown_endpoint";
    case R::EffectCycle: return "effect_cycle";
    case R::ReferCycle: return "refer_cycle";
    case R::SpanPartialOverlap: return "span_partial_overlap";
    case R::IdenticalSpans: return "identical_spans";
  }
  return "?";
}

struct UnknownIdError : std::runtime_error {
  explicit UnknownIdError(const std::string& id)
      : std::runtime_error("unknown CU id: " + id), cu_id(id) {}
  std::string cu_id;
};

namespace detail {

/// Reports one cycle violation per nontrivial strongly connected
/// component of the given edge subset (ids sorted for determinism).
inline void find_cycles(const std::vector<std::string>& ids,
                        const std::vector<std::pair<std::string, std::string>>& arcs,
                        Violation::Rule rule, std::vector<Violation>& out) {
  std::map<std::string, size_t> index;
  for (size_t i = 0; i < ids.size(); ++i) index[ids[i]] = i;
  std::vector<std::vector<size_t>> adj(ids.size());
  for (const auto& [s, t] : arcs) {
    auto is = index.find(s), it = index.find(t);
    if (is == index.end() || it == index.end()) continue;  // dangling reported elsewhere
    adj[is->second].push_back(it->second);
  }
  // Tarjan, iterative.
  const size_t n = ids.size();
  std::vector<int> low(n, -1), num(n, -1), on_stack(n, 0);
  std::vector<size_t> stack;
  int counter = 0;
  struct Frame {
    size_t v;
    size_t child = 0;
  };
  for (size_t root = 0; root < n; ++root) {
    if (num[root] != -1) continue;
    std::vector<Frame> call{{root}};
    while (!call.empty()) {
      Frame& f = call.back();
      if (f.child == 0) {
        num[f.v] = low[f.v] = counter++;
        stack.push_back(f.v);
        on_stack[f.v] = 1;
      }
      if (f.child < adj[f.v].size()) {
        size_t w = adj[f.v][f.child++];
        if (num[w] == -1) {
          call.push_back({w});
        } else if (on_stack[w]) {
          low[f.v] = std::min(low[f.v], num[w]);
        }
      } else {
        if (low[f.v] == num[f.v]) {
          std::vector<std::string> scc;
          size_t w;
          do {
            w = stack.back();
            stack.pop_back();
            on_stack[w] = 0;
            scc.push_back(ids[w]);
          } while (w != f.v);
          bool self_loop = false;
          for (size_t c : adj[f.v])
            if (c == f.v) self_loop = true;
          if (scc.size() > 1 || self_loop) {
            std::sort(scc.begin(), scc.end());
            out.push_back({rule, Violation::Severity::Error, scc, "cycle"});
          }
        }
        size_t v = f.v;
        call.pop_back();
        if (!call.empty()) low[call.back().v] = std::min(low[call.back().v], low[v]);
      }
    }
  }
}

}  // namespace detail

/// Checks every structural invariant; returns an empty list iff the
/// graph is valid. Deterministic and order-independent: permuting units
/// or edges yields the same multiset of violations. Never mutates.
inline std::vector<Violation> validate_graph(const ComplianceGraph& graph) {
  std::vector<Violation> out;
  const size_t text_len = utf8_scalar_length(graph.source_text);

  std::map<std::string, size_t> seen_ids;
  std::vector<ComplianceUnit> units = graph.units;
  std::sort(units.begin(), units.end(),
            [](const auto& a, const auto& b) { return a.id < b.id; });
  for (const auto& u : units) {
    if (++seen_ids[u.id] == 2)  // report once per duplicated id
      out.push_back({Violation::Rule::DuplicateUnitId, Violation::Severity::Error, {u.id}, ""});
    if (u.clause_id.empty())
      out.push_back({Violation::Rule::EmptyClauseId, Violation::Severity::Error, {u.id}, ""});
    if (u.span.start >= u.span.end || u.span.end > text_len)
      out.push_back({Violation::Rule::BadSpan, Violation::Severity::Error, {u.id},
                     "[" + std::to_string(u.span.start) + "," + std::to_string(u.span.end) +
                         ") over text length " + std::to_string(text_len)});
    std::set<std::string> subj;
    for (const auto& s : u.subject) {
      if (s.empty()) {
        out.push_back({Violation::Rule::EmptySubjectEntry, Violation::Severity::Error, {u.id}, ""});
      } else if (!subj.insert(s).second) {
        out.push_back({Violation::Rule::DuplicateSubjectEntry, Violation::Severity::Error, {u.id}, s});
      }
    }
    if (u.condition.empty() && u.constraint.empty())
      out.push_back({Violation::Rule::MissingConditionAndConstraint, Violation::Severity::Error,
                     {u.id}, ""});
  }

  std::set<std::string> unit_ids;
  for (const auto& u : graph.units) unit_ids.insert(u.id);

  std::vector<RelationEdge> edges = graph.edges;
  std::sort(edges.begin(), edges.end());
  std::set<std::tuple<std::string, std::string, RelationKind>> seen_edges;
  for (const auto& e : edges) {
    if (e.source == e.target)
      out.push_back({Violation::Rule::SelfLoop, Violation::Severity::Error, {e.source}, e.label()});
    if (!seen_edges.insert({e.source, e.target, e.kind}).second)
      out.push_back({Violation::Rule::DuplicateEdge, Violation::Severity::Error,
                     {e.source, e.target}, e.label()});
    if (!unit_ids.count(e.source) || !unit_ids.count(e.target))
      out.push_back({Violation::Rule::UnknownEndpoint, Violation::Severity::Error,
                     {e.source, e.target}, e.label()});
  }

  // Acyclicity per relation class: the effect subgraph (Exclude,
  // OnlyInclude, ShouldInclude) and the ReferTo subgraph. Mixed-kind
  // cycles that are acyclic within each class are allowed.
  std::vector<std::string> ids(unit_ids.begin(), unit_ids.end());
  std::vector<std::pair<std::string, std::string>> effect_arcs, refer_arcs;
  for (const auto& e : edges) {
    if (e.source == e.target) continue;
    if (is_effect_kind(e.kind))
      effect_arcs.push_back({e.source, e.target});
    else
      refer_arcs.push_back({e.source, e.target});
  }
  detail::find_cycles(ids, effect_arcs, Violation::Rule::EffectCycle, out);
  detail::find_cycles(ids, refer_arcs, Violation::Rule::ReferCycle, out);
  return out;
}

/// All CUs sharing cu_id's clause, including cu_id itself. Induces a
/// partition of the unit set.
inline std::set<std::string> colocated_units(const ComplianceGraph& graph, std::string_view cu_id) {
  const ComplianceUnit* self = graph.find_unit(cu_id);
  if (!self) throw UnknownIdError(std::string(cu_id));
  std::set<std::string> out;
  for (const auto& u : graph.units)
    if (u.clause_id == self->clause_id) out.insert(u.id);
  return out;
}

}  // namespace fincheck
