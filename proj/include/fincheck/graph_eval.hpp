#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "fincheck/check_compile.hpp"
#include "fincheck/cu_model.hpp"

namespace fincheck {

/// How a relation edge changed a CU's outcome during post-execution
/// evaluation: Restricted (OnlyInclude squeezed it out of its clause),
/// Deactivated (Exclude), Forced (ShouldInclude mandated it).
enum class EffectKind : std::uint8_t { Deactivated, Restricted, Forced };

inline const char* to_token(EffectKind e) {
  switch (e) {
    case EffectKind::Deactivated: return "Deactivated";
    case EffectKind::Restricted: return "Restricted";
    case EffectKind::Forced: return "Forced";
  }
  return "?";
}

struct AppliedEffect {
  RelationEdge edge;
  EffectKind effect;

  friend bool operator==(const AppliedEffect&, const AppliedEffect&) = default;
};

struct CuOutcome {
  Verdict raw_verdict = Verdict::Unknown;
  Verdict final_verdict = Verdict::Unknown;
  std::vector<AppliedEffect> applied_effects;  // application order
  bool active = true;                          // false = deactivated at end of evaluation

  friend bool operator==(const CuOutcome&, const CuOutcome&) = default;
};

/// Full audit of one graph evaluation: per-CU raw verdict, effects in
/// application order, final verdict; document roll-up; conflicts that
/// were surfaced rather than silently resolved.
struct VerdictTrace {
  std::map<std::string, CuOutcome> per_cu;  // ordered by cu_id => canonical
  Verdict document_verdict = Verdict::Compliant;
  std::vector<std::string> conflict_notes;
};

struct IncompleteRawResultsError : std::runtime_error {
  explicit IncompleteRawResultsError(std::vector<std::string> missing)
      : std::runtime_error("raw results missing for " + std::to_string(missing.size()) + " CUs"),
        missing(std::move(missing)) {}
  std::vector<std::string> missing;
};

struct GraphInvalidError : std::runtime_error {
  explicit GraphInvalidError(std::vector<Violation> violations)
      : std::runtime_error("graph failed validation (" + std::to_string(violations.size()) +
                           " violations)"),
        violations(std::move(violations)) {}
  std::vector<Violation> violations;
};

/// NonCompliant if any CU's final verdict is NonCompliant; else Unknown
/// if any is Unknown; else Compliant. NotApplicable never affects the
/// roll-up (deactivated CUs end NotApplicable by construction).
inline Verdict aggregate_document_verdict(const VerdictTrace& trace) {
  bool any_unknown = false;
  for (const auto& [id, outcome] : trace.per_cu) {
    if (outcome.final_verdict == Verdict::NonCompliant) return Verdict::NonCompliant;
    if (outcome.final_verdict == Verdict::Unknown) any_unknown = true;
  }
  return any_unknown ? Verdict::Unknown : Verdict::Compliant;
}

namespace detail {

/// Canonical topological order of the effect subgraph: Kahn's algorithm
/// with lexicographically-least-id tie breaking. Permutation-invariant
/// by construction.
inline std::map<std::string, size_t> effect_topo_order(const ComplianceGraph& graph) {
  std::map<std::string, std::set<std::string>> succ;
  std::map<std::string, int> indegree;
  for (const auto& u : graph.units) indegree[u.id];
  for (const auto& e : graph.edges) {
    if (!is_effect_kind(e.kind)) continue;
    if (succ[e.source].insert(e.target).second) ++indegree[e.target];
  }
  std::set<std::string> ready;
  for (const auto& [id, deg] : indegree)
    if (deg == 0) ready.insert(id);
  std::map<std::string, size_t> order;
  size_t next = 0;
  while (!ready.empty()) {
    std::string id = *ready.begin();
    ready.erase(ready.begin());
    order[id] = next++;
    for (const auto& t : succ[id])
      if (--indegree[t] == 0) ready.insert(t);
  }
  return order;
}

inline std::vector<RelationEdge> edges_of_kind_in_topo_order(
    const ComplianceGraph& graph, RelationKind kind, const std::map<std::string, size_t>& topo) {
  std::vector<RelationEdge> edges;
  for (const auto& e : graph.edges)
    if (e.kind == kind) edges.push_back(e);
  std::sort(edges.begin(), edges.end(), [&](const RelationEdge& a, const RelationEdge& b) {
    return std::tie(topo.at(a.source), topo.at(a.target), a.source, a.target) <
           std::tie(topo.at(b.source), topo.at(b.target), b.source, b.target);
  });
  return edges;
}

inline Tri forced_satisfaction(const RawResult& raw) {
  if (raw.triggered != Tri::False) return raw.satisfied;  // body was evaluated
  if (raw.body_when_forced) return *raw.body_when_forced;
  return Tri::Unknown;
}

inline Verdict verdict_of_satisfaction(Tri satisfied) {
  switch (satisfied) {
    case Tri::True: return Verdict::Compliant;
    case Tri::False: return Verdict::NonCompliant;
    case Tri::Unknown: return Verdict::Unknown;
  }
  return Verdict::Unknown;
}

}  // namespace detail

/// Applies relation effects to raw per-CU results. Deterministic
/// three-phase application — OnlyInclude, then Exclude, then
/// ShouldInclude (strongest: a mandate defeats a deactivation) — with
/// edges processed in canonical topological order of the effect
/// subgraph and relations from deactivated sources never firing. A
/// source counts as triggered iff its RawResult.triggered is strictly
/// true (Unknown gates impose no effects).
inline VerdictTrace evaluate_graph(const ComplianceGraph& graph,
                                   const std::map<std::string, RawResult>& raw) {
  {
    std::vector<Violation> violations = validate_graph(graph);
    if (!violations.empty()) throw GraphInvalidError(std::move(violations));
    std::vector<std::string> missing;
    for (const auto& u : graph.units)
      if (!raw.count(u.id)) missing.push_back(u.id);
    if (!missing.empty()) throw IncompleteRawResultsError(std::move(missing));
  }

  VerdictTrace trace;
  for (const auto& u : graph.units) {
    CuOutcome outcome;
    outcome.raw_verdict = raw.at(u.id).raw_verdict;
    outcome.final_verdict = outcome.raw_verdict;
    trace.per_cu[u.id] = std::move(outcome);
  }

  auto triggered = [&](const std::string& id) { return raw.at(id).triggered == Tri::True; };
  auto deactivate = [&](const std::string& id, const RelationEdge& via, EffectKind effect) {
    CuOutcome& o = trace.per_cu[id];
    o.active = false;
    o.final_verdict = Verdict::NotApplicable;
    o.applied_effects.push_back({via, effect});
  };

  const auto topo = detail::effect_topo_order(graph);

  // Phase 1 — OnlyInclude. Within each clause the restrictions of all
  // triggered OnlyInclude sources intersect, and triggered sources
  // themselves stay active: survivors = S ∪ ⋂_{s∈S}({s} ∪ targets(s)).
  {
    std::map<std::string, std::vector<const RelationEdge*>> oi_edges_by_source;
    std::vector<RelationEdge> oi_sorted =
        detail::edges_of_kind_in_topo_order(graph, RelationKind::OnlyInclude, topo);
    for (const auto& e : oi_sorted) oi_edges_by_source[e.source].push_back(&e);

    std::map<std::string, std::vector<std::string>> clauses;  // clause_id -> unit ids (sorted)
    for (const auto& u : graph.units) clauses[u.clause_id].push_back(u.id);
    for (auto& [clause, members] : clauses) std::sort(members.begin(), members.end());

    for (const auto& [clause, members] : clauses) {
      std::vector<std::string> sources;
      for (const auto& id : members)
        if (oi_edges_by_source.count(id) && triggered(id)) sources.push_back(id);
      if (sources.empty()) continue;

      std::set<std::string> survivors(sources.begin(), sources.end());
      std::set<std::string> intersection;
      bool first = true;
      for (const auto& s : sources) {
        std::set<std::string> allowed{s};
        for (const RelationEdge* e : oi_edges_by_source[s]) allowed.insert(e->target);
        if (first) {
          intersection = std::move(allowed);
          first = false;
        } else {
          std::set<std::string> next;
          std::set_intersection(intersection.begin(), intersection.end(), allowed.begin(),
                                allowed.end(), std::inserter(next, next.begin()));
          intersection = std::move(next);
        }
      }
      survivors.insert(intersection.begin(), intersection.end());

      for (const auto& id : members) {
        if (survivors.count(id)) continue;
        // Cite the first restricting source's first OnlyInclude edge.
        for (const auto& s : sources) {
          std::set<std::string> allowed{s};
          for (const RelationEdge* e : oi_edges_by_source[s]) allowed.insert(e->target);
          if (!allowed.count(id)) {
            deactivate(id, *oi_edges_by_source[s].front(), EffectKind::Restricted);
            break;
          }
        }
      }
    }
  }

  // Phase 2 — Exclude. Still-active triggered sources deactivate their
  // targets; upstream deactivations settle first (topological order).
  for (const auto& e : detail::edges_of_kind_in_topo_order(graph, RelationKind::Exclude, topo)) {
    if (!triggered(e.source) || !trace.per_cu[e.source].active) continue;
    if (!trace.per_cu[e.target].active) continue;  // keep the first cause
    deactivate(e.target, e, EffectKind::Deactivated);
  }

  // Phase 3 — ShouldInclude. Still-active triggered sources force their
  // targets active with condition override: the final verdict derives
  // from constraint satisfaction alone. A force overrides a prior
  // deactivation, surfaced in conflict_notes.
  for (const auto& e :
       detail::edges_of_kind_in_topo_order(graph, RelationKind::ShouldInclude, topo)) {
    if (!triggered(e.source) || !trace.per_cu[e.source].active) continue;
    CuOutcome& target = trace.per_cu[e.target];
    if (!target.active)
      trace.conflict_notes.push_back("force via " + e.label() +
                                     " overrides earlier deactivation of " + e.target);
    target.active = true;
    const RawResult& target_raw = raw.at(e.target);
    if (target_raw.triggered == Tri::False && !target_raw.body_when_forced)
      trace.conflict_notes.push_back("forced target " + e.target +
                                     " has no gate-free body result; verdict Unknown");
    target.final_verdict = detail::verdict_of_satisfaction(detail::forced_satisfaction(target_raw));
    target.applied_effects.push_back({e, EffectKind::Forced});
  }

  trace.document_verdict = aggregate_document_verdict(trace);
  return trace;
}

/// Canonical trace serialization (byte-stable; per-CU sections ordered
/// by cu_id) for golden-file testing and report input.
inline std::string serialize_trace(const VerdictTrace& trace) {
  nlohmann::ordered_json j;
  j["per_cu"] = nlohmann::ordered_json::array();
  for (const auto& [id, outcome] : trace.per_cu) {
    nlohmann::ordered_json o;
    o["cu_id"] = id;
    o["raw_verdict"] = to_token(outcome.raw_verdict);
    o["applied_effects"] = nlohmann::ordered_json::array();
    for (const auto& eff : outcome.applied_effects)
      o["applied_effects"].push_back(nlohmann::ordered_json{
          {"source", eff.edge.source},
          {"target", eff.edge.target},
          {"kind", to_token(eff.edge.kind)},
          {"effect", to_token(eff.effect)},
      });
    o["final_verdict"] = to_token(outcome.final_verdict);
    o["active"] = outcome.active;
    j["per_cu"].push_back(std::move(o));
  }
  j["document_verdict"] = to_token(trace.document_verdict);
  j["conflict_notes"] = trace.conflict_notes;
  return j.dump(2) + "\n";
}

inline VerdictTrace parse_trace(std::string_view bytes) {
  nlohmann::ordered_json j = nlohmann::ordered_json::parse(bytes);
  VerdictTrace trace;
  for (const auto& o : j.at("per_cu")) {
    CuOutcome outcome;
    std::string id = o.at("cu_id").get<std::string>();
    outcome.raw_verdict = parse_verdict(o.at("raw_verdict").get<std::string>()).value();
    outcome.final_verdict = parse_verdict(o.at("final_verdict").get<std::string>()).value();
    outcome.active = o.at("active").get<bool>();
    for (const auto& je : o.at("applied_effects")) {
      AppliedEffect eff;
      eff.edge.source = je.at("source").get<std::string>();
      eff.edge.target = je.at("target").get<std::string>();
      eff.edge.kind = parse_relation_kind(je.at("kind").get<std::string>()).value();
      std::string tok = je.at("effect").get<std::string>();
      eff.effect = tok == "Deactivated" ? EffectKind::Deactivated
                   : tok == "Restricted" ? EffectKind::Restricted
                                         : EffectKind::Forced;
      outcome.applied_effects.push_back(std::move(eff));
    }
    trace.per_cu[id] = std::move(outcome);
  }
  trace.document_verdict = parse_verdict(j.at("document_verdict").get<std::string>()).value();
  for (const auto& n : j.at("conflict_notes")) trace.conflict_notes.push_back(n.get<std::string>());
  return trace;
}

}  // namespace fincheck
