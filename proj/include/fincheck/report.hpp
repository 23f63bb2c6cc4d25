#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "fincheck/cu_parser.hpp"
#include "fincheck/graph_eval.hpp"
#include "fincheck/llm_gateway.hpp"

namespace fincheck {

/// One data fact cited by a check, traceable to an execution trace.
struct CitedValue {
  std::string column;
  long row = -1;
  std::string value;  // canonical display form

  friend bool operator==(const CitedValue&, const CitedValue&) = default;
  friend auto operator<=>(const CitedValue&, const CitedValue&) = default;
};

struct ReportSection {
  std::string cu_id;
  std::vector<std::string> subject;
  std::vector<std::string> condition;
  std::vector<std::string> constraint;
  std::vector<std::string> contextual_info;
  std::string span_excerpt;
  Verdict raw_verdict = Verdict::Unknown;
  Verdict final_verdict = Verdict::Unknown;
  bool active = true;
  std::vector<AppliedEffect> applied_effects;
  std::vector<CitedValue> cited_values;
  std::vector<std::string> missing_columns;      // data gaps behind Unknown outcomes
  std::optional<std::string> failure;            // stage-tagged failure, e.g. compile error
};

/// Assembled compliance report. Every verdict appears in the underlying
/// VerdictTrace and every cited value in an execution trace — the
/// builder only copies, never invents.
struct ComplianceReport {
  std::string document_id;
  std::string timestamp;
  Verdict document_verdict = Verdict::Unknown;
  std::vector<ReportSection> sections;  // ordered by cu_id
  std::vector<std::string> conflict_notes;
  std::vector<std::string> failure_annotations;
};

namespace detail {

inline void collect_cites(const EvalTrace& trace, std::set<CitedValue>& cites,
                          std::set<std::string>& missing) {
  for (const auto& read : trace.reads)
    cites.insert({read.column, read.row, read.value.to_display_string()});
  for (const auto& note : trace.notes)
    if (note.kind == TraceNote::Kind::MissingColumn) missing.insert(note.message);
}

inline bool was_forced(const CuOutcome& outcome) {
  for (const auto& e : outcome.applied_effects)
    if (e.effect == EffectKind::Forced) return true;
  return false;
}

}  // namespace detail

/// Joins annotation, trace and raw execution results into a report.
/// For a forced CU whose own gate was false, the gate-free body trace
/// supplies the cited values (that evaluation decided its verdict).
inline ComplianceReport build_report(const RegulationAnnotation& annotation,
                                     const VerdictTrace& trace,
                                     const std::map<std::string, RawResult>& raw,
                                     const std::string& timestamp,
                                     std::map<std::string, std::string> failures = {}) {
  ComplianceReport report;
  report.document_id = annotation.document_id;
  report.timestamp = timestamp;
  report.document_verdict = trace.document_verdict;
  report.conflict_notes = trace.conflict_notes;

  std::vector<const ComplianceUnit*> units;
  for (const auto& u : annotation.graph.units) units.push_back(&u);
  std::sort(units.begin(), units.end(),
            [](const ComplianceUnit* a, const ComplianceUnit* b) { return a->id < b->id; });

  for (const ComplianceUnit* cu : units) {
    ReportSection section;
    section.cu_id = cu->id;
    section.subject = cu->subject;
    section.condition = cu->condition;
    section.constraint = cu->constraint;
    section.contextual_info = cu->contextual_info;
    section.span_excerpt =
        utf8_substr(annotation.graph.source_text, cu->span.start, cu->span.end);
    const CuOutcome& outcome = trace.per_cu.at(cu->id);
    section.raw_verdict = outcome.raw_verdict;
    section.final_verdict = outcome.final_verdict;
    section.active = outcome.active;
    section.applied_effects = outcome.applied_effects;

    std::set<CitedValue> cites;
    std::set<std::string> missing;
    auto it = raw.find(cu->id);
    if (it != raw.end()) {
      detail::collect_cites(it->second.trace, cites, missing);
      if (detail::was_forced(outcome) && it->second.triggered == Tri::False)
        detail::collect_cites(it->second.forced_trace, cites, missing);
    }
    section.cited_values.assign(cites.begin(), cites.end());
    section.missing_columns.assign(missing.begin(), missing.end());
    if (auto f = failures.find(cu->id); f != failures.end()) section.failure = f->second;
    report.sections.push_back(std::move(section));
  }

  for (const auto& [cu_id, why] : failures)
    report.failure_annotations.push_back(cu_id + ": " + why);
  return report;
}

/// Canonical structured rendering; byte-stable for fixed inputs.
inline std::string render_report_json(const ComplianceReport& report) {
  Json j;
  j["document_id"] = report.document_id;
  j["timestamp"] = report.timestamp;
  j["document_verdict"] = to_token(report.document_verdict);
  j["units"] = Json::array();
  for (const auto& s : report.sections) {
    Json u;
    u["cu_id"] = s.cu_id;
    u["subject"] = s.subject;
    u["condition"] = s.condition;
    u["constraint"] = s.constraint;
    u["contextual_info"] = s.contextual_info;
    u["span_excerpt"] = s.span_excerpt;
    u["raw_verdict"] = to_token(s.raw_verdict);
    u["final_verdict"] = to_token(s.final_verdict);
    u["active"] = s.active;
    u["applied_effects"] = Json::array();
    for (const auto& e : s.applied_effects)
      u["applied_effects"].push_back(Json{{"source", e.edge.source},
                                          {"target", e.edge.target},
                                          {"kind", to_token(e.edge.kind)},
                                          {"effect", to_token(e.effect)}});
    u["cited_values"] = Json::array();
    for (const auto& v : s.cited_values)
      u["cited_values"].push_back(Json{{"column", v.column}, {"row", v.row}, {"value", v.value}});
    u["missing_columns"] = s.missing_columns;
    if (s.failure)
      u["failure"] = *s.failure;
    else
      u["failure"] = nullptr;
    j["units"].push_back(std::move(u));
  }
  j["conflict_notes"] = report.conflict_notes;
  j["failure_annotations"] = report.failure_annotations;
  return j.dump(2) + "\n";
}

namespace detail {

inline std::string join(const std::vector<std::string>& items, const char* sep) {
  std::string out;
  for (size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

}  // namespace detail

/// Human-readable text rendering (markdown-style), locale-independent.
/// The "verdict[<cu>]: <verdict>" lines are the fact anchors a polish
/// pass must preserve.
inline std::string render_report_text(const ComplianceReport& report) {
  std::string out;
  out += "# Compliance report: " + report.document_id + "\n\n";
  out += "generated: " + report.timestamp + "\n";
  out += "document verdict: " + std::string(to_token(report.document_verdict)) + "\n\n";
  for (const auto& s : report.sections) {
    out += "## CU " + s.cu_id + "\n\n";
    out += "verdict[" + s.cu_id + "]: " + to_token(s.final_verdict) + "\n";
    out += "- raw verdict: " + std::string(to_token(s.raw_verdict)) + "\n";
    if (!s.subject.empty()) out += "- subject: " + detail::join(s.subject, " | ") + "\n";
    if (!s.condition.empty()) out += "- condition: " + detail::join(s.condition, "; ") + "\n";
    if (!s.constraint.empty()) out += "- constraint: " + detail::join(s.constraint, "; ") + "\n";
    if (!s.contextual_info.empty())
      out += "- context: " + detail::join(s.contextual_info, "; ") + "\n";
    if (!s.span_excerpt.empty()) out += "- source: \"" + s.span_excerpt + "\"\n";
    for (const auto& e : s.applied_effects)
      out += "- effect: " + std::string(to_token(e.effect)) + " via " + e.edge.label() + "\n";
    for (const auto& v : s.cited_values)
      out += "- cites: " + v.column + "[" + std::to_string(v.row) + "] = " + v.value + "\n";
    for (const auto& m : s.missing_columns) out += "- missing data: " + m + "\n";
    if (s.failure) out += "- failure: " + *s.failure + "\n";
    out += "\n";
  }
  for (const auto& n : report.conflict_notes) out += "conflict: " + n + "\n";
  for (const auto& f : report.failure_annotations) out += "failure: " + f + "\n";
  return out;
}

struct PolishChangedFactsError : std::runtime_error {
  explicit PolishChangedFactsError(const std::string& what)
      : std::runtime_error("polish rejected: " + what) {}
};

/// Verifies a polished text kept every fact anchor: per-CU verdict
/// lines and every cited value string. Throws PolishChangedFacts.
inline void verify_polish_preserves_facts(const ComplianceReport& report,
                                          const std::string& polished) {
  for (const auto& s : report.sections) {
    std::string anchor = "verdict[" + s.cu_id + "]: " + to_token(s.final_verdict);
    if (polished.find(anchor) == std::string::npos)
      throw PolishChangedFactsError("verdict line for CU " + s.cu_id + " missing or altered");
    for (const auto& v : s.cited_values)
      if (polished.find(v.value) == std::string::npos)
        throw PolishChangedFactsError("cited value " + v.value + " (CU " + s.cu_id +
                                      ") missing from polished text");
  }
}

enum class ReportFormat : std::uint8_t { Structured, Text };

/// Renders the report. A gateway polish pass may rewrite prose but
/// never verdicts or cited values; when it does, the polish is
/// rejected and the unpolished text kept.
inline std::string render_report(const ComplianceReport& report, ReportFormat format,
                                 Gateway* polish_gateway = nullptr,
                                 const PromptTemplate* polish_template = nullptr) {
  if (format == ReportFormat::Structured) return render_report_json(report);
  std::string text = render_report_text(report);
  if (polish_gateway && polish_template) {
    std::string polished = polish_gateway->request_polish(text, *polish_template);
    try {
      verify_polish_preserves_facts(report, polished);
      return polished;
    } catch (const PolishChangedFactsError&) {
      return text;  // fall back to the factual rendering
    }
  }
  return text;
}

}  // namespace fincheck
