#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "fincheck/check_compile.hpp"
#include "fincheck/cu_parser.hpp"
#include "fincheck/graph_eval.hpp"
#include "fincheck/llm_gateway.hpp"
#include "fincheck/report.hpp"
#include "fincheck/table.hpp"

namespace fincheck {

// ---------------------------------------------------------------------------
// Binding sheets
// ---------------------------------------------------------------------------

inline BindingSheet parse_binding_sheet(std::string_view bytes) {
  Json j = Json::parse(bytes);
  const Json& map = j.contains("bindings") ? j["bindings"] : j;
  if (!map.is_object()) throw std::runtime_error("binding sheet: expected object of CU bindings");
  BindingSheet sheet;
  for (const auto& [cu_id, jb] : map.items()) {
    CuBinding b;
    if (jb.contains("gate") && !jb["gate"].is_null()) b.gate = jb["gate"].get<std::string>();
    if (jb.contains("body") && !jb["body"].is_null()) b.body = jb["body"].get<std::string>();
    if (jb.contains("params"))
      for (const auto& [k, v] : jb["params"].items()) b.params[k] = v.get<std::string>();
    if (jb.contains("subject_column") && !jb["subject_column"].is_null())
      b.subject_column = jb["subject_column"].get<std::string>();
    if (jb.contains("comments"))
      for (const auto& jc : jb["comments"]) {
        Comment c;
        c.text = jc.at("text").get<std::string>();
        if (jc.contains("tags"))
          for (const auto& t : jc["tags"]) c.tags.push_back(t.get<std::string>());
        b.comments.push_back(std::move(c));
      }
    sheet.by_cu[cu_id] = std::move(b);
  }
  return sheet;
}

inline BindingSheet load_binding_sheet(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingFileError(path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_binding_sheet(buf.str());
}

// ---------------------------------------------------------------------------
// Artifact serialization (canonical; the run directory is the audit unit)
// ---------------------------------------------------------------------------

inline std::string serialize_programs(const std::map<std::string, CheckProgram>& programs) {
  Json j;
  j["programs"] = Json::array();
  for (const auto& [cu_id, p] : programs) {
    Json jp;
    jp["cu_id"] = p.cu_id;
    if (p.condition_gate && !p.gate_text.empty())
      jp["gate"] = p.gate_text;
    else if (p.condition_gate)
      jp["gate"] = "<synthesized>";
    else
      jp["gate"] = nullptr;
    jp["body"] = p.body_text;
    Json params = Json::object();
    for (const auto& [name, value] : p.parameters) params[name] = to_ir_literal(value);
    jp["params"] = std::move(params);
    jp["required_columns"] = std::vector<std::string>(p.required_columns.begin(),
                                                      p.required_columns.end());
    jp["comments"] = Json::array();
    for (const auto& c : p.comments)
      jp["comments"].push_back(Json{{"text", c.text}, {"tags", c.tags}});
    j["programs"].push_back(std::move(jp));
  }
  return j.dump(2) + "\n";
}

/// Reloads serialized programs (reparsing expressions) and re-derives
/// required_columns; a mismatch against the stored set means the file
/// was edited inconsistently.
inline std::map<std::string, CheckProgram> parse_programs(std::string_view bytes) {
  Json j = Json::parse(bytes);
  std::map<std::string, CheckProgram> out;
  for (const auto& jp : j.at("programs")) {
    CheckProgram p;
    p.cu_id = jp.at("cu_id").get<std::string>();
    for (const auto& [name, literal] : jp.at("params").items())
      p.parameters[name] = detail::parse_param_literal(p.cu_id, name, literal.get<std::string>());
    ParamTypes types;
    for (const auto& [name, value] : p.parameters)
      types[name] = value.kind() ? ir_type_of(*value.kind()) : IrType::Dynamic;
    if (!jp.at("gate").is_null()) {
      p.gate_text = jp.at("gate").get<std::string>();
      p.condition_gate = parse_expr(p.gate_text, &types, true);
    }
    p.body_text = jp.at("body").get<std::string>();
    p.constraint_body = parse_expr(p.body_text, &types, true);
    p.required_columns = free_columns(p.constraint_body);
    if (p.condition_gate) {
      auto g = free_columns(p.condition_gate);
      p.required_columns.insert(g.begin(), g.end());
    }
    if (jp.contains("required_columns")) {
      std::set<std::string> declared;
      for (const auto& c : jp["required_columns"]) declared.insert(c.get<std::string>());
      if (declared != p.required_columns)
        throw std::runtime_error("program " + p.cu_id +
                                 ": stored required_columns disagree with the expressions");
    }
    if (jp.contains("comments"))
      for (const auto& jc : jp["comments"]) {
        Comment c;
        c.text = jc.at("text").get<std::string>();
        for (const auto& t : jc.at("tags")) c.tags.push_back(t.get<std::string>());
        p.comments.push_back(std::move(c));
      }
    out[p.cu_id] = std::move(p);
  }
  return out;
}

namespace detail {

inline Json trace_to_json(const EvalTrace& trace) {
  Json j;
  j["reads"] = Json::array();
  for (const auto& r : trace.reads)
    j["reads"].push_back(Json{{"column", r.column},
                              {"row", r.row},
                              {"value", r.value.to_display_string()},
                              {"null", r.value.is_unknown()}});
  j["notes"] = Json::array();
  for (const auto& n : trace.notes)
    j["notes"].push_back(
        Json{{"kind", to_token(n.kind)}, {"message", n.message}, {"count", n.count}});
  return j;
}

inline const char* tri_token(Tri t) { return to_token(t); }

}  // namespace detail

inline std::string serialize_raw_results(const std::map<std::string, RawResult>& raw) {
  Json j;
  j["results"] = Json::array();
  for (const auto& [cu_id, r] : raw) {
    Json jr;
    jr["cu_id"] = cu_id;
    jr["triggered"] = detail::tri_token(r.triggered);
    jr["satisfied"] = detail::tri_token(r.satisfied);
    jr["body_evaluated"] = r.body_evaluated;
    jr["raw_verdict"] = to_token(r.raw_verdict);
    if (r.body_when_forced)
      jr["body_when_forced"] = detail::tri_token(*r.body_when_forced);
    else
      jr["body_when_forced"] = nullptr;
    jr["trace"] = detail::trace_to_json(r.trace);
    jr["forced_trace"] = detail::trace_to_json(r.forced_trace);
    j["results"].push_back(std::move(jr));
  }
  return j.dump(2) + "\n";
}

namespace detail {

inline Tri parse_tri(std::string_view tok) {
  if (tok == "true") return Tri::True;
  if (tok == "false") return Tri::False;
  return Tri::Unknown;
}

inline EvalTrace trace_from_json(const Json& j) {
  EvalTrace trace;
  for (const auto& jr : j.at("reads")) {
    ColumnCite cite;
    cite.column = jr.at("column").get<std::string>();
    cite.row = jr.at("row").get<long>();
    if (!jr.at("null").get<bool>())
      cite.value = TypedValue::text(jr.at("value").get<std::string>());
    trace.reads.push_back(std::move(cite));
  }
  for (const auto& jn : j.at("notes")) {
    TraceNote note{TraceNote::Kind::MissingColumn, jn.at("message").get<std::string>(),
                   jn.at("count").get<long>()};
    std::string kind = jn.at("kind").get<std::string>();
    using K = TraceNote::Kind;
    for (K k : {K::MissingColumn, K::AmbiguousColumn, K::DivisionByZero, K::TypeMismatch,
                K::AggregationSkip, K::WhereUnknown, K::EmptyRowSet, K::MissingParam})
      if (kind == to_token(k)) note.kind = k;
    trace.notes.push_back(std::move(note));
  }
  return trace;
}

}  // namespace detail

/// Reloads serialized raw results. Cell values come back as their
/// display strings (reports cite display strings, so report rebuilding
/// is lossless; re-evaluation is not the purpose of this artifact).
inline std::map<std::string, RawResult> parse_raw_results(std::string_view bytes) {
  Json j = Json::parse(bytes);
  std::map<std::string, RawResult> out;
  for (const auto& jr : j.at("results")) {
    RawResult r;
    std::string cu_id = jr.at("cu_id").get<std::string>();
    r.triggered = detail::parse_tri(jr.at("triggered").get<std::string>());
    r.satisfied = detail::parse_tri(jr.at("satisfied").get<std::string>());
    r.body_evaluated = jr.at("body_evaluated").get<bool>();
    r.raw_verdict = parse_verdict(jr.at("raw_verdict").get<std::string>()).value();
    if (!jr.at("body_when_forced").is_null())
      r.body_when_forced = detail::parse_tri(jr.at("body_when_forced").get<std::string>());
    r.trace = detail::trace_from_json(jr.at("trace"));
    r.forced_trace = detail::trace_from_json(jr.at("forced_trace"));
    out[cu_id] = std::move(r);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pipeline stages
// ---------------------------------------------------------------------------

enum class PipelineMode : std::uint8_t { GoldStruct, PredictedStruct };

struct PipelineOptions {
  PipelineMode mode = PipelineMode::GoldStruct;
  std::string run_dir;    // empty = do not persist artifacts
  std::string timestamp;  // empty = wall clock (UTC ISO-8601)
  SchemaHints data_hints;
};

struct PipelineResult {
  RegulationAnnotation annotation;
  std::map<std::string, CheckProgram> programs;
  std::map<std::string, std::string> compile_failures;  // cu_id -> reason
  std::map<std::string, RawResult> raw;
  VerdictTrace trace;
  ComplianceReport report;
};

struct StructureFailedError : std::runtime_error {
  explicit StructureFailedError(const std::string& what)
      : std::runtime_error("structure stage failed: " + what) {}
};

/// Compile stage: independent CUs compile independently; failures are
/// collected, not fatal (their verdicts degrade to Unknown downstream).
inline void stage_compile(const RegulationAnnotation& annotation, const BindingSheet& bindings,
                          std::map<std::string, CheckProgram>& programs,
                          std::map<std::string, std::string>& failures) {
  for (const auto& cu : annotation.graph.units) {
    try {
      programs[cu.id] = compile_cu(cu, bindings, annotation.graph);
    } catch (const std::exception& e) {
      failures[cu.id] = e.what();
    }
  }
}

/// Check stage. ShouldInclude targets additionally get their constraint
/// body evaluated gate-free so graph evaluation can derive forced
/// verdicts. CUs whose compilation failed yield Unknown raw results.
inline std::map<std::string, RawResult> stage_check(
    const RegulationAnnotation& annotation, const std::map<std::string, CheckProgram>& programs,
    const DataTable& table) {
  std::set<std::string> forced_targets;
  for (const auto& e : annotation.graph.edges)
    if (e.kind == RelationKind::ShouldInclude) forced_targets.insert(e.target);

  std::map<std::string, RawResult> raw;
  for (const auto& cu : annotation.graph.units) {
    auto it = programs.find(cu.id);
    if (it == programs.end()) {
      RawResult r;
      r.triggered = Tri::Unknown;
      r.satisfied = Tri::Unknown;
      r.raw_verdict = Verdict::Unknown;
      raw[cu.id] = std::move(r);
      continue;
    }
    RawResult r = run_check(it->second, table);
    if (forced_targets.count(cu.id)) {
      auto [satisfied, trace] = run_body_unconditionally(it->second, table);
      r.body_when_forced = satisfied;
      r.forced_trace = std::move(trace);
    }
    raw[cu.id] = std::move(r);
  }
  return raw;
}

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << bytes;
}

}  // namespace detail

/// End-to-end run: structure acquisition → compile → check →
/// graph evaluation → report. All intermediate artifacts are persisted
/// to the run directory when one is configured. Deterministic in
/// GoldStruct mode (and PredictedStruct with the mock transport) for a
/// fixed timestamp.
inline PipelineResult run_pipeline(const RegulationAnnotation& annotation, const DataTable& table,
                                   const BindingSheet& bindings, const PipelineOptions& options) {
  PipelineResult result;
  result.annotation = annotation;

  stage_compile(annotation, bindings, result.programs, result.compile_failures);
  result.raw = stage_check(annotation, result.programs, table);
  result.trace = evaluate_graph(annotation.graph, result.raw);

  std::string timestamp = options.timestamp.empty() ? AuditLog::now_utc() : options.timestamp;
  result.report =
      build_report(annotation, result.trace, result.raw, timestamp, result.compile_failures);

  if (!options.run_dir.empty()) {
    namespace fs = std::filesystem;
    fs::create_directories(options.run_dir);
    fs::path dir(options.run_dir);
    detail::write_file(dir / "annotation.json", serialize_annotation(annotation));
    detail::write_file(dir / "programs.json", serialize_programs(result.programs));
    detail::write_file(dir / "raw_results.json", serialize_raw_results(result.raw));
    detail::write_file(dir / "trace.json", serialize_trace(result.trace));
    detail::write_file(dir / "report.json", render_report_json(result.report));
    detail::write_file(dir / "report.md", render_report_text(result.report));
  }
  return result;
}

/// Structure acquisition for PredictedStruct mode.
inline RegulationAnnotation acquire_structure(const std::string& regulation_text, Gateway& gateway,
                                              const PromptTemplate& tmpl) {
  try {
    return gateway.request_structure(regulation_text, tmpl);
  } catch (const MalformedOutputError&) {
    throw;
  } catch (const TransportError&) {
    throw;
  } catch (const std::exception& e) {
    throw StructureFailedError(e.what());
  }
}

/// Shell-facing exit code for a document verdict: 3 NonCompliant,
/// 4 Unknown-dominated, 0 otherwise.
inline int verdict_exit_code(Verdict v) {
  if (v == Verdict::NonCompliant) return 3;
  if (v == Verdict::Unknown) return 4;
  return 0;
}

}  // namespace fincheck
