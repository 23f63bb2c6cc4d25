#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fincheck/check_compile.hpp"
#include "fincheck/cu_model.hpp"
#include "fincheck/task_model.hpp"
#include "fincheck/text.hpp"

namespace fincheck {

using Json = nlohmann::ordered_json;

/// Lexical failure in interchange input. Line/column are 1-based; for
/// structural (non-lexical) problems they are 0 and `expected` carries
/// the JSON path.
struct AnnotationSyntaxError : std::runtime_error {
  AnnotationSyntaxError(size_t line, size_t column, const std::string& expected)
      : std::runtime_error("syntax error at " + std::to_string(line) + ":" +
                           std::to_string(column) + ": " + expected),
        line(line),
        column(column),
        expected(expected) {}
  size_t line;
  size_t column;
  std::string expected;
};

struct SpanOutOfRangeError : std::runtime_error {
  explicit SpanOutOfRangeError(const std::string& cu_id)
      : std::runtime_error("span out of range for CU " + cu_id), cu_id(cu_id) {}
  std::string cu_id;
};

struct ValidationFailedError : std::runtime_error {
  explicit ValidationFailedError(std::vector<Violation> violations)
      : std::runtime_error("annotation failed validation (" +
                           std::to_string(violations.size()) + " violations)"),
        violations(std::move(violations)) {}
  std::vector<Violation> violations;
};

struct MissingFileError : std::runtime_error {
  explicit MissingFileError(const std::string& path)
      : std::runtime_error("missing: " + path), path(path) {}
  std::string path;
};

struct LoadFailedError : std::runtime_error {
  explicit LoadFailedError(std::vector<std::pair<std::string, std::string>> causes)
      : std::runtime_error(render(causes)), causes(std::move(causes)) {}
  std::vector<std::pair<std::string, std::string>> causes;

private:
  static std::string render(const std::vector<std::pair<std::string, std::string>>& causes) {
    std::string s = "dataset load failed (" + std::to_string(causes.size()) + " files):";
    for (const auto& [path, why] : causes) s += "\n  " + path + ": " + why;
    return s;
  }
};

/// Declarative key-alias table absorbing naming drift in released data:
/// alias -> canonical, per level, plus relation-kind token aliases.
struct FieldMap {
  std::map<std::string, std::string> top;
  std::map<std::string, std::string> unit;
  std::map<std::string, std::string> relation;
  std::map<std::string, std::string> kind;

  bool empty() const { return top.empty() && unit.empty() && relation.empty() && kind.empty(); }
};

/// One regulation's structured annotation: graph plus document metadata.
/// `warnings` carries non-fatal validation findings (identical spans).
struct RegulationAnnotation {
  ComplianceGraph graph;
  std::string document_id;
  std::map<std::string, std::string> metadata;
  std::vector<Violation> warnings;

  friend bool operator==(const RegulationAnnotation& a, const RegulationAnnotation& b) {
    return a.graph == b.graph && a.document_id == b.document_id && a.metadata == b.metadata;
  }
};

namespace detail {

inline void position_of(std::string_view text, size_t byte, size_t& line, size_t& column) {
  line = 1;
  column = 1;
  for (size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
}

[[noreturn]] inline void structural(const std::string& path, const std::string& expected) {
  throw AnnotationSyntaxError(0, 0, path + ": expected " + expected);
}

inline const Json* get_key(const Json& obj, const std::string& name,
                           const std::map<std::string, std::string>& aliases) {
  if (auto it = obj.find(name); it != obj.end()) return &*it;
  for (const auto& [alias, canonical] : aliases)
    if (canonical == name)
      if (auto it = obj.find(alias); it != obj.end()) return &*it;
  return nullptr;
}

inline std::string require_string(const Json& obj, const std::string& name,
                                  const std::map<std::string, std::string>& aliases,
                                  const std::string& path) {
  const Json* v = get_key(obj, name, aliases);
  if (!v || !v->is_string()) structural(path + "." + name, "string");
  return v->get<std::string>();
}

inline std::vector<std::string> require_string_array(const Json& obj, const std::string& name,
                                                     const std::map<std::string, std::string>& aliases,
                                                     const std::string& path) {
  const Json* v = get_key(obj, name, aliases);
  if (!v || !v->is_array()) structural(path + "." + name, "array of strings");
  std::vector<std::string> out;
  for (const auto& item : *v) {
    if (!item.is_string()) structural(path + "." + name, "array of strings");
    out.push_back(item.get<std::string>());
  }
  return out;
}

/// Spans of distinct CUs may touch but must not partially overlap;
/// identical spans are a warning, not an error.
inline void check_span_overlaps(const ComplianceGraph& graph, std::vector<Violation>& errors,
                                std::vector<Violation>& warnings) {
  std::vector<const ComplianceUnit*> units;
  for (const auto& u : graph.units) units.push_back(&u);
  std::sort(units.begin(), units.end(), [](const ComplianceUnit* a, const ComplianceUnit* b) {
    return std::tie(a->span.start, a->span.end, a->id) < std::tie(b->span.start, b->span.end, b->id);
  });
  for (size_t i = 0; i < units.size(); ++i) {
    for (size_t j = i + 1; j < units.size(); ++j) {
      const Span& a = units[i]->span;
      const Span& b = units[j]->span;
      if (b.start >= a.end) break;  // sorted by start
      if (a == b) {
        warnings.push_back({Violation::Rule::IdenticalSpans, Violation::Severity::Warning,
                            {units[i]->id, units[j]->id}, ""});
      } else {
        errors.push_back({Violation::Rule::SpanPartialOverlap, Violation::Severity::Error,
                          {units[i]->id, units[j]->id}, ""});
      }
    }
  }
}

}  // namespace detail

/// Parses interchange-format text into a fully validated annotation.
/// Offsets are Unicode scalar-value offsets into source_text. Every
/// input yields either a model or a structured error; this never
/// crashes on arbitrary bytes.
inline RegulationAnnotation parse_annotation(std::string_view bytes, const FieldMap& map = {}) {
  Json doc;
  try {
    doc = Json::parse(bytes);
  } catch (const nlohmann::json::parse_error& e) {
    size_t line, column;
    detail::position_of(bytes, e.byte > 0 ? e.byte - 1 : 0, line, column);
    std::string what = e.what();
    // nlohmann prefixes "[json.exception.parse_error.N] "; keep the tail.
    if (auto pos = what.find("] "); pos != std::string::npos) what = what.substr(pos + 2);
    throw AnnotationSyntaxError(line, column, what);
  }
  if (!doc.is_object()) detail::structural("$", "object");

  RegulationAnnotation ann;
  ann.document_id = detail::require_string(doc, "document_id", map.top, "$");
  {
    const Json* v = detail::get_key(doc, "source_text", map.top);
    if (!v || !v->is_string()) detail::structural("$.source_text", "string");
    ann.graph.source_text = v->get<std::string>();
  }

  const Json* units = detail::get_key(doc, "units", map.top);
  if (!units || !units->is_array()) detail::structural("$.units", "array");
  size_t index = 0;
  for (const auto& ju : *units) {
    std::string path = "$.units[" + std::to_string(index++) + "]";
    if (!ju.is_object()) detail::structural(path, "object");
    ComplianceUnit cu;
    cu.id = detail::require_string(ju, "id", map.unit, path);
    cu.clause_id = detail::require_string(ju, "clause_id", map.unit, path);
    cu.subject = detail::require_string_array(ju, "subject", map.unit, path);
    cu.condition = detail::require_string_array(ju, "condition", map.unit, path);
    cu.constraint = detail::require_string_array(ju, "constraint", map.unit, path);
    cu.contextual_info = detail::require_string_array(ju, "contextual_info", map.unit, path);
    const Json* span = detail::get_key(ju, "span", map.unit);
    if (!span || !span->is_object()) detail::structural(path + ".span", "object {start,end}");
    const Json* start = detail::get_key(*span, "start", map.unit);
    const Json* end = detail::get_key(*span, "end", map.unit);
    if (!start || !start->is_number_unsigned() || !end || !end->is_number_unsigned())
      detail::structural(path + ".span", "unsigned start/end");
    cu.span.start = start->get<std::uint32_t>();
    cu.span.end = end->get<std::uint32_t>();
    ann.graph.units.push_back(std::move(cu));
  }

  const Json* relations = detail::get_key(doc, "relations", map.top);
  if (!relations || !relations->is_array()) detail::structural("$.relations", "array");
  index = 0;
  for (const auto& je : *relations) {
    std::string path = "$.relations[" + std::to_string(index++) + "]";
    if (!je.is_object()) detail::structural(path, "object");
    RelationEdge e;
    e.source = detail::require_string(je, "source", map.relation, path);
    e.target = detail::require_string(je, "target", map.relation, path);
    std::string kind = detail::require_string(je, "kind", map.relation, path);
    if (auto it = map.kind.find(kind); it != map.kind.end()) kind = it->second;
    auto k = parse_relation_kind(kind);
    if (!k)
      detail::structural(path + ".kind",
                         "one of refer_to|exclude|only_include|should_include, got \"" + kind + "\"");
    e.kind = *k;
    ann.graph.edges.push_back(std::move(e));
  }

  if (const Json* meta = detail::get_key(doc, "metadata", map.top)) {
    if (!meta->is_object()) detail::structural("$.metadata", "object of strings");
    for (const auto& [key, value] : meta->items()) {
      if (!value.is_string()) detail::structural("$.metadata." + key, "string");
      ann.metadata[key] = value.get<std::string>();
    }
  }

  // Spans first (their own error class), then full structural validation.
  const size_t text_len = utf8_scalar_length(ann.graph.source_text);
  for (const auto& u : ann.graph.units)
    if (u.span.start >= u.span.end || u.span.end > text_len) throw SpanOutOfRangeError(u.id);

  std::vector<Violation> violations = validate_graph(ann.graph);
  detail::check_span_overlaps(ann.graph, violations, ann.warnings);
  if (!violations.empty()) throw ValidationFailedError(std::move(violations));
  return ann;
}

namespace detail {

inline Json unit_to_json(const ComplianceUnit& u) {
  Json j;
  j["id"] = u.id;
  j["clause_id"] = u.clause_id;
  j["subject"] = u.subject;
  j["condition"] = u.condition;
  j["constraint"] = u.constraint;
  j["contextual_info"] = u.contextual_info;
  j["span"] = Json{{"start", u.span.start}, {"end", u.span.end}};
  return j;
}

}  // namespace detail

/// Canonical serialization: fixed key order; units sorted by
/// (span.start, id); edges sorted by (source, target, kind); metadata
/// keys sorted; 2-space indent, LF, trailing newline. parse ∘ serialize
/// is the identity on models; serialize ∘ parse is the identity on
/// canonical-form inputs.
inline std::string serialize_annotation(const RegulationAnnotation& ann) {
  Json j;
  j["document_id"] = ann.document_id;
  j["source_text"] = ann.graph.source_text;

  std::vector<ComplianceUnit> units = ann.graph.units;
  std::sort(units.begin(), units.end(), [](const ComplianceUnit& a, const ComplianceUnit& b) {
    return std::tie(a.span.start, a.id) < std::tie(b.span.start, b.id);
  });
  j["units"] = Json::array();
  for (const auto& u : units) j["units"].push_back(detail::unit_to_json(u));

  std::vector<RelationEdge> edges = ann.graph.edges;
  std::sort(edges.begin(), edges.end());
  j["relations"] = Json::array();
  for (const auto& e : edges)
    j["relations"].push_back(
        Json{{"source", e.source}, {"target", e.target}, {"kind", to_token(e.kind)}});

  Json meta = Json::object();
  for (const auto& [k, v] : ann.metadata) meta[k] = v;  // std::map iterates sorted
  j["metadata"] = std::move(meta);
  return j.dump(2) + "\n";
}

/// Derived dataset counters; must equal direct recounts.
struct DatasetStats {
  size_t cu_count = 0;
  size_t edge_count = 0;
  std::map<RelationKind, size_t> per_kind;
  size_t task_count = 0;
  std::map<Difficulty, size_t> per_difficulty;

  friend bool operator==(const DatasetStats&, const DatasetStats&) = default;
};

struct DatasetBundle {
  std::vector<RegulationAnnotation> annotations;
  std::vector<CodeTask> tasks;
  DatasetStats stats;

  DatasetStats recount() const {
    DatasetStats s;
    for (const auto& a : annotations) {
      s.cu_count += a.graph.units.size();
      s.edge_count += a.graph.edges.size();
      for (const auto& e : a.graph.edges) ++s.per_kind[e.kind];
    }
    s.task_count = tasks.size();
    for (const auto& t : tasks) ++s.per_difficulty[t.difficulty];
    return s;
  }
};

/// Task interchange: one JSON object per file.
inline CodeTask parse_task(std::string_view bytes) {
  Json j;
  try {
    j = Json::parse(bytes);
  } catch (const nlohmann::json::parse_error& e) {
    size_t line, column;
    detail::position_of(bytes, e.byte > 0 ? e.byte - 1 : 0, line, column);
    throw AnnotationSyntaxError(line, column, e.what());
  }
  if (!j.is_object()) detail::structural("$", "object");
  CodeTask t;
  t.id = detail::require_string(j, "id", {}, "$");
  auto d = parse_difficulty(detail::require_string(j, "difficulty", {}, "$"));
  if (!d) detail::structural("$.difficulty", "simple|medium|difficult");
  t.difficulty = *d;
  if (j.contains("language")) t.language = j["language"].get<std::string>();
  if (j.contains("gate") && !j["gate"].is_null()) t.gate = j["gate"].get<std::string>();
  t.body_template = detail::require_string(j, "body_template", {}, "$");
  if (j.contains("params"))
    for (const auto& [k, v] : j["params"].items()) t.params[k] = v.get<std::string>();
  if (!j.contains("tests") || !j["tests"].is_array()) detail::structural("$.tests", "array");
  for (const auto& jt : j["tests"]) {
    TaskTest test;
    test.fixture = jt.at("fixture").get<std::string>();
    test.expected = jt.at("expected").get<std::string>();
    t.tests.push_back(std::move(test));
  }
  if (j.contains("compare")) t.compare = j["compare"].get<std::string>();
  t.reference = detail::require_string_array(j, "reference", {}, "$");
  if (j.contains("reasoning")) t.reasoning = j["reasoning"].get<std::string>();
  if (j.contains("provenance_cu_ids"))
    t.provenance_cu_ids = detail::require_string_array(j, "provenance_cu_ids", {}, "$");
  validate_task_shape(t);
  return t;
}

inline std::string serialize_task(const CodeTask& t) {
  Json j;
  j["id"] = t.id;
  j["difficulty"] = to_token(t.difficulty);
  j["language"] = t.language;
  if (t.gate)
    j["gate"] = *t.gate;
  else
    j["gate"] = nullptr;
  j["body_template"] = t.body_template;
  Json params = Json::object();
  for (const auto& [k, v] : t.params) params[k] = v;
  j["params"] = std::move(params);
  j["tests"] = Json::array();
  for (const auto& test : t.tests)
    j["tests"].push_back(Json{{"fixture", test.fixture}, {"expected", test.expected}});
  j["compare"] = t.compare;
  j["reference"] = t.reference;
  j["reasoning"] = t.reasoning;
  j["provenance_cu_ids"] = t.provenance_cu_ids;
  return j.dump(2) + "\n";
}

namespace detail {

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingFileError(path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

/// In-process verification that an "ir" task's reference solution
/// passes its own unit tests (fail-fast at load). Foreign-language
/// tasks are verified at scoring time through the sandbox.
inline void verify_reference_solution(const CodeTask& task, const std::filesystem::path& task_dir) {
  if (task.language != "ir") return;
  CheckProgram program = splice_completion(task, task.reference);
  for (const auto& test : task.tests) {
    DataTable table = load_table((task_dir / test.fixture).string());
    RawResult result = run_check(program, table);
    auto expected = parse_verdict(test.expected);
    if (!expected)
      throw TaskFormatError("task " + task.id + ": unknown expected verdict \"" + test.expected +
                            "\"");
    if (result.raw_verdict != *expected)
      throw TaskFormatError("task " + task.id + ": reference solution yields " +
                            to_token(result.raw_verdict) + " on " + test.fixture + ", expected " +
                            test.expected);
  }
}

}  // namespace detail

/// Loads a released dataset directory (annotations/*.json,
/// tasks/*.json, optional field_map.json). All-or-nothing: any
/// malformed file fails the whole load, with every failure reported.
inline DatasetBundle load_dataset(const std::string& directory) {
  namespace fs = std::filesystem;
  fs::path root(directory);
  fs::path ann_dir = root / "annotations";
  if (!fs::is_directory(ann_dir)) throw MissingFileError(ann_dir.string());

  FieldMap map;
  if (fs::exists(root / "field_map.json")) {
    Json j = Json::parse(detail::read_file(root / "field_map.json"));
    auto load_level = [&j](const char* level, std::map<std::string, std::string>& out) {
      if (j.contains(level))
        for (const auto& [k, v] : j[level].items()) out[k] = v.get<std::string>();
    };
    load_level("top", map.top);
    load_level("unit", map.unit);
    load_level("relation", map.relation);
    load_level("kind", map.kind);
  }

  auto sorted_json_files = [](const fs::path& dir) {
    std::vector<fs::path> files;
    if (fs::is_directory(dir))
      for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".json")
          files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    return files;
  };

  DatasetBundle bundle;
  std::vector<std::pair<std::string, std::string>> failures;

  auto annotation_files = sorted_json_files(ann_dir);
  if (annotation_files.empty()) throw MissingFileError((ann_dir / "*.json").string());
  for (const auto& path : annotation_files) {
    try {
      bundle.annotations.push_back(parse_annotation(detail::read_file(path), map));
    } catch (const std::exception& e) {
      failures.push_back({path.string(), e.what()});
    }
  }

  for (const auto& path : sorted_json_files(root / "tasks")) {
    try {
      CodeTask task = parse_task(detail::read_file(path));
      detail::verify_reference_solution(task, path.parent_path());
      bundle.tasks.push_back(std::move(task));
    } catch (const std::exception& e) {
      failures.push_back({path.string(), e.what()});
    }
  }

  if (!failures.empty()) throw LoadFailedError(std::move(failures));
  bundle.stats = bundle.recount();
  return bundle;
}

}  // namespace fincheck
