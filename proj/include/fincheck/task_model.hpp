#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fincheck {

enum class Difficulty : std::uint8_t { Simple, Medium, Difficult };

inline const char* to_token(Difficulty d) {
  switch (d) {
    case Difficulty::Simple: return "simple";
    case Difficulty::Medium: return "medium";
    case Difficulty::Difficult: return "difficult";
  }
  return "?";
}

inline std::optional<Difficulty> parse_difficulty(std::string_view token) {
  if (token == "simple") return Difficulty::Simple;
  if (token == "medium") return Difficulty::Medium;
  if (token == "difficult") return Difficulty::Difficult;
  return std::nullopt;
}

/// One unit test of a benchmark task: a table fixture (path relative to
/// the task file) and the expected outcome. For "ir" tasks `expected`
/// is a verdict token; for foreign-language tasks it is the exact
/// expected stdout (compared per `compare`).
struct TaskTest {
  std::string fixture;
  std::string expected;

  friend bool operator==(const TaskTest&, const TaskTest&) = default;
};

struct TaskFormatError : std::runtime_error {
  explicit TaskFormatError(const std::string& what) : std::runtime_error(what) {}
};

/// Benchmark item: a program template with masked regions, unit tests,
/// the reference solution (one fragment per mask) and its reasoning
/// trace. Masked regions are written [[1]], [[2]], ... in the template;
/// a Difficult task is a single mask spanning the whole body.
struct CodeTask {
  std::string id;
  Difficulty difficulty = Difficulty::Simple;
  std::string language = "ir";  // "ir" runs in-process; anything else goes through the sandbox
  std::optional<std::string> gate;
  std::string body_template;
  std::map<std::string, std::string> params;  // literal expression texts
  std::vector<TaskTest> tests;
  std::string compare = "verdict";  // verdict | exact | numeric
  std::vector<std::string> reference;
  std::string reasoning;
  std::vector<std::string> provenance_cu_ids;

  friend bool operator==(const CodeTask&, const CodeTask&) = default;
};

/// Number of masked regions in a template; validates that the markers
/// are exactly [[1]]..[[n]], each present at least once.
inline size_t count_masks(std::string_view tmpl) {
  std::vector<bool> seen;
  size_t i = 0;
  while ((i = tmpl.find("[[", i)) != std::string_view::npos) {
    size_t close = tmpl.find("]]", i + 2);
    if (close == std::string_view::npos) throw TaskFormatError("unterminated mask marker");
    std::string_view inner = tmpl.substr(i + 2, close - i - 2);
    if (inner.empty()) throw TaskFormatError("empty mask marker");
    size_t idx = 0;
    for (char c : inner) {
      if (c < '0' || c > '9') throw TaskFormatError("non-numeric mask marker [[" + std::string(inner) + "]]");
      idx = idx * 10 + (c - '0');
    }
    if (idx == 0) throw TaskFormatError("mask markers are 1-based");
    if (idx > seen.size()) seen.resize(idx, false);
    seen[idx - 1] = true;
    i = close + 2;
  }
  for (size_t k = 0; k < seen.size(); ++k)
    if (!seen[k]) throw TaskFormatError("mask [[" + std::to_string(k + 1) + "]] missing from template");
  return seen.size();
}

inline size_t mask_count(const CodeTask& task) { return count_masks(task.body_template); }

/// Difficulty/mask-shape consistency: Simple 1-2 masks, Medium 3,
/// Difficult one mask that IS the whole body.
inline void validate_task_shape(const CodeTask& task) {
  size_t n = mask_count(task);
  switch (task.difficulty) {
    case Difficulty::Simple:
      if (n < 1 || n > 2)
        throw TaskFormatError("task " + task.id + ": simple tasks carry 1-2 masks, got " +
                              std::to_string(n));
      break;
    case Difficulty::Medium:
      if (n != 3)
        throw TaskFormatError("task " + task.id + ": medium tasks carry 3 masks, got " +
                              std::to_string(n));
      break;
    case Difficulty::Difficult: {
      std::string_view t = task.body_template;
      size_t b = t.find_first_not_of(" \t\n\r");
      size_t e = t.find_last_not_of(" \t\n\r");
      std::string_view trimmed = b == std::string_view::npos ? t : t.substr(b, e - b + 1);
      if (n != 1 || trimmed != "[[1]]")
        throw TaskFormatError("task " + task.id +
                              ": difficult tasks carry one mask spanning the whole body");
      break;
    }
  }
  if (task.reference.size() != n)
    throw TaskFormatError("task " + task.id + ": reference has " +
                          std::to_string(task.reference.size()) + " fragments for " +
                          std::to_string(n) + " masks");
  if (task.tests.empty()) throw TaskFormatError("task " + task.id + ": no unit tests");
}

struct ArityMismatchError : std::runtime_error {
  ArityMismatchError(size_t expected, size_t got)
      : std::runtime_error("fragment count mismatch: template has " + std::to_string(expected) +
                           " masks, got " + std::to_string(got) + " fragments"),
        expected(expected),
        got(got) {}
  size_t expected;
  size_t got;
};

/// Substitutes candidate fragments into the masked regions, textually.
/// fragments[k-1] replaces every occurrence of [[k]].
inline std::string splice_text(const CodeTask& task, const std::vector<std::string>& fragments) {
  size_t n = mask_count(task);
  if (fragments.size() != n) throw ArityMismatchError(n, fragments.size());
  std::string out;
  std::string_view tmpl = task.body_template;
  size_t i = 0;
  while (i < tmpl.size()) {
    size_t open = tmpl.find("[[", i);
    if (open == std::string_view::npos) {
      out += tmpl.substr(i);
      break;
    }
    out += tmpl.substr(i, open - i);
    size_t close = tmpl.find("]]", open + 2);
    size_t idx = 0;
    for (char c : tmpl.substr(open + 2, close - open - 2)) idx = idx * 10 + (c - '0');
    out += fragments[idx - 1];
    i = close + 2;
  }
  return out;
}

}  // namespace fincheck
