#pragma once

#include <condition_variable>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <json.hpp>

#include "fincheck/cu_parser.hpp"

namespace fincheck {

enum class TemplateRole : std::uint8_t { StructurePredict, CodeGenerate, ReportPolish };
enum class ShotMode : std::uint8_t { ZeroShot, OneShot };

inline const char* to_token(TemplateRole r) {
  switch (r) {
    case TemplateRole::StructurePredict: return "structure_predict";
    case TemplateRole::CodeGenerate: return "code_generate";
    case TemplateRole::ReportPolish: return "report_polish";
  }
  return "?";
}

struct GatewayConfigError : std::runtime_error {
  explicit GatewayConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Marker substituted for {{reasoning_directive}} when the template's
/// reasoning flag is on; prompts carry it exactly once.
inline constexpr std::string_view kReasoningMarker =
    "## Reasoning\nThink through the required checks step by step before answering.";

/// Prompt template with named {{placeholder}} slots. Templates are data
/// files: the shipped skeletons live under fixtures/templates and real
/// prompt text comes from the released dataset.
struct PromptTemplate {
  std::string name;
  TemplateRole role = TemplateRole::StructurePredict;
  ShotMode shot_mode = ShotMode::ZeroShot;
  bool reasoning_directive = false;
  std::vector<std::string> placeholders;
  std::string text;
  std::string demonstration_text;  // inserted for {{demonstration}} in one-shot mode

  /// Placeholder name of the query slot per role.
  std::string query_placeholder() const {
    switch (role) {
      case TemplateRole::StructurePredict: return "regulation_text";
      case TemplateRole::CodeGenerate: return "cu_context";
      case TemplateRole::ReportPolish: return "draft_report";
    }
    return {};
  }
};

namespace detail {

inline std::vector<std::pair<std::string, size_t>> referenced_placeholders(
    const std::string& text) {
  std::vector<std::pair<std::string, size_t>> out;
  size_t pos = 0;
  while ((pos = text.find("{{", pos)) != std::string::npos) {
    size_t close = text.find("}}", pos + 2);
    if (close == std::string::npos) break;
    out.push_back({text.substr(pos + 2, close - pos - 2), pos});
    pos = close + 2;
  }
  return out;
}

}  // namespace detail

/// Every referenced placeholder must be declared; one-shot templates
/// must place {{demonstration}} before the query slot; zero-shot
/// templates must not reference a demonstration.
inline void validate_template(const PromptTemplate& t) {
  std::set<std::string> declared(t.placeholders.begin(), t.placeholders.end());
  declared.insert("reasoning_directive");  // builtin
  std::optional<size_t> demo_at, query_at;
  for (const auto& [name, pos] : detail::referenced_placeholders(t.text)) {
    if (!declared.count(name))
      throw GatewayConfigError("template " + t.name + " references undeclared placeholder {{" +
                               name + "}}");
    if (name == "demonstration" && !demo_at) demo_at = pos;
    if (name == t.query_placeholder() && !query_at) query_at = pos;
  }
  if (!query_at)
    throw GatewayConfigError("template " + t.name + " lacks its query placeholder {{" +
                             t.query_placeholder() + "}}");
  if (t.shot_mode == ShotMode::OneShot) {
    if (!demo_at)
      throw GatewayConfigError("one-shot template " + t.name + " lacks {{demonstration}}");
    if (*demo_at > *query_at)
      throw GatewayConfigError("one-shot template " + t.name +
                               " must place the demonstration before the query");
  } else if (demo_at) {
    throw GatewayConfigError("zero-shot template " + t.name + " references {{demonstration}}");
  }
}

/// Pure function of (template, variables); no unresolved placeholder
/// survives rendering.
inline std::string render_prompt(const PromptTemplate& t,
                                 const std::map<std::string, std::string>& variables) {
  std::map<std::string, std::string> vars = variables;
  vars["reasoning_directive"] = t.reasoning_directive ? std::string(kReasoningMarker) : "";
  if (t.shot_mode == ShotMode::OneShot && !vars.count("demonstration"))
    vars["demonstration"] = t.demonstration_text;
  std::string out;
  size_t pos = 0;
  while (pos < t.text.size()) {
    size_t open = t.text.find("{{", pos);
    if (open == std::string::npos) {
      out += t.text.substr(pos);
      break;
    }
    out += t.text.substr(pos, open - pos);
    size_t close = t.text.find("}}", open + 2);
    if (close == std::string::npos)
      throw GatewayConfigError("template " + t.name + ": unterminated placeholder");
    std::string name = t.text.substr(open + 2, close - open - 2);
    auto it = vars.find(name);
    if (it == vars.end())
      throw GatewayConfigError("no value for placeholder {{" + name + "}}");
    out += it->second;
    pos = close + 2;
  }
  return out;
}

inline PromptTemplate parse_template(std::string_view bytes) {
  Json j = Json::parse(bytes);
  PromptTemplate t;
  t.name = j.at("name").get<std::string>();
  std::string role = j.at("role").get<std::string>();
  if (role == "structure_predict")
    t.role = TemplateRole::StructurePredict;
  else if (role == "code_generate")
    t.role = TemplateRole::CodeGenerate;
  else if (role == "report_polish")
    t.role = TemplateRole::ReportPolish;
  else
    throw GatewayConfigError("unknown template role: " + role);
  std::string shot = j.value("shot_mode", "zero_shot");
  if (shot == "zero_shot")
    t.shot_mode = ShotMode::ZeroShot;
  else if (shot == "one_shot")
    t.shot_mode = ShotMode::OneShot;
  else
    throw GatewayConfigError("unknown shot_mode: " + shot);
  t.reasoning_directive = j.value("reasoning_directive", false);
  if (j.contains("placeholders"))
    for (const auto& p : j["placeholders"]) t.placeholders.push_back(p.get<std::string>());
  t.text = j.at("template").get<std::string>();
  t.demonstration_text = j.value("demonstration", "");
  validate_template(t);
  return t;
}

inline PromptTemplate load_template(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw GatewayConfigError("cannot read template: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_template(buf.str());
}

/// External-endpoint configuration. The credential is an environment
/// variable NAME; the secret itself is resolved at dispatch and never
/// serialized or logged.
struct GatewayConfig {
  std::string endpoint;        // http(s)://host[:port]/path — empty for mock
  std::string transport = "mock";  // mock | http
  std::string credential_env;
  std::string model;
  Decimal temperature;         // >= 0
  unsigned sample_count = 1;   // >= 1
  double timeout_seconds = 60.0;
  unsigned retry_budget = 2;
  unsigned max_inflight = 4;
  // mock settings
  std::string mock_fixture;                        // file whose content is every response
  std::vector<std::vector<std::string>> mock_script;  // scripted responses, consumed in order

  void validate() const {
    if (temperature < Decimal(0)) throw GatewayConfigError("temperature must be >= 0");
    if (sample_count < 1) throw GatewayConfigError("sample_count must be >= 1");
    if (transport != "mock" && transport != "http")
      throw GatewayConfigError("transport must be mock or http");
    if (transport == "http" && endpoint.empty())
      throw GatewayConfigError("http transport requires an endpoint");
  }
};

inline GatewayConfig parse_gateway_config(std::string_view bytes) {
  Json j = Json::parse(bytes);
  GatewayConfig c;
  c.endpoint = j.value("endpoint", "");
  c.transport = j.value("transport", c.endpoint.empty() ? "mock" : "http");
  c.credential_env = j.value("credential_env", "");
  c.model = j.value("model", "");
  if (j.contains("temperature")) {
    auto d = Decimal::parse(j["temperature"].is_string()
                                ? j["temperature"].get<std::string>()
                                : Json(j["temperature"]).dump());
    if (!d) throw GatewayConfigError("temperature must be a decimal");
    c.temperature = *d;
  }
  c.sample_count = j.value("sample_count", 1u);
  c.timeout_seconds = j.value("timeout_seconds", 60.0);
  c.retry_budget = j.value("retry_budget", 2u);
  c.max_inflight = j.value("max_inflight", 4u);
  c.mock_fixture = j.value("mock_fixture", "");
  if (j.contains("mock_script"))
    for (const auto& entry : j["mock_script"]) {
      std::vector<std::string> texts;
      if (entry.is_string())
        texts.push_back(entry.get<std::string>());
      else
        for (const auto& t : entry) texts.push_back(t.get<std::string>());
      c.mock_script.push_back(std::move(texts));
    }
  c.validate();
  return c;
}

inline GatewayConfig load_gateway_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw GatewayConfigError("cannot read gateway config: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_gateway_config(buf.str());
}

struct CompletionRequest {
  std::string request_id;
  std::string model;
  std::string prompt;
  Decimal temperature;
  unsigned n = 1;
  double timeout_seconds = 60.0;
};

struct CompletionResponse {
  std::vector<std::string> texts;
};

/// Single-attempt transport failure; the gateway retries within budget.
struct TransportFault : std::runtime_error {
  TransportFault(int status, const std::string& what)
      : std::runtime_error(what), status(status) {}
  int status;
};

/// Terminal transport failure after retry exhaustion.
struct TransportError : std::runtime_error {
  TransportError(int status, unsigned attempts, const std::string& what)
      : std::runtime_error("transport failed after " + std::to_string(attempts) +
                           " attempts (status " + std::to_string(status) + "): " + what),
        status(status),
        attempts(attempts) {}
  int status;
  unsigned attempts;
};

/// Model output that could not be parsed/validated; raw text retained
/// for audit.
struct MalformedOutputError : std::runtime_error {
  MalformedOutputError(const std::string& cause, std::string raw)
      : std::runtime_error("malformed model output: " + cause), raw_text(std::move(raw)) {}
  std::string raw_text;
};

class Transport {
public:
  virtual ~Transport() = default;
  virtual CompletionResponse send(const CompletionRequest& request) = 0;
};

/// Deterministic offline transport. Fixture mode returns one file's
/// content for every request (replicated to n candidates); script mode
/// consumes scripted responses in order (an entry of "<<fault>>"
/// simulates a transport failure). Safe under concurrency.
class MockTransport : public Transport {
public:
  explicit MockTransport(const GatewayConfig& config) {
    if (!config.mock_fixture.empty()) {
      std::ifstream in(config.mock_fixture, std::ios::binary);
      if (!in) throw GatewayConfigError("cannot read mock fixture: " + config.mock_fixture);
      std::ostringstream buf;
      buf << in.rdbuf();
      fixture_ = buf.str();
    }
    script_ = config.mock_script;
  }

  explicit MockTransport(std::string fixture_text) : fixture_(std::move(fixture_text)) {}
  explicit MockTransport(std::vector<std::vector<std::string>> script)
      : script_(std::move(script)) {}

  CompletionResponse send(const CompletionRequest& request) override {
    std::lock_guard<std::mutex> lock(mutex_);
    if (!script_.empty()) {
      if (cursor_ >= script_.size()) throw TransportFault(0, "mock script exhausted");
      std::vector<std::string> entry = script_[cursor_++];
      if (entry.size() == 1 && entry[0] == "<<fault>>")
        throw TransportFault(503, "scripted transport fault");
      CompletionResponse resp;
      for (unsigned i = 0; i < request.n; ++i)
        resp.texts.push_back(entry[i % entry.size()]);
      return resp;
    }
    if (fixture_) {
      CompletionResponse resp;
      for (unsigned i = 0; i < request.n; ++i) resp.texts.push_back(*fixture_);
      return resp;
    }
    throw TransportFault(0, "mock transport has neither fixture nor script");
  }

private:
  std::mutex mutex_;
  std::optional<std::string> fixture_;
  std::vector<std::vector<std::string>> script_;
  size_t cursor_ = 0;
};

/// Request/response audit log: line-delimited JSON records with
/// timestamps. Secret values are scrubbed before writing.
class AuditLog {
public:
  using Clock = std::function<std::string()>;

  AuditLog() = default;
  explicit AuditLog(std::string path, Clock clock = {})
      : path_(std::move(path)), clock_(std::move(clock)) {}

  void add_secret(const std::string& secret) {
    if (!secret.empty()) secrets_.push_back(secret);
  }

  void record(const std::string& request_id, const std::string& direction,
              const Json& payload) {
    if (path_.empty()) return;
    std::lock_guard<std::mutex> lock(mutex_);
    Json line;
    line["ts"] = clock_ ? clock_() : now_utc();
    line["request_id"] = request_id;
    line["direction"] = direction;
    line["payload"] = payload;
    std::ofstream out(path_, std::ios::binary | std::ios::app);
    out << scrub(line.dump()) << "\n";
  }

  static std::string now_utc() {
    std::time_t t = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
  }

private:
  std::string scrub(std::string text) const {
    for (const auto& secret : secrets_) {
      size_t pos = 0;
      while ((pos = text.find(secret, pos)) != std::string::npos) {
        text.replace(pos, secret.size(), "***");
        pos += 3;
      }
    }
    return text;
  }

  std::string path_;
  Clock clock_;
  std::vector<std::string> secrets_;
  std::mutex mutex_;
};

/// Bounded-concurrency client for the Structure Predictor and Code
/// Generator stages; transport-agnostic (model choice is configuration,
/// not code).
class Gateway {
public:
  Gateway(GatewayConfig config, std::shared_ptr<Transport> transport, AuditLog* log = nullptr)
      : config_(std::move(config)), transport_(std::move(transport)), log_(log) {
    config_.validate();
    if (log_ && !config_.credential_env.empty()) {
      if (const char* secret = std::getenv(config_.credential_env.c_str()))
        log_->add_secret(secret);
    }
  }

  const GatewayConfig& config() const { return config_; }

  /// Prediction of structure from regulation text. Model output is
  /// parsed through cu_parser; one reformat-retry with the error
  /// appended, then a structured failure. Never returns an unvalidated
  /// annotation.
  RegulationAnnotation request_structure(const std::string& regulation_text,
                                         const PromptTemplate& tmpl) {
    if (tmpl.role != TemplateRole::StructurePredict)
      throw GatewayConfigError("request_structure needs a structure_predict template, got " +
                               std::string(to_token(tmpl.role)));
    std::string prompt = render_prompt(tmpl, {{"regulation_text", regulation_text}});
    std::string raw = send_one(prompt);
    try {
      return parse_annotation(raw);
    } catch (const std::exception& first_error) {
      std::string retry_prompt = prompt +
                                 "\n\nThe previous output failed to parse: " + first_error.what() +
                                 "\nReturn only a valid interchange-format JSON object.";
      std::string retry_raw = send_one(retry_prompt);
      try {
        return parse_annotation(retry_raw);
      } catch (const std::exception& second_error) {
        throw MalformedOutputError(second_error.what(), retry_raw);
      }
    }
  }

  /// Code generation over a CU context; returns exactly sample_count
  /// raw candidates in order. Candidates are never validated here:
  /// syntactically invalid generations must reach scoring as failures.
  std::vector<std::string> request_codegen(const std::string& cu_context,
                                           const PromptTemplate& tmpl,
                                           const std::string& reasoning = {}) {
    if (tmpl.role != TemplateRole::CodeGenerate)
      throw GatewayConfigError("request_codegen needs a code_generate template, got " +
                               std::string(to_token(tmpl.role)));
    std::map<std::string, std::string> vars{{"cu_context", cu_context}};
    if (std::find(tmpl.placeholders.begin(), tmpl.placeholders.end(), "reasoning") !=
        tmpl.placeholders.end())
      vars["reasoning"] = reasoning;
    std::string prompt = render_prompt(tmpl, vars);
    CompletionResponse resp = dispatch(prompt, config_.sample_count);
    if (resp.texts.size() != config_.sample_count)
      throw TransportError(200, 1,
                           "endpoint returned " + std::to_string(resp.texts.size()) +
                               " candidates, expected " + std::to_string(config_.sample_count));
    return resp.texts;
  }

  /// Single-candidate polish pass used by the report renderer.
  std::string request_polish(const std::string& draft_report, const PromptTemplate& tmpl) {
    if (tmpl.role != TemplateRole::ReportPolish)
      throw GatewayConfigError("request_polish needs a report_polish template");
    std::string prompt = render_prompt(tmpl, {{"draft_report", draft_report}});
    return send_one(prompt);
  }

private:
  std::string send_one(const std::string& prompt) {
    CompletionResponse resp = dispatch(prompt, 1);
    if (resp.texts.empty()) throw TransportError(200, 1, "endpoint returned no candidates");
    return resp.texts[0];
  }

  CompletionResponse dispatch(const std::string& prompt, unsigned n) {
    CompletionRequest request;
    request.request_id = next_request_id();
    request.model = config_.model;
    request.prompt = prompt;
    request.temperature = config_.temperature;
    request.n = n;
    request.timeout_seconds = config_.timeout_seconds;

    InflightGuard guard(*this);
    if (log_)
      log_->record(request.request_id, "request",
                   Json{{"model", request.model},
                        {"prompt", request.prompt},
                        {"temperature", request.temperature.to_string()},
                        {"n", request.n}});
    unsigned attempts = 0;
    for (;;) {
      ++attempts;
      try {
        CompletionResponse resp = transport_->send(request);
        if (log_) log_->record(request.request_id, "response", Json{{"texts", resp.texts}});
        return resp;
      } catch (const TransportFault& fault) {
        if (log_)
          log_->record(request.request_id, "fault",
                       Json{{"status", fault.status}, {"error", fault.what()}});
        if (attempts > config_.retry_budget)
          throw TransportError(fault.status, attempts, fault.what());
      }
    }
  }

  std::string next_request_id() {
    std::lock_guard<std::mutex> lock(mutex_);
    return "r" + std::to_string(++request_counter_);
  }

  class InflightGuard {
  public:
    explicit InflightGuard(Gateway& g) : g_(g) {
      std::unique_lock<std::mutex> lock(g_.mutex_);
      g_.inflight_cv_.wait(lock, [&] { return g_.inflight_ < g_.config_.max_inflight; });
      ++g_.inflight_;
    }
    ~InflightGuard() {
      {
        std::lock_guard<std::mutex> lock(g_.mutex_);
        --g_.inflight_;
      }
      g_.inflight_cv_.notify_one();
    }

  private:
    Gateway& g_;
  };

  GatewayConfig config_;
  std::shared_ptr<Transport> transport_;
  AuditLog* log_;
  std::mutex mutex_;
  std::condition_variable inflight_cv_;
  unsigned inflight_ = 0;
  unsigned long request_counter_ = 0;
};

}  // namespace fincheck
