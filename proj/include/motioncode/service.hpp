#pragma once

// Annotation service: clip manifest, append-only JSONL store and the HTTP
// handlers the annotation front end talks to.

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "motioncode/error.hpp"
#include "motioncode/taxonomy.hpp"
#include "motioncode/tree.hpp"

namespace motioncode {

struct Clip {
  std::string id;
  std::string uri;
  std::optional<std::string> noun;
  std::optional<std::string> verb;
};

/// {"clips": [{"id", "uri", "noun"?, "verb"?}, ...]}
class Manifest {
 public:
  Manifest() = default;
  explicit Manifest(std::vector<Clip> clips) : clips_(std::move(clips)) {
    for (std::size_t i = 0; i < clips_.size(); ++i) {
      if (!index_.emplace(clips_[i].id, i).second) throw Error(ErrorKind::DuplicateId, clips_[i].id);
    }
  }

  static Manifest from_json(const nlohmann::json& j) {
    try {
      std::vector<Clip> clips;
      for (const auto& c : j.at("clips")) {
        Clip clip{c.at("id").get<std::string>(), c.value("uri", std::string{}), std::nullopt, std::nullopt};
        if (c.contains("noun") && !c["noun"].is_null()) clip.noun = c["noun"].get<std::string>();
        if (c.contains("verb") && !c["verb"].is_null()) clip.verb = c["verb"].get<std::string>();
        clips.push_back(std::move(clip));
      }
      return Manifest(std::move(clips));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::ParseError, std::string("manifest: ") + e.what());
    }
  }

  static Manifest load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
    try {
      return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorKind::ParseError, std::string("manifest: ") + e.what());
    }
  }

  const std::vector<Clip>& clips() const { return clips_; }
  const Clip* find(const std::string& id) const {
    const auto it = index_.find(id);
    return it == index_.end() ? nullptr : &clips_[it->second];
  }

 private:
  std::vector<Clip> clips_;
  std::map<std::string, std::size_t> index_;
};

struct Annotation {
  std::string clip_id;
  MotionCode code;
  std::string annotator;

  nlohmann::json to_json() const {
    return {{"clip_id", clip_id}, {"code", format_code(code)}, {"annotator", annotator}};
  }
};

enum class SubmitResult { Created, Duplicate };

/// One JSON object per line. Later lines for a clip supersede earlier ones.
/// Writers are serialized; readers take an immutable snapshot without locking.
class AnnotationStore {
 public:
  using Snapshot = std::map<std::string, Annotation>;

  /// Replays `path` if it exists. A final unterminated line that fails to
  /// parse is treated as a torn write and dropped.
  explicit AnnotationStore(std::filesystem::path path) : path_(std::move(path)) {
    auto snap = std::make_shared<Snapshot>();
    std::ifstream in(path_, std::ios::binary);
    if (in) {
      const std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
      std::size_t pos = 0;
      std::size_t line = 0;
      while (pos < content.size()) {
        ++line;
        const std::size_t start = pos;
        const auto end = content.find('\n', pos);
        const bool terminated = end != std::string::npos;
        const std::string text = content.substr(pos, terminated ? end - pos : std::string::npos);
        pos = terminated ? end + 1 : content.size();
        if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
          const auto j = nlohmann::json::parse(text);
          Annotation a{j.at("clip_id").get<std::string>(), parse_code(j.at("code").get<std::string>()),
                       j.value("annotator", std::string{})};
          (*snap)[a.clip_id] = std::move(a);
        } catch (const std::exception& e) {
          if (!terminated) {
            torn_tail_ = true;
            torn_offset_ = start;
            break;
          }
          throw Error(ErrorKind::ParseError, std::string("annotation store: ") + e.what(), line);
        }
      }
    }
    std::atomic_store(&snapshot_, std::shared_ptr<const Snapshot>(std::move(snap)));
  }

  std::shared_ptr<const Snapshot> snapshot() const { return std::atomic_load(&snapshot_); }

  SubmitResult submit(const Annotation& a, bool overwrite) {
    std::lock_guard lock(write_mutex_);
    const auto current = snapshot();
    if (current->contains(a.clip_id) && !overwrite) return SubmitResult::Duplicate;
    if (torn_tail_) {
      // drop the partial record left by an interrupted write
      std::filesystem::resize_file(path_, torn_offset_);
      torn_tail_ = false;
    }
    {
      std::ofstream out(path_, std::ios::binary | std::ios::app);
      if (!out) throw Error(ErrorKind::Io, "cannot append to " + path_.string());
      out << a.to_json().dump() << '\n';
      out.flush();
      if (!out) throw Error(ErrorKind::Io, "write failed on " + path_.string());
    }
    auto next = std::make_shared<Snapshot>(*current);
    (*next)[a.clip_id] = a;
    std::atomic_store(&snapshot_, std::shared_ptr<const Snapshot>(std::move(next)));
    return SubmitResult::Created;
  }

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::shared_ptr<const Snapshot> snapshot_;
  std::mutex write_mutex_;
  bool torn_tail_ = false;
  std::uintmax_t torn_offset_ = 0;
};

struct HttpResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

/// Transport-independent request handling. Thread-safe.
class AnnotationService {
 public:
  AnnotationService(Manifest manifest, std::filesystem::path store_path)
      : manifest_(std::move(manifest)), store_(std::move(store_path)), taxonomy_(taxonomy_tree().dump()) {}

  HttpResponse taxonomy() const { return {200, "application/json", taxonomy_}; }

  HttpResponse manifest() const {
    const auto snap = store_.snapshot();
    nlohmann::json clips = nlohmann::json::array();
    for (const auto& c : manifest_.clips()) {
      nlohmann::json j{{"id", c.id}, {"uri", c.uri}, {"annotated", snap->contains(c.id)}};
      if (c.noun) j["noun"] = *c.noun;
      if (c.verb) j["verb"] = *c.verb;
      clips.push_back(std::move(j));
    }
    return ok({{"clips", clips}});
  }

  HttpResponse verbs(const std::optional<std::string>& code_text) const {
    if (!code_text) return error(400, ErrorKind::InvalidCode, "missing 'code' parameter");
    const auto code = try_parse_code(*code_text);
    if (!code) return error(400, ErrorKind::InvalidCode, "not a valid motion code: " + *code_text);
    return ok({{"code", format_code(*code)}, {"verbs", verbs_for_code(*code)}});
  }

  HttpResponse post_annotation(const std::string& body, bool overwrite) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error& e) {
      return error(400, ErrorKind::ParseError, e.what());
    }
    if (!j.is_object() || !j.contains("clip_id") || !j["clip_id"].is_string()) {
      return error(400, ErrorKind::ParseError, "body needs a string 'clip_id'");
    }
    if (!j.contains("code") || !j["code"].is_string()) {
      return error(400, ErrorKind::InvalidCode, "body needs a string 'code'");
    }
    MotionCode code;
    try {
      code = parse_code(j["code"].get<std::string>());
    } catch (const Error& e) {
      return error(400, ErrorKind::InvalidCode, e.what());
    }
    const auto clip_id = j["clip_id"].get<std::string>();
    if (!manifest_.find(clip_id)) return error(404, ErrorKind::UnknownClip, "no clip '" + clip_id + "'");
    std::string annotator;
    if (j.contains("annotator") && j["annotator"].is_string()) annotator = j["annotator"].get<std::string>();
    const Annotation a{clip_id, code, annotator};
    if (store_.submit(a, overwrite) == SubmitResult::Duplicate) {
      return error(409, ErrorKind::DuplicateAnnotation, "clip '" + clip_id + "' is already annotated");
    }
    return {201, "application/json", a.to_json().dump()};
  }

  /// Dataset records without features, in manifest order.
  HttpResponse export_jsonl() const {
    const auto snap = store_.snapshot();
    std::string out;
    for (const auto& c : manifest_.clips()) {
      const auto it = snap->find(c.id);
      if (it == snap->end()) continue;
      const nlohmann::json record{{"id", c.id},
                                  {"verb", c.verb.value_or("")},
                                  {"noun", c.noun.value_or("")},
                                  {"code", format_code(it->second.code)}};
      out += record.dump();
      out += '\n';
    }
    return {200, "application/x-ndjson", std::move(out)};
  }

  /// Routes a request; used by the HTTP binding and by tests.
  HttpResponse handle(const std::string& method, const std::string& path,
                      const std::map<std::string, std::string>& query, const std::string& body) {
    auto param = [&](const char* key) -> std::optional<std::string> {
      const auto it = query.find(key);
      return it == query.end() ? std::nullopt : std::optional(it->second);
    };
    if (method == "GET" && path == "/api/taxonomy") return taxonomy();
    if (method == "GET" && path == "/api/manifest") return manifest();
    if (method == "GET" && path == "/api/verbs") return verbs(param("code"));
    if (path == "/api/annotations") {
      if (method == "POST") return post_annotation(body, param("overwrite").value_or("false") == "true");
      if (method == "GET") {
        const auto format = param("format").value_or("jsonl");
        if (format != "jsonl") return error(400, "UnsupportedFormat", "only format=jsonl is supported");
        return export_jsonl();
      }
    }
    return error(404, "NotFound", method + " " + path);
  }

  const AnnotationStore& store() const { return store_; }
  const Manifest& clips() const { return manifest_; }

 private:
  static HttpResponse ok(const nlohmann::json& j) { return {200, "application/json", j.dump()}; }

  static HttpResponse error(int status, const std::string& kind, const std::string& message) {
    return {status, "application/json", nlohmann::json{{"error", kind}, {"message", message}}.dump()};
  }
  static HttpResponse error(int status, ErrorKind kind, const std::string& message) {
    return error(status, std::string(to_string(kind)), message);
  }

  Manifest manifest_;
  AnnotationStore store_;
  std::string taxonomy_;
};

}  // namespace motioncode
