#pragma once

#include <chrono>
#include <memory>
#include <mutex>
#include <string>

#include <json.hpp>

namespace anchoragg {

/// One synchronous JSON request/response exchange with an external service.
/// Failures throw RuntimeFailure; there are no retries.
class JsonTransport {
 public:
  virtual ~JsonTransport() = default;
  virtual nlohmann::json exchange(const nlohmann::json& request) = 0;
  /// Whether exchange() may be called from several threads at once.
  virtual bool concurrent() const { return false; }
};

/// POSTs each request as a JSON body to `url` (http://host:port/path).
class HttpTransport final : public JsonTransport {
 public:
  HttpTransport(std::string url, std::chrono::milliseconds timeout);
  nlohmann::json exchange(const nlohmann::json& request) override;
  bool concurrent() const override { return true; }

 private:
  std::string host_;
  int port_ = 80;
  std::string path_;
  std::chrono::milliseconds timeout_;
};

/// Spawns `command` via /bin/sh and speaks line-delimited JSON over its
/// stdin/stdout: one request line, one response line.
class SubprocessTransport final : public JsonTransport {
 public:
  SubprocessTransport(const std::string& command, std::chrono::milliseconds timeout);
  ~SubprocessTransport() override;
  SubprocessTransport(const SubprocessTransport&) = delete;
  SubprocessTransport& operator=(const SubprocessTransport&) = delete;

  nlohmann::json exchange(const nlohmann::json& request) override;

 private:
  std::string read_line();

  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
  std::chrono::milliseconds timeout_;
  std::mutex mutex_;
};

/// "http://..." selects HttpTransport, "cmd:<shell command>" a subprocess.
std::unique_ptr<JsonTransport> make_transport(const std::string& endpoint,
                                              std::chrono::milliseconds timeout);

}  // namespace anchoragg
