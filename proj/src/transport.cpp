#include "anchoragg/transport.hpp"

#include <csignal>
#include <thread>

#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

#include <httplib.h>

#include "anchoragg/types.hpp"

namespace anchoragg {

HttpTransport::HttpTransport(std::string url, std::chrono::milliseconds timeout)
    : timeout_(timeout) {
  const std::string scheme = "http://";
  if (url.rfind(scheme, 0) != 0) throw InputError("endpoint must start with http://: " + url);
  std::string rest = url.substr(scheme.size());
  const auto slash = rest.find('/');
  std::string authority = rest.substr(0, slash);
  path_ = slash == std::string::npos ? "/" : rest.substr(slash);
  const auto colon = authority.rfind(':');
  if (colon != std::string::npos) {
    host_ = authority.substr(0, colon);
    try {
      port_ = std::stoi(authority.substr(colon + 1));
    } catch (const std::exception&) {
      throw InputError("bad port in endpoint " + url);
    }
  } else {
    host_ = authority;
  }
  if (host_.empty()) throw InputError("missing host in endpoint " + url);
}

nlohmann::json HttpTransport::exchange(const nlohmann::json& request) {
  httplib::Client client(host_, port_);
  const auto secs = timeout_.count() / 1000;
  const auto usecs = (timeout_.count() % 1000) * 1000;
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  auto res = client.Post(path_, request.dump(), "application/json");
  if (!res) {
    throw RuntimeFailure("endpoint " + host_ + ":" + std::to_string(port_) + path_ +
                         " unreachable: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw RuntimeFailure("endpoint returned HTTP " + std::to_string(res->status));
  }
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::parse_error& e) {
    throw RuntimeFailure(std::string("malformed response: ") + e.what());
  }
}

SubprocessTransport::SubprocessTransport(const std::string& command,
                                         std::chrono::milliseconds timeout)
    : timeout_(timeout) {
  int in_pipe[2];
  int out_pipe[2];
  if (pipe(in_pipe) != 0 || pipe(out_pipe) != 0) throw RuntimeFailure("pipe() failed");
  pid_ = fork();
  if (pid_ < 0) throw RuntimeFailure("fork() failed");
  if (pid_ == 0) {
    setpgid(0, 0);
    dup2(in_pipe[0], STDIN_FILENO);
    dup2(out_pipe[1], STDOUT_FILENO);
    close(in_pipe[0]);
    close(in_pipe[1]);
    close(out_pipe[0]);
    close(out_pipe[1]);
    execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  setpgid(pid_, pid_);
  close(in_pipe[0]);
  close(out_pipe[1]);
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
  std::signal(SIGPIPE, SIG_IGN);
}

SubprocessTransport::~SubprocessTransport() {
  if (to_child_ >= 0) close(to_child_);
  if (from_child_ >= 0) close(from_child_);
  if (pid_ > 0) {
    // Closed stdin is the shutdown request; the process group is terminated
    // if the child is still running after a short grace period.
    int status = 0;
    for (int i = 0; i < 20; ++i) {
      if (waitpid(pid_, &status, WNOHANG) != 0) return;
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    kill(-pid_, SIGTERM);
    waitpid(pid_, &status, 0);
  }
}

std::string SubprocessTransport::read_line() {
  for (;;) {
    if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    pollfd pfd{from_child_, POLLIN, 0};
    const int ready = poll(&pfd, 1, static_cast<int>(timeout_.count()));
    if (ready == 0) throw RuntimeFailure("subprocess timed out");
    if (ready < 0) throw RuntimeFailure("poll() failed");
    char chunk[4096];
    const auto n = read(from_child_, chunk, sizeof chunk);
    if (n <= 0) throw RuntimeFailure("subprocess closed its output");
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

nlohmann::json SubprocessTransport::exchange(const nlohmann::json& request) {
  std::lock_guard lock(mutex_);
  std::string line = request.dump();
  line.push_back('\n');
  std::size_t off = 0;
  while (off < line.size()) {
    const auto n = write(to_child_, line.data() + off, line.size() - off);
    if (n <= 0) throw RuntimeFailure("subprocess closed its input");
    off += static_cast<std::size_t>(n);
  }
  const std::string reply = read_line();
  try {
    return nlohmann::json::parse(reply);
  } catch (const nlohmann::json::parse_error& e) {
    throw RuntimeFailure(std::string("malformed response: ") + e.what());
  }
}

std::unique_ptr<JsonTransport> make_transport(const std::string& endpoint,
                                              std::chrono::milliseconds timeout) {
  if (endpoint.rfind("http://", 0) == 0) return std::make_unique<HttpTransport>(endpoint, timeout);
  if (endpoint.rfind("cmd:", 0) == 0) {
    return std::make_unique<SubprocessTransport>(endpoint.substr(4), timeout);
  }
  throw InputError("endpoint must be http://... or cmd:<command>: " + endpoint);
}

}  // namespace anchoragg
