#pragma once

// Child process speaking newline-delimited JSON over its standard streams.
// Requests carry an "id"; responses may come back in any order and each id
// must be answered exactly once.

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include <cerrno>
#include <cstring>
#include <map>
#include <string>
#include <vector>

#include "paramine/error.hpp"

namespace paramine::process {

class JsonLinesProcess {
 public:
  explicit JsonLinesProcess(std::vector<std::string> argv) : argv_(std::move(argv)) {
    if (argv_.empty()) throw InvalidArgument("empty command");
    start();
  }

  JsonLinesProcess(const JsonLinesProcess&) = delete;
  JsonLinesProcess& operator=(const JsonLinesProcess&) = delete;

  ~JsonLinesProcess() { stop(); }

  // Sends every request and waits until each id has one response. Throws
  // ProtocolError (with the exchange transcript) on malformed output,
  // duplicate or unknown ids, error responses, or EOF before completion.
  std::map<std::string, nlohmann::json> exchange(const std::vector<nlohmann::json>& requests) {
    transcript_.clear();
    std::string outgoing;
    std::map<std::string, bool> pending;
    for (const auto& r : requests) {
      const std::string id = r.at("id").get<std::string>();
      if (!pending.emplace(id, false).second) throw InvalidArgument("duplicate request id " + id);
      const auto line = r.dump();
      record("> " + line);
      outgoing += line;
      outgoing += '\n';
    }
    std::map<std::string, nlohmann::json> responses;
    std::size_t written = 0;
    while (responses.size() < pending.size()) {
      pollfd fds[2];
      nfds_t nfds = 0;
      fds[nfds++] = {from_child_, POLLIN, 0};
      if (written < outgoing.size()) fds[nfds++] = {to_child_, POLLOUT, 0};
      if (::poll(fds, nfds, -1) < 0) {
        if (errno == EINTR) continue;
        fail("poll failed: " + std::string(std::strerror(errno)));
      }
      if (nfds == 2 && (fds[1].revents & (POLLOUT | POLLERR | POLLHUP))) {
        const auto n = ::write(to_child_, outgoing.data() + written, outgoing.size() - written);
        if (n < 0 && errno != EAGAIN && errno != EINTR) fail("child closed its input");
        if (n > 0) written += static_cast<std::size_t>(n);
      }
      if (fds[0].revents & (POLLIN | POLLHUP | POLLERR)) {
        char buf[65536];
        const auto n = ::read(from_child_, buf, sizeof(buf));
        if (n < 0) {
          if (errno == EINTR || errno == EAGAIN) continue;
          fail("read failed: " + std::string(std::strerror(errno)));
        }
        if (n == 0) fail("child closed its output before answering every request");
        buffer_.append(buf, static_cast<std::size_t>(n));
        std::size_t nl;
        while ((nl = buffer_.find('\n')) != std::string::npos) {
          std::string line = buffer_.substr(0, nl);
          buffer_.erase(0, nl + 1);
          if (line.empty()) continue;
          record("< " + line);
          nlohmann::json j;
          try {
            j = nlohmann::json::parse(line);
          } catch (const nlohmann::json::exception&) {
            fail("malformed response line");
          }
          if (!j.is_object() || !j.contains("id") || !j["id"].is_string()) fail("response without string id");
          const auto id = j["id"].get<std::string>();
          auto it = pending.find(id);
          if (it == pending.end()) fail("response for unknown id " + id);
          if (it->second) fail("duplicate response for id " + id);
          if (j.contains("error")) fail("child reported error for id " + id + ": " + j["error"].dump());
          it->second = true;
          responses.emplace(id, std::move(j));
        }
      }
    }
    return responses;
  }

  const std::string& transcript() const { return transcript_; }

 private:
  void start() {
    int in_pipe[2], out_pipe[2];
    if (::pipe(in_pipe) != 0 || ::pipe(out_pipe) != 0) throw std::runtime_error("pipe failed");
    pid_ = ::fork();
    if (pid_ < 0) throw std::runtime_error("fork failed");
    if (pid_ == 0) {
      ::dup2(in_pipe[0], STDIN_FILENO);
      ::dup2(out_pipe[1], STDOUT_FILENO);
      ::close(in_pipe[0]);
      ::close(in_pipe[1]);
      ::close(out_pipe[0]);
      ::close(out_pipe[1]);
      std::vector<char*> args;
      for (auto& a : argv_) args.push_back(a.data());
      args.push_back(nullptr);
      ::execvp(args[0], args.data());
      ::_exit(127);
    }
    ::close(in_pipe[0]);
    ::close(out_pipe[1]);
    to_child_ = in_pipe[1];
    from_child_ = out_pipe[0];
    ::fcntl(to_child_, F_SETFL, ::fcntl(to_child_, F_GETFL) | O_NONBLOCK);
    ::signal(SIGPIPE, SIG_IGN);
  }

  void stop() {
    if (to_child_ >= 0) ::close(to_child_);
    if (from_child_ >= 0) ::close(from_child_);
    to_child_ = from_child_ = -1;
    if (pid_ > 0) {
      int status = 0;
      for (int i = 0; i < 50; ++i) {
        if (::waitpid(pid_, &status, WNOHANG) != 0) {
          pid_ = -1;
          return;
        }
        ::usleep(10000);
      }
      ::kill(pid_, SIGTERM);
      ::waitpid(pid_, &status, 0);
      pid_ = -1;
    }
  }

  void record(const std::string& line) {
    if (transcript_.size() < (1u << 20)) {
      transcript_ += line;
      transcript_ += '\n';
    }
  }

  [[noreturn]] void fail(const std::string& why) { throw ProtocolError(why, transcript_); }

  std::vector<std::string> argv_;
  pid_t pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
  std::string transcript_;
};

}  // namespace paramine::process
