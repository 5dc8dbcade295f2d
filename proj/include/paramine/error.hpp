#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace paramine {

// Bad input supplied by the caller (maps to CLI exit code 2).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed file contents; carries the offending line when known.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(line ? what + " (line " + std::to_string(line) + ")"
                                : what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// A model or parser child process broke the JSON-lines protocol.
class ProtocolError : public std::runtime_error {
 public:
  ProtocolError(const std::string& what, std::string transcript)
      : std::runtime_error(what), transcript_(std::move(transcript)) {}

  const std::string& transcript() const noexcept { return transcript_; }

 private:
  std::string transcript_;
};

}  // namespace paramine
