#ifndef FAUN_ERRORS_HPP_
#define FAUN_ERRORS_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace faun {

/// Bad dimensions, out-of-range parameters, violated preconditions.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Ranks disagreed inside a collective (lengths, grid shape, ...).
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown on every surviving rank when a peer rank failed and the
/// communicator was torn down.
class CommAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& path, std::size_t line, const std::string& what)
      : std::runtime_error(path + ":" + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace faun

#endif  // FAUN_ERRORS_HPP_
