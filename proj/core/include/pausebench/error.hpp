#pragma once

#include <stdexcept>
#include <string>

namespace pausebench {

// Base for every error the toolkit throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input: vocab lines, config files, judge replies, dumps.
class ParseError : public Error {
 public:
  using Error::Error;
};

// A precondition on an argument was violated (bad target size, depth, window...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace pausebench
