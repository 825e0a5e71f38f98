#pragma once

#include <stdexcept>
#include <string>

namespace omnipd {

// Base of every error raised by the toolkit. The CLI maps these to exit code 1.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Caller passed an out-of-range or inconsistent argument.
class ArgumentError : public Error {
public:
  using Error::Error;
};

// Input text could not be parsed (XML, JSON). Carries the 1-based line when known.
class ParseError : public Error {
public:
  ParseError(const std::string& what, long line = 0);
  long line() const noexcept { return line_; }

private:
  long line_;
};

// Input parsed but violates the expected schema.
class SchemaError : public Error {
public:
  using Error::Error;
};

class LookupError : public Error {
public:
  using Error::Error;
};

class AssemblyError : public Error {
public:
  using Error::Error;
};

class IoError : public Error {
public:
  using Error::Error;
};

}  // namespace omnipd
