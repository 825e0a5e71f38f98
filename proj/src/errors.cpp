#include "omnipd/errors.hpp"

namespace omnipd {

namespace {
std::string with_line(const std::string& what, long line) {
  if (line <= 0) return what;
  return "line " + std::to_string(line) + ": " + what;
}
}  // namespace

ParseError::ParseError(const std::string& what, long line)
    : Error(with_line(what, line)), line_(line) {}

}  // namespace omnipd
