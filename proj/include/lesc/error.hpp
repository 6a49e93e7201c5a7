#pragma once

#include <stdexcept>
#include <string>

namespace lesc {

// Base for every failure the library reports. Callers that only care about
// "did it work" catch this; the CLI turns it into a one-line JSON diagnostic.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class VocabularyError : public Error {
 public:
  using Error::Error;
};

// Raised when optimization produces non-finite values or diverges.
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace lesc
