#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fibersem {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed expression, formula or model text. `offset` is a byte offset
/// into the parsed source (or a line number for model files, see `line`).
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset, std::size_t line = 0)
      : Error(what), offset_(offset), line_(line) {}
  std::size_t offset() const { return offset_; }
  std::size_t line() const { return line_; }

 private:
  std::size_t offset_;
  std::size_t line_;
};

class UndeclaredVariable : public ParseError {
 public:
  UndeclaredVariable(const std::string& name, std::size_t offset)
      : ParseError("undeclared variable '" + name + "'", offset), name_(name) {}
  const std::string& name() const { return name_; }

 private:
  std::string name_;
};

/// sqrt of a negative, division by zero or a non-finite result.
class DomainError : public Error {
 public:
  DomainError(const std::string& what, std::string subtree)
      : Error(what + " in '" + subtree + "'"), subtree_(std::move(subtree)) {}
  const std::string& subtree() const { return subtree_; }

 private:
  std::string subtree_;
};

class NonDifferentiable : public Error {
 public:
  using Error::Error;
};

/// A point outside a base box, section domain or map source.
class OutOfDomain : public Error {
 public:
  using Error::Error;
};

/// A smooth map whose sampled image leaves the target base box.
class ImageEscape : public Error {
 public:
  using Error::Error;
};

/// Parallel transport left the base box or the configured fiber box.
class TransportEscape : public Error {
 public:
  using Error::Error;
};

/// Nesting of neighborhood clauses exceeded the policy's depth budget.
class DepthExhausted : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

}  // namespace fibersem
