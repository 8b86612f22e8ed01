#pragma once

#include <stdexcept>
#include <string>

namespace qparity {

/// Base of every error raised by the library. The category decides the CLI exit code.
class Error : public std::runtime_error {
 public:
  enum class Category { config, numerical, truncation };

  Error(Category category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  Category category() const noexcept { return category_; }

 private:
  Category category_;
};

/// Argument outside its mathematical domain (eta > 1, negative occupation, pole in a series).
class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error(Category::config, what) {}
};

/// Requested Fock dimension cannot hold the state.
class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& what) : Error(Category::truncation, what) {}
};

/// Population leaks past the dimension cap.
class TruncationError : public Error {
 public:
  explicit TruncationError(const std::string& what) : Error(Category::truncation, what) {}
};

/// Phase-space window too small for the distribution it has to hold.
class WindowError : public Error {
 public:
  explicit WindowError(const std::string& what) : Error(Category::truncation, what) {}
};

/// Closed-form threshold requested outside the regime where it exists.
class RegimeError : public Error {
 public:
  explicit RegimeError(const std::string& what) : Error(Category::config, what) {}
};

/// Invalid solver setup (CFL violation, non-uniform sampling, bad grid).
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(Category::config, what) {}
};

/// A consistency check on a computed quantity failed (imaginary residue, trace drift).
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error(Category::numerical, what) {}
};

}  // namespace qparity
