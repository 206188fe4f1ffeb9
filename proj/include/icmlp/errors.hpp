#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace icmlp {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parameter arrays disagree with the declared widths or input dimension.
class StructuralError : public Error {
 public:
  using Error::Error;
};

/// A non-finite value appeared during evaluation.
class NumericOverflowError : public Error {
 public:
  NumericOverflowError(std::size_t layer, const std::string& what)
      : Error(what), layer_(layer) {}
  /// 1-based hidden layer index; depth + 1 denotes the output neuron.
  std::size_t layer() const noexcept { return layer_; }

 private:
  std::size_t layer_;
};

class UnsupportedCompositionError : public Error {
 public:
  using Error::Error;
};

/// strip_to_standard() found direct input connections beyond the first layer.
class NotStandardMlpError : public Error {
 public:
  NotStandardMlpError(std::vector<std::pair<std::size_t, std::size_t>> offending,
                      bool output_skip, const std::string& what)
      : Error(what), offending_(std::move(offending)), output_skip_(output_skip) {}
  /// (layer, neuron) pairs, both 1-based.
  const std::vector<std::pair<std::size_t, std::size_t>>& offending() const noexcept {
    return offending_;
  }
  bool output_skip() const noexcept { return output_skip_; }

 private:
  std::vector<std::pair<std::size_t, std::size_t>> offending_;
  bool output_skip_;
};

class CurvatureNotFoundError : public Error {
 public:
  using Error::Error;
};

class StageBudgetExceededError : public Error {
 public:
  StageBudgetExceededError(double measured, double budget, const std::string& what)
      : Error(what), measured_(measured), budget_(budget) {}
  double measured() const noexcept { return measured_; }
  double budget() const noexcept { return budget_; }

 private:
  double measured_;
  double budget_;
};

/// The sampled range of an inner network exceeds the radius of a square approximator.
class RangeOverflowError : public Error {
 public:
  RangeOverflowError(double required, double available, const std::string& what)
      : Error(what), required_(required), available_(available) {}
  double required() const noexcept { return required_; }
  double available() const noexcept { return available_; }

 private:
  double required_;
  double available_;
};

/// Raised when an affine activation is asked to approximate a target.
class NonlinearityRequiredError : public Error {
 public:
  using Error::Error;
};

class UnsupportedActivationError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  DivergenceError(std::size_t step, const std::string& what) : Error(what), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

/// Failure while reading a model, dataset or table; carries the offending location.
class LoadError : public Error {
 public:
  LoadError(std::string where, const std::string& what)
      : Error(where.empty() ? what : where + ": " + what), where_(std::move(where)) {}
  const std::string& where() const noexcept { return where_; }

 private:
  std::string where_;
};

}  // namespace icmlp
