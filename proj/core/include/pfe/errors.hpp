#ifndef PFE_ERRORS_HPP
#define PFE_ERRORS_HPP

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace pfe {

// Two inputs that must agree on a dimension (embedding length, tensor shape)
// do not.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// An embedding or argument violates a documented invariant (non-finite value,
// variance below the floor, non-positive quality weight, ...). what() lists
// every violation found, not just the first.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// An operation that needs at least one element got none.
class EmptySetError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Training-mode batch statistics need at least two rows.
class BatchTooSmallError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// The corpus cannot supply the requested subjects-per-batch x images-per-subject.
class CorpusTooSmallError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Bad key or value in a run configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Training produced a non-finite loss; step() is the step index that failed.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::size_t step, const std::string& what)
      : std::runtime_error(what), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

// Malformed serialized data; offset() is the byte offset where parsing failed.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::uint64_t offset, const std::string& what)
      : std::runtime_error(what + " (at byte offset " + std::to_string(offset) +
                           ")"),
        offset_(offset) {}
  std::uint64_t offset() const { return offset_; }

 private:
  std::uint64_t offset_;
};

}  // namespace pfe

#endif  // PFE_ERRORS_HPP
