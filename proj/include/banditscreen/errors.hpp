#pragma once

#include <stdexcept>
#include <string>

namespace banditscreen {

// Dimension disagreement between operands (bad batch shapes, wrong input width).
class ShapeError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Non-finite values or failed numeric iteration.
class NumericError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// A caller violated a documented precondition.
class ContractError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Malformed input files or configuration.
class ParseError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Filesystem failures, reported with path context.
class IoError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

}  // namespace banditscreen
