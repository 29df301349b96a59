#pragma once

#include <stdexcept>
#include <string>

namespace moji {

/// Bad or unreadable input data (malformed records, file format violations).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Numerical failure during optimization (non-finite loss or gradients).
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InsufficientClassCount : DataError {
  int class_index;
  std::size_t have;
  std::size_t need;
  InsufficientClassCount(int cls, std::size_t h, std::size_t n)
      : DataError("class " + std::to_string(cls) + " has " + std::to_string(h) +
                  " examples, needs " + std::to_string(n)),
        class_index(cls), have(h), need(n) {}
};

struct EmptyClass : DataError {
  int class_index;
  explicit EmptyClass(int cls)
      : DataError("class " + std::to_string(cls) + " has no examples"), class_index(cls) {}
};

struct TooFewRaters : DataError {
  std::string record_id;
  explicit TooFewRaters(const std::string& id)
      : DataError("record " + id + " has fewer than the required ratings"), record_id(id) {}
};

struct IndexOutOfVocab : DataError {
  explicit IndexOutOfVocab(int index, int vocab_size)
      : DataError("token index " + std::to_string(index) + " outside vocabulary of size " +
                  std::to_string(vocab_size)) {}
};

struct ShapeMismatch : std::logic_error {
  using std::logic_error::logic_error;
};

struct AllTimestepsMasked : DataError {
  AllTimestepsMasked() : DataError("attention input has no unmasked timesteps") {}
};

struct ConstantColumn : DataError {
  int class_index;
  explicit ConstantColumn(int cls)
      : DataError("prediction column for class " + std::to_string(cls) +
                  " is constant; correlation undefined"),
        class_index(cls) {}
};

struct VocabMismatch : DataError {
  using DataError::DataError;
};

struct NonFiniteGradient : NumericError {
  NonFiniteGradient() : NumericError("non-finite gradient encountered") {}
};

struct NonFiniteLoss : NumericError {
  explicit NonFiniteLoss(const std::string& diag)
      : NumericError("non-finite loss: " + diag) {}
};

}  // namespace moji
