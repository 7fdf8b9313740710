#pragma once

#include <stdexcept>
#include <string>

namespace drc {

/// Base class for every domain error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: wrong block counts, bad parameters, unknown ids.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// The erased nodes leave too little information to rebuild the data.
class Unrecoverable : public Error {
 public:
  using Error::Error;
};

/// Surviving blocks contradict each other or the parity relations.
class Inconsistent : public Error {
 public:
  using Error::Error;
};

class ChecksumMismatch : public Error {
 public:
  using Error::Error;
};

class MissingBlock : public Error {
 public:
  using Error::Error;
};

/// More tasks than slots in a single scheduling wave.
class Overload : public Error {
 public:
  using Error::Error;
};

class StoreError : public Error {
 public:
  using Error::Error;
};

}  // namespace drc
