#pragma once

#include <stdexcept>
#include <string>

namespace lcam {

enum class Errc {
  invalid_argument = 1,
  not_found,
  io,
  corrupt,
  version_mismatch,
  digest_mismatch,
  diverged,
};

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const { return code_; }

 private:
  Errc code_;
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what) : Error(Errc::invalid_argument, what) {}
};

}  // namespace lcam
