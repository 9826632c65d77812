// include/apool/common.h

// Copyright 2026  APool Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef APOOL_COMMON_H_
#define APOOL_COMMON_H_

#include <sstream>
#include <stdexcept>
#include <string>

namespace apool {

// Bad user input: malformed files, inconsistent shapes, illegal configs.
// CLI maps this to exit code 1.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string &msg) : std::runtime_error(msg) {}
};

// Numerical breakdown: non-finite values, failed gradient checks.
// CLI maps this to exit code 2.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string &msg) : std::runtime_error(msg) {}
};

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitNumeric = 2;

namespace internal {

class ErrorStream {
 public:
  ErrorStream(const char *file, int line) {
    stream_ << file << ":" << line << ": ";
  }
  template <typename T>
  ErrorStream &operator<<(const T &v) {
    stream_ << v;
    return *this;
  }
  [[noreturn]] void ThrowValidation() { throw ValidationError(stream_.str()); }
  [[noreturn]] void ThrowNumeric() { throw NumericError(stream_.str()); }

 private:
  std::ostringstream stream_;
};

}  // namespace internal

void Warn(const std::string &msg);

}  // namespace apool

#define APOOL_ERR(msg_expr)                                          \
  do {                                                               \
    ::apool::internal::ErrorStream es__(__FILE__, __LINE__);         \
    es__ << msg_expr;                                                \
    es__.ThrowValidation();                                          \
  } while (0)

#define APOOL_NUMERIC_ERR(msg_expr)                                  \
  do {                                                               \
    ::apool::internal::ErrorStream es__(__FILE__, __LINE__);         \
    es__ << msg_expr;                                                \
    es__.ThrowNumeric();                                             \
  } while (0)

#define APOOL_ASSERT(cond)                                           \
  do {                                                               \
    if (!(cond)) APOOL_ERR("assertion failed: " #cond);              \
  } while (0)

#endif  // APOOL_COMMON_H_
