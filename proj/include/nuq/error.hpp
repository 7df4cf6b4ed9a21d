// Copyright 2026 The nuq Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace nuq {

enum class ErrorKind {
  Validation,
  Parse,
  Range,
  DimensionMismatch,
  Io,
  Infeasible,
  Verification,
};

const char* to_string(ErrorKind kind) noexcept;

// Base of every exception thrown by the library. The kind drives the C API
// status code and the CLI exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what)
      : Error(ErrorKind::Validation, what) {}
};

class ParseError : public Error {
 public:
  explicit ParseError(const std::string& what) : Error(ErrorKind::Parse, what) {}
};

class RangeError : public Error {
 public:
  explicit RangeError(const std::string& what) : Error(ErrorKind::Range, what) {}
};

class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& what)
      : Error(ErrorKind::DimensionMismatch, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::Io, what) {}
};

class InfeasibleError : public Error {
 public:
  explicit InfeasibleError(const std::string& what)
      : Error(ErrorKind::Infeasible, what) {}
};

class VerificationError : public Error {
 public:
  explicit VerificationError(const std::string& what)
      : Error(ErrorKind::Verification, what) {}
};

}  // namespace nuq
