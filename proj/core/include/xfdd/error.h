/*
 * Copyright 2026 The xfdd Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef XFDD_ERROR_H_
#define XFDD_ERROR_H_

#include <stdexcept>
#include <string>

namespace xfdd {

// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Incompatible tensor shapes or dimensions.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Out-of-domain argument (negative rate, empty set, unknown name, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// NaN/Inf encountered where finite values are required.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Malformed or truncated persisted artifact.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Filesystem failure.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace xfdd

#endif  // XFDD_ERROR_H_
