// Copyright 2026 The Shepherd Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SHEPHERD_ERRORS_HPP_
#define SHEPHERD_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace shepherd {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input to a numeric kernel (probability outside [0,1], log of a
// non-positive number, division by zero).
class DomainError : public Error {
 public:
  using Error::Error;
};

// A solve or a training run produced an unusable result.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// A caller broke an operation's contract (e.g. a payout vector that does not
// conserve the grown pool).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Invalid or mutually incompatible configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// File-system or (de)serialization failure.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace shepherd

#endif  // SHEPHERD_ERRORS_HPP_
