// Copyright 2026 The Phrasecl Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace phrasecl {

// Base of every error the library raises. category() is what the CLI prints
// in front of the message.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* category() const noexcept { return "Error"; }
};

#define PHRASECL_DEFINE_ERROR(Name)                                   \
  class Name : public Error {                                         \
   public:                                                            \
    using Error::Error;                                               \
    const char* category() const noexcept override { return #Name; } \
  };

// Malformed input file.
PHRASECL_DEFINE_ERROR(FormatError)
// Well-formed input that violates a data invariant.
PHRASECL_DEFINE_ERROR(ValidationError)
// NaN/Inf in a forward pass or gradient.
PHRASECL_DEFINE_ERROR(NumericalError)
// Hyperparameter out of its legal range.
PHRASECL_DEFINE_ERROR(ParameterError)
// Token or position id out of range.
PHRASECL_DEFINE_ERROR(IndexError)
PHRASECL_DEFINE_ERROR(EmptyCorpusError)
// Short form missing from the dictionary.
PHRASECL_DEFINE_ERROR(LookupError)

#undef PHRASECL_DEFINE_ERROR

}  // namespace phrasecl
