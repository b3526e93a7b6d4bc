// Copyright 2026 The medzs Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace medzs {

enum class ErrorCode {
  kDimension,
  kNormalization,
  kNonFinite,
  kEmptyDescriptor,
  kEmptyInput,
  kDecode,
  kBackend,
  kIntegrity,
  kIo,
  kParse,
  kSchema,
  kVersion,
  kTransport,
  kEmptyResponse,
  kInvalidArgument,
  kConfigMismatch,
  kManifestMismatch,
};

std::string_view to_string(ErrorCode code);

/// Base exception for every failure surfaced by the library. The code is
/// stable and maps one-to-one onto CLI exit statuses.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace medzs
