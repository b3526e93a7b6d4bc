// Copyright 2026 The medzs Authors
// SPDX-License-Identifier: Apache-2.0

#include "medzs/error.hpp"

namespace medzs {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDimension: return "dimension";
    case ErrorCode::kNormalization: return "normalization";
    case ErrorCode::kNonFinite: return "non-finite";
    case ErrorCode::kEmptyDescriptor: return "empty-descriptor";
    case ErrorCode::kEmptyInput: return "empty-input";
    case ErrorCode::kDecode: return "decode";
    case ErrorCode::kBackend: return "backend";
    case ErrorCode::kIntegrity: return "integrity";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kSchema: return "schema";
    case ErrorCode::kVersion: return "version";
    case ErrorCode::kTransport: return "transport";
    case ErrorCode::kEmptyResponse: return "empty-response";
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kConfigMismatch: return "config-mismatch";
    case ErrorCode::kManifestMismatch: return "manifest-mismatch";
  }
  return "unknown";
}

}  // namespace medzs
