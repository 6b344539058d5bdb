#include "sepkit/common.hpp"

#include <cstdio>

#ifdef __GLIBC__
#include <malloc.h>
#endif

#include <mutex>

namespace sepkit {

void keep_large_allocations() {
#ifdef __GLIBC__
  static std::once_flag once;
  std::call_once(once, [] {
    mallopt(M_MMAP_THRESHOLD, 256 << 20);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
    mallopt(M_TOP_PAD, 64 << 20);
  });
#endif
}


std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InputTooShort: return "InputTooShort";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::DegenerateSource: return "DegenerateSource";
    case ErrorCode::SplitViolation: return "SplitViolation";
    case ErrorCode::ContractViolation: return "ContractViolation";
    case ErrorCode::UnsupportedSourceCount: return "UnsupportedSourceCount";
    case ErrorCode::InvalidGraph: return "InvalidGraph";
    case ErrorCode::NumericGuardTripped: return "NumericGuardTripped";
    case ErrorCode::IncompatibleCheckpoint: return "IncompatibleCheckpoint";
    case ErrorCode::DegenerateReference: return "DegenerateReference";
    case ErrorCode::ManifestError: return "ManifestError";
    case ErrorCode::StageOrderViolation: return "StageOrderViolation";
    case ErrorCode::UnsupportedStage: return "UnsupportedStage";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::WavFormat: return "WavFormat";
  }
  return "Unknown";
}

std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace sepkit
