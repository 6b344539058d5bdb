#ifndef SEPKIT_COMMON_HPP
#define SEPKIT_COMMON_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace sepkit {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixXd = Eigen::MatrixXd;
using VectorXd = Eigen::VectorXd;
using RowVectorXd = Eigen::RowVectorXd;
using MatrixXcd = Eigen::MatrixXcd;

enum class ErrorCode {
  InputTooShort,
  ShapeMismatch,
  InvalidConfig,
  DegenerateSource,
  SplitViolation,
  ContractViolation,
  UnsupportedSourceCount,
  InvalidGraph,
  NumericGuardTripped,
  IncompatibleCheckpoint,
  DegenerateReference,
  ManifestError,
  StageOrderViolation,
  UnsupportedStage,
  IoError,
  WavFormat,
};

std::string_view to_string(ErrorCode code);

/// Single exception type for every module; `code()` identifies the failure.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Keeps large matrix buffers on the heap instead of fresh mmap pages. Training
/// allocates and frees megabyte-sized gradients per utterance; without this,
/// glibc returns them to the kernel and page faults dominate the run time.
/// Idempotent; a no-op on other C libraries.
void keep_large_allocations();

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) throw Error(code, what);
}

/// splitmix64 finalizer; used to derive independent child seeds.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b = 0) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// FNV-1a over raw bytes.
std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

}  // namespace sepkit

#endif  // SEPKIT_COMMON_HPP
