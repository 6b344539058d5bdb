#ifndef SEPKIT_MASKING_HPP
#define SEPKIT_MASKING_HPP

#include "sepkit/dsp.hpp"

#include <vector>

namespace sepkit {

enum class MaskKind { estimated, ipsm, binary };

/// S real-valued T x F masks.
struct MaskSet {
  std::vector<MatrixXd> masks;
  MaskKind kind = MaskKind::estimated;

  int num_sources() const { return static_cast<int>(masks.size()); }
  /// Checks shapes and the kind-specific value contract.
  void validate() const;
};

/// TF x C one-hot dominant-source indicator; row index is t * F + f.
struct MembershipMatrix {
  MatrixXd b;
};

inline constexpr double kMixtureFloor = 1e-8;

/// Phase-sensitive target |X_s| cos(theta_y - theta_s).
MatrixXd psa_target(const Spectrogram& source, const Spectrogram& mixture);

/// Ideal phase-sensitive masks; bins with |Y| < kMixtureFloor get 0.
MaskSet ipsm(const std::vector<Spectrogram>& sources, const Spectrogram& mixture, bool clamp_unit = false);

/// Ties go to the lowest source index.
MembershipMatrix dominant_membership(const std::vector<Spectrogram>& sources);

/// |X_s| = |Y| * M_s with the mixture phase.
std::vector<Spectrogram> apply_mask(const Spectrogram& mixture, const MaskSet& masks);

std::vector<AudioBuffer> reconstruct(const Spectrogram& mixture, const MaskSet& masks);

}  // namespace sepkit

#endif  // SEPKIT_MASKING_HPP
