#include "sepkit/masking.hpp"

#include <cmath>
#include <numbers>

namespace sepkit {
namespace {

void require_same_shape(const Spectrogram& a, const Spectrogram& b) {
  require(a.frames() == b.frames() && a.bins() == b.bins(), ErrorCode::ShapeMismatch,
          "spectrogram shapes differ");
}

}  // namespace

void MaskSet::validate() const {
  require(!masks.empty(), ErrorCode::ShapeMismatch, "empty mask set");
  const auto rows = masks.front().rows();
  const auto cols = masks.front().cols();
  for (const auto& m : masks)
    require(m.rows() == rows && m.cols() == cols, ErrorCode::ShapeMismatch, "masks differ in shape");
  switch (kind) {
    case MaskKind::estimated:
      for (const auto& m : masks)
        require((m.array() >= 0.0).all(), ErrorCode::ContractViolation, "estimated mask has negative entries");
      break;
    case MaskKind::binary: {
      MatrixXd sum = MatrixXd::Zero(rows, cols);
      for (const auto& m : masks) {
        require((m.array() == 0.0 || m.array() == 1.0).all(), ErrorCode::ContractViolation,
                "binary mask has entries outside {0, 1}");
        sum += m;
      }
      require((sum.array() == 1.0).all(), ErrorCode::ContractViolation, "binary masks do not partition the plane");
      break;
    }
    case MaskKind::ipsm:
      break;
  }
}

MatrixXd psa_target(const Spectrogram& source, const Spectrogram& mixture) {
  require_same_shape(source, mixture);
  return (source.magnitude.array() * (mixture.phase - source.phase).array().cos()).matrix();
}

MaskSet ipsm(const std::vector<Spectrogram>& sources, const Spectrogram& mixture, bool clamp_unit) {
  require(sources.size() >= 2, ErrorCode::ShapeMismatch, "need at least two sources");
  MaskSet out;
  out.kind = MaskKind::ipsm;
  const auto& y = mixture.magnitude.array();
  for (const auto& src : sources) {
    const MatrixXd target = psa_target(src, mixture);
    MatrixXd m = (y >= kMixtureFloor).select(target.array() / y.max(kMixtureFloor), 0.0).matrix();
    if (clamp_unit) m = m.cwiseMax(0.0).cwiseMin(1.0);
    out.masks.push_back(std::move(m));
  }
  return out;
}

MembershipMatrix dominant_membership(const std::vector<Spectrogram>& sources) {
  require(sources.size() >= 2, ErrorCode::ShapeMismatch, "need at least two sources");
  const auto frames = sources.front().frames();
  const auto bins = sources.front().bins();
  for (const auto& s : sources) require_same_shape(s, sources.front());
  MembershipMatrix out;
  out.b = MatrixXd::Zero(frames * bins, static_cast<Eigen::Index>(sources.size()));
  for (Eigen::Index t = 0; t < frames; ++t) {
    for (Eigen::Index f = 0; f < bins; ++f) {
      Eigen::Index best = 0;
      for (std::size_t s = 1; s < sources.size(); ++s)
        if (sources[s].magnitude(t, f) > sources[best].magnitude(t, f)) best = static_cast<Eigen::Index>(s);
      out.b(t * bins + f, best) = 1.0;
    }
  }
  return out;
}

std::vector<Spectrogram> apply_mask(const Spectrogram& mixture, const MaskSet& masks) {
  masks.validate();
  std::vector<Spectrogram> out;
  for (const auto& m : masks.masks) {
    require(m.rows() == mixture.frames() && m.cols() == mixture.bins(), ErrorCode::ShapeMismatch,
            "mask shape differs from mixture");
    Spectrogram est = mixture;
    // Scaling the complex bins keeps the mixture phase; a negative IPSM entry
    // flips the sign, which is what |Y| * M with phase theta_y means.
    est.complex_bins = (mixture.complex_bins.array() * m.array().cast<std::complex<double>>()).matrix();
    est.magnitude = (mixture.magnitude.array() * m.array().abs()).matrix();
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      for (Eigen::Index i = 0; i < m.rows(); ++i) {
        if (est.magnitude(i, j) == 0.0) est.phase(i, j) = 0.0;
        else if (m(i, j) < 0.0) est.phase(i, j) = mixture.phase(i, j) > 0.0 ? mixture.phase(i, j) - std::numbers::pi
                                                                              : mixture.phase(i, j) + std::numbers::pi;
      }
    }
    out.push_back(std::move(est));
  }
  return out;
}

std::vector<AudioBuffer> reconstruct(const Spectrogram& mixture, const MaskSet& masks) {
  std::vector<AudioBuffer> out;
  for (const auto& est : apply_mask(mixture, masks)) out.push_back(istft(est));
  return out;
}

}  // namespace sepkit
