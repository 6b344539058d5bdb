#ifndef SEPKIT_DSP_HPP
#define SEPKIT_DSP_HPP

#include "sepkit/common.hpp"

#include <complex>
#include <vector>

namespace sepkit {

struct AudioBuffer {
  VectorXd samples;
  int sample_rate = 8000;

  Eigen::Index size() const { return samples.size(); }
  /// Throws ShapeMismatch if empty or non-finite.
  void validate() const;
};

enum class WindowKind { hamming };

struct StftConfig {
  double window_len_ms = 32.0;
  double hop_ms = 16.0;
  WindowKind window_kind = WindowKind::hamming;
  int fft_size = 0;  ///< 0 means "window length in samples"

  int window_samples(int sample_rate) const;
  int hop_samples(int sample_rate) const;
  int fft_samples(int sample_rate) const;
  int num_bins(int sample_rate) const { return fft_samples(sample_rate) / 2 + 1; }
  void validate(int sample_rate) const;
};

/// T x F one-sided STFT plus cached magnitude and phase (radians, in (-pi, pi]).
struct Spectrogram {
  MatrixXcd complex_bins;
  MatrixXd magnitude;
  MatrixXd phase;
  StftConfig config;
  int sample_rate = 8000;
  Eigen::Index num_samples = 0;

  Eigen::Index frames() const { return complex_bins.rows(); }
  Eigen::Index bins() const { return complex_bins.cols(); }

  /// Rebuilds magnitude/phase from complex_bins.
  void refresh_polar();
  static Spectrogram from_polar(const MatrixXd& magnitude, const MatrixXd& phase, const StftConfig& cfg,
                                int sample_rate, Eigen::Index num_samples);
};

VectorXd make_window(WindowKind kind, int length);

/// Number of frames for a signal of `len` samples; the tail frame is zero-padded.
Eigen::Index num_frames(Eigen::Index len, int window, int hop);

Spectrogram stft(const AudioBuffer& audio, const StftConfig& cfg = {});

/// Overlap-add synthesis with least-squares (sum of squared windows) normalization.
AudioBuffer istft(const Spectrogram& spec);

/// Per-frequency-bin standardization statistics.
struct NormStats {
  VectorXd mean;
  VectorXd variance;
  std::vector<int> flagged_bins;  ///< bins whose variance was zero and replaced by 1

  Eigen::Index bins() const { return mean.size(); }
  static NormStats identity(Eigen::Index bins);
};

NormStats compute_norm_stats(const std::vector<MatrixXd>& magnitudes);
MatrixXd normalize_magnitude(const MatrixXd& magnitude, const NormStats& stats);
MatrixXd denormalize_magnitude(const MatrixXd& normalized, const NormStats& stats);

}  // namespace sepkit

#endif  // SEPKIT_DSP_HPP
