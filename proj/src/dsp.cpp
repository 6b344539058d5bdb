#include "sepkit/dsp.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <numbers>

namespace sepkit {

void AudioBuffer::validate() const {
  require(samples.size() > 0, ErrorCode::ShapeMismatch, "audio buffer is empty");
  require(samples.allFinite(), ErrorCode::ShapeMismatch, "audio buffer has non-finite samples");
  require(sample_rate > 0, ErrorCode::InvalidConfig, "sample rate must be positive");
}

int StftConfig::window_samples(int sample_rate) const {
  return static_cast<int>(std::lround(window_len_ms * 1e-3 * sample_rate));
}

int StftConfig::hop_samples(int sample_rate) const {
  return static_cast<int>(std::lround(hop_ms * 1e-3 * sample_rate));
}

int StftConfig::fft_samples(int sample_rate) const {
  return fft_size > 0 ? fft_size : window_samples(sample_rate);
}

void StftConfig::validate(int sample_rate) const {
  const int win = window_samples(sample_rate);
  const int hop = hop_samples(sample_rate);
  require(win > 0 && hop > 0, ErrorCode::InvalidConfig, "window and hop must be positive");
  require(hop <= win, ErrorCode::InvalidConfig, "hop must not exceed the window length");
  require(fft_samples(sample_rate) >= win, ErrorCode::InvalidConfig, "fft size must cover the window");
}

void Spectrogram::refresh_polar() {
  magnitude.resize(complex_bins.rows(), complex_bins.cols());
  phase.resize(complex_bins.rows(), complex_bins.cols());
  for (Eigen::Index j = 0; j < complex_bins.cols(); ++j) {
    for (Eigen::Index i = 0; i < complex_bins.rows(); ++i) {
      const std::complex<double> z = complex_bins(i, j);
      const double mag = std::abs(z);
      magnitude(i, j) = mag;
      double ph = mag == 0.0 ? 0.0 : std::arg(z);
      if (ph <= -std::numbers::pi) ph = std::numbers::pi;
      phase(i, j) = ph;
    }
  }
}

Spectrogram Spectrogram::from_polar(const MatrixXd& magnitude, const MatrixXd& phase, const StftConfig& cfg,
                                    int sample_rate, Eigen::Index num_samples) {
  require(magnitude.rows() == phase.rows() && magnitude.cols() == phase.cols(), ErrorCode::ShapeMismatch,
          "magnitude/phase shape mismatch");
  Spectrogram spec;
  spec.config = cfg;
  spec.sample_rate = sample_rate;
  spec.num_samples = num_samples;
  spec.complex_bins.resize(magnitude.rows(), magnitude.cols());
  for (Eigen::Index j = 0; j < magnitude.cols(); ++j)
    for (Eigen::Index i = 0; i < magnitude.rows(); ++i)
      spec.complex_bins(i, j) = std::polar(1.0, phase(i, j)) * magnitude(i, j);
  spec.refresh_polar();
  return spec;
}

VectorXd make_window(WindowKind kind, int length) {
  VectorXd w(length);
  switch (kind) {
    case WindowKind::hamming:
      // periodic form; w[0] = 0.08 so every sample has nonzero synthesis weight
      for (int n = 0; n < length; ++n) w[n] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * n / length);
      break;
  }
  return w;
}

Eigen::Index num_frames(Eigen::Index len, int window, int hop) {
  if (len < window) return 0;
  return 1 + (len - window + hop - 1) / hop;
}

Spectrogram stft(const AudioBuffer& audio, const StftConfig& cfg) {
  audio.validate();
  cfg.validate(audio.sample_rate);
  const int win = cfg.window_samples(audio.sample_rate);
  const int hop = cfg.hop_samples(audio.sample_rate);
  const int nfft = cfg.fft_samples(audio.sample_rate);
  require(audio.size() >= win, ErrorCode::InputTooShort, "audio shorter than one analysis window");

  const Eigen::Index frames = num_frames(audio.size(), win, hop);
  const int bins = nfft / 2 + 1;
  const VectorXd window = make_window(cfg.window_kind, win);

  Spectrogram spec;
  spec.config = cfg;
  spec.sample_rate = audio.sample_rate;
  spec.num_samples = audio.size();
  spec.complex_bins.resize(frames, bins);

  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<double> frame(nfft);
  std::vector<std::complex<double>> out;
  for (Eigen::Index t = 0; t < frames; ++t) {
    std::fill(frame.begin(), frame.end(), 0.0);
    const Eigen::Index start = t * hop;
    for (int n = 0; n < win; ++n) {
      const Eigen::Index idx = start + n;
      if (idx < audio.size()) frame[n] = audio.samples[idx] * window[n];
    }
    fft.fwd(out, frame);
    for (int f = 0; f < bins; ++f) spec.complex_bins(t, f) = out[f];
  }
  spec.refresh_polar();
  return spec;
}

AudioBuffer istft(const Spectrogram& spec) {
  const int sr = spec.sample_rate;
  spec.config.validate(sr);
  const int win = spec.config.window_samples(sr);
  const int hop = spec.config.hop_samples(sr);
  const int nfft = spec.config.fft_samples(sr);
  const Eigen::Index frames = spec.frames();
  require(spec.bins() == nfft / 2 + 1, ErrorCode::ShapeMismatch, "bin count does not match fft size");
  require(spec.num_samples >= win, ErrorCode::ShapeMismatch, "spectrogram sample count below one window");
  require(frames == num_frames(spec.num_samples, win, hop), ErrorCode::ShapeMismatch,
          "frame count inconsistent with sample count");

  const VectorXd window = make_window(spec.config.window_kind, win);
  const Eigen::Index padded = (frames - 1) * hop + win;
  VectorXd acc = VectorXd::Zero(padded);
  VectorXd norm = VectorXd::Zero(padded);

  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<std::complex<double>> half(nfft / 2 + 1);
  std::vector<double> frame;
  for (Eigen::Index t = 0; t < frames; ++t) {
    for (Eigen::Index f = 0; f < spec.bins(); ++f) half[f] = spec.complex_bins(t, f);
    fft.inv(frame, half, nfft);
    const Eigen::Index start = t * hop;
    for (int n = 0; n < win; ++n) {
      acc[start + n] += window[n] * frame[n];
      norm[start + n] += window[n] * window[n];
    }
  }

  AudioBuffer out;
  out.sample_rate = sr;
  out.samples = VectorXd::Zero(spec.num_samples);
  for (Eigen::Index i = 0; i < spec.num_samples; ++i)
    out.samples[i] = norm[i] > 1e-12 ? acc[i] / norm[i] : 0.0;
  return out;
}

NormStats NormStats::identity(Eigen::Index bins) {
  return NormStats{VectorXd::Zero(bins), VectorXd::Ones(bins), {}};
}

NormStats compute_norm_stats(const std::vector<MatrixXd>& magnitudes) {
  require(!magnitudes.empty(), ErrorCode::ShapeMismatch, "no magnitudes to compute statistics from");
  const Eigen::Index bins = magnitudes.front().cols();
  VectorXd sum = VectorXd::Zero(bins);
  Eigen::Index count = 0;
  for (const auto& m : magnitudes) {
    require(m.cols() == bins, ErrorCode::ShapeMismatch, "inconsistent bin count");
    sum += m.colwise().sum().transpose();
    count += m.rows();
  }
  NormStats stats;
  stats.mean = sum / static_cast<double>(count);
  VectorXd sq = VectorXd::Zero(bins);
  for (const auto& m : magnitudes)
    sq += (m.rowwise() - stats.mean.transpose()).array().square().colwise().sum().matrix().transpose();
  stats.variance = sq / static_cast<double>(count);
  for (Eigen::Index f = 0; f < bins; ++f) {
    if (!(stats.variance[f] > 0.0)) {
      stats.variance[f] = 1.0;
      stats.flagged_bins.push_back(static_cast<int>(f));
    }
  }
  return stats;
}

MatrixXd normalize_magnitude(const MatrixXd& magnitude, const NormStats& stats) {
  require(magnitude.cols() == stats.bins(), ErrorCode::ShapeMismatch, "bin count differs from statistics");
  const RowVectorXd inv_std = stats.variance.array().sqrt().inverse().matrix().transpose();
  return ((magnitude.rowwise() - stats.mean.transpose()).array().rowwise() * inv_std.array()).matrix();
}

MatrixXd denormalize_magnitude(const MatrixXd& normalized, const NormStats& stats) {
  require(normalized.cols() == stats.bins(), ErrorCode::ShapeMismatch, "bin count differs from statistics");
  const RowVectorXd std_dev = stats.variance.array().sqrt().matrix().transpose();
  return ((normalized.array().rowwise() * std_dev.array()).matrix().rowwise() + stats.mean.transpose());
}

}  // namespace sepkit
