#ifndef SEPKIT_WAV_HPP
#define SEPKIT_WAV_HPP

#include "sepkit/dsp.hpp"

#include <filesystem>

namespace sepkit {

/// Reads 16-bit PCM mono. If `expected_rate` > 0 the header rate must match.
AudioBuffer read_wav(const std::filesystem::path& path, int expected_rate = 0);

/// Writes 16-bit PCM mono; samples are rounded to the nearest 1/32768 step and
/// clipped to [-1, 1).
void write_wav(const std::filesystem::path& path, const AudioBuffer& audio);

/// Rounds samples onto the 16-bit grid that write_wav uses.
VectorXd quantize_pcm16(const VectorXd& samples);

}  // namespace sepkit

#endif  // SEPKIT_WAV_HPP
