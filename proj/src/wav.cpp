#include "sepkit/wav.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <vector>

namespace sepkit {
namespace {

void put_u32(std::ofstream& os, std::uint32_t v) {
  const std::array<char, 4> b{char(v & 0xff), char((v >> 8) & 0xff), char((v >> 16) & 0xff), char((v >> 24) & 0xff)};
  os.write(b.data(), 4);
}

void put_u16(std::ofstream& os, std::uint16_t v) {
  const std::array<char, 2> b{char(v & 0xff), char((v >> 8) & 0xff)};
  os.write(b.data(), 2);
}

std::uint32_t get_u32(const unsigned char* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) | (std::uint32_t(p[3]) << 24);
}

std::uint16_t get_u16(const unsigned char* p) { return std::uint16_t(p[0] | (p[1] << 8)); }

std::int16_t to_pcm(double x) {
  const double s = std::round(x * 32768.0);
  return static_cast<std::int16_t>(std::clamp(s, -32768.0, 32767.0));
}

}  // namespace

VectorXd quantize_pcm16(const VectorXd& samples) {
  return samples.unaryExpr([](double x) { return to_pcm(x) / 32768.0; });
}

void write_wav(const std::filesystem::path& path, const AudioBuffer& audio) {
  audio.validate();
  std::ofstream os(path, std::ios::binary);
  require(static_cast<bool>(os), ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  const auto n = static_cast<std::uint32_t>(audio.size());
  const std::uint32_t data_bytes = n * 2;
  os.write("RIFF", 4);
  put_u32(os, 36 + data_bytes);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  put_u32(os, 16);
  put_u16(os, 1);  // PCM
  put_u16(os, 1);  // mono
  put_u32(os, static_cast<std::uint32_t>(audio.sample_rate));
  put_u32(os, static_cast<std::uint32_t>(audio.sample_rate) * 2);
  put_u16(os, 2);
  put_u16(os, 16);
  os.write("data", 4);
  put_u32(os, data_bytes);
  std::vector<char> buf(data_bytes);
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto v = static_cast<std::uint16_t>(to_pcm(audio.samples[i]));
    buf[2 * i] = char(v & 0xff);
    buf[2 * i + 1] = char(v >> 8);
  }
  os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  require(static_cast<bool>(os), ErrorCode::IoError, "write failed for " + path.string());
}

AudioBuffer read_wav(const std::filesystem::path& path, int expected_rate) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), ErrorCode::IoError, "cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  require(bytes.size() >= 12 && std::memcmp(bytes.data(), "RIFF", 4) == 0 &&
              std::memcmp(bytes.data() + 8, "WAVE", 4) == 0,
          ErrorCode::WavFormat, path.string() + " is not a RIFF/WAVE file");

  std::size_t pos = 12;
  int channels = 0, bits = 0, format = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::uint32_t data_len = 0;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t len = get_u32(chunk + 4);
    require(pos + 8 + len <= bytes.size(), ErrorCode::WavFormat, "truncated chunk in " + path.string());
    if (std::memcmp(chunk, "fmt ", 4) == 0 && len >= 16) {
      format = get_u16(chunk + 8);
      channels = get_u16(chunk + 10);
      rate = get_u32(chunk + 12);
      bits = get_u16(chunk + 22);
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = chunk + 8;
      data_len = len;
    }
    pos += 8 + len + (len & 1);
  }
  require(format == 1 && channels == 1 && bits == 16, ErrorCode::WavFormat,
          path.string() + " must be 16-bit PCM mono");
  require(data != nullptr, ErrorCode::WavFormat, "no data chunk in " + path.string());
  require(expected_rate <= 0 || static_cast<int>(rate) == expected_rate, ErrorCode::WavFormat,
          path.string() + " has sample rate " + std::to_string(rate) + ", expected " + std::to_string(expected_rate));

  AudioBuffer audio;
  audio.sample_rate = static_cast<int>(rate);
  audio.samples.resize(data_len / 2);
  for (std::uint32_t i = 0; i < data_len / 2; ++i)
    audio.samples[i] = static_cast<std::int16_t>(get_u16(data + 2 * i)) / 32768.0;
  return audio;
}

}  // namespace sepkit
