#include "kamhub/audio_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

namespace kamhub {

AudioBuffer::AudioBuffer(std::vector<std::vector<double>> channels, int sample_rate)
    : channels_(std::move(channels)), sample_rate_(sample_rate) {
  if (sample_rate_ <= 0) throw std::invalid_argument("sample rate must be positive");
  if (channels_.empty()) throw std::invalid_argument("audio buffer needs at least one channel");
  for (const auto& ch : channels_) {
    if (ch.size() != channels_.front().size())
      throw std::invalid_argument("audio channels differ in length");
  }
}

AudioBuffer AudioBuffer::mono(std::vector<double> samples, int sample_rate) {
  std::vector<std::vector<double>> channels;
  channels.push_back(std::move(samples));
  return AudioBuffer(std::move(channels), sample_rate);
}

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint32_t read_u32(const unsigned char* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
         std::uint32_t(p[3]) << 24;
}

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | p[1] << 8);
}

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void put_u16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v));
  out.push_back(static_cast<unsigned char>(v >> 8));
}

void put_tag(std::vector<unsigned char>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

[[noreturn]] void malformed(const std::filesystem::path& path, const std::string& why) {
  throw WavError(WavError::Kind::malformed_header, path.string() + ": " + why);
}

}  // namespace

AudioBuffer load_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw WavError(WavError::Kind::missing_file, path.string() + ": cannot open file");
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                         std::istreambuf_iterator<char>());

  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    malformed(path, "not a RIFF/WAVE file");

  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0, block_align = 0;
  std::uint32_t sample_rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::size_t size = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || body + size > bytes.size()) malformed(path, "truncated fmt chunk");
      format = read_u16(bytes.data() + body);
      channels = read_u16(bytes.data() + body + 2);
      sample_rate = read_u32(bytes.data() + body + 4);
      block_align = read_u16(bytes.data() + body + 12);
      bits = read_u16(bytes.data() + body + 14);
      if (format == kFormatExtensible) {
        if (size < 40) malformed(path, "truncated extensible fmt chunk");
        format = read_u16(bytes.data() + body + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) malformed(path, "data chunk precedes fmt chunk");
      // Tolerate writers that leave the size field at its streaming placeholder.
      data_size = std::min(size, bytes.size() - body);
      data = bytes.data() + body;
      break;
    }
    pos = body + size + (size & 1);
  }

  if (!have_fmt) malformed(path, "missing fmt chunk");
  if (data == nullptr) malformed(path, "missing data chunk");
  if (channels == 0) malformed(path, "zero channels");
  if (sample_rate == 0) malformed(path, "zero sample rate");

  const bool pcm = format == kFormatPcm && (bits == 16 || bits == 24);
  const bool fp = format == kFormatFloat && bits == 32;
  if (!pcm && !fp)
    throw WavError(WavError::Kind::unsupported_encoding,
                   path.string() + ": unsupported encoding (format " + std::to_string(format) +
                       ", " + std::to_string(bits) + " bits)");

  const std::size_t sample_bytes = bits / 8;
  if (block_align != sample_bytes * channels) malformed(path, "inconsistent block alignment");

  const std::size_t n = data_size / block_align;
  std::vector<std::vector<double>> out(channels, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < channels; ++c) {
      const unsigned char* p = data + i * block_align + c * sample_bytes;
      double v = 0.0;
      if (fp) {
        v = std::bit_cast<float>(read_u32(p));
      } else if (bits == 16) {
        v = static_cast<std::int16_t>(read_u16(p)) / 32768.0;
      } else {
        std::int32_t s = std::int32_t(p[0]) | std::int32_t(p[1]) << 8 | std::int32_t(p[2]) << 16;
        if (s & 0x800000) s -= 0x1000000;
        v = s / 8388608.0;
      }
      out[c][i] = v;
    }
  }
  return AudioBuffer(std::move(out), static_cast<int>(sample_rate));
}

void save_wav(const std::filesystem::path& path, const AudioBuffer& buffer, WavEncoding encoding) {
  if (buffer.empty()) throw std::invalid_argument("cannot save an empty audio buffer");

  const std::size_t channels = buffer.channels();
  const std::size_t n = buffer.frames();
  const std::uint16_t bits = encoding == WavEncoding::pcm16 ? 16 : encoding == WavEncoding::pcm24 ? 24 : 32;
  const std::uint16_t sample_bytes = bits / 8;
  const std::uint16_t block_align = static_cast<std::uint16_t>(sample_bytes * channels);
  const std::size_t data_size = n * block_align;
  if (data_size > 0xFFFFFFFFull - 36)
    throw WavError(WavError::Kind::write_failed, path.string() + ": audio too long for RIFF");

  std::vector<unsigned char> out;
  out.reserve(44 + data_size);
  put_tag(out, "RIFF");
  put_u32(out, static_cast<std::uint32_t>(36 + data_size));
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, encoding == WavEncoding::float32 ? kFormatFloat : kFormatPcm);
  put_u16(out, static_cast<std::uint16_t>(channels));
  put_u32(out, static_cast<std::uint32_t>(buffer.sample_rate()));
  put_u32(out, static_cast<std::uint32_t>(buffer.sample_rate()) * block_align);
  put_u16(out, block_align);
  put_u16(out, bits);
  put_tag(out, "data");
  put_u32(out, static_cast<std::uint32_t>(data_size));

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < channels; ++c) {
      const double v = buffer.channel(c)[i];
      switch (encoding) {
        case WavEncoding::float32:
          put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
          break;
        case WavEncoding::pcm16: {
          const double s = std::clamp(std::nearbyint(v * 32768.0), -32768.0, 32767.0);
          put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(s)));
          break;
        }
        case WavEncoding::pcm24: {
          const double s = std::clamp(std::nearbyint(v * 8388608.0), -8388608.0, 8388607.0);
          const auto u = static_cast<std::uint32_t>(static_cast<std::int32_t>(s));
          out.push_back(static_cast<unsigned char>(u));
          out.push_back(static_cast<unsigned char>(u >> 8));
          out.push_back(static_cast<unsigned char>(u >> 16));
          break;
        }
      }
    }
  }

  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw WavError(WavError::Kind::write_failed, path.string() + ": cannot open for writing");
  file.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!file) throw WavError(WavError::Kind::write_failed, path.string() + ": write failed");
}

AudioBuffer to_mono(const AudioBuffer& buffer) {
  if (buffer.channels() == 0) throw std::invalid_argument("to_mono: buffer has no channels");
  if (buffer.is_mono()) return buffer;
  const std::size_t n = buffer.frames();
  const double scale = 1.0 / static_cast<double>(buffer.channels());
  std::vector<double> mono(n, 0.0);
  for (std::size_t c = 0; c < buffer.channels(); ++c) {
    const auto& ch = buffer.channel(c);
    for (std::size_t i = 0; i < n; ++i) mono[i] += ch[i];
  }
  for (auto& v : mono) v *= scale;
  return AudioBuffer::mono(std::move(mono), buffer.sample_rate());
}

}  // namespace kamhub
