#include "simtrans/codec.h"

#include <cmath>
#include <fstream>

#include "simtrans/binary_io.h"
#include "simtrans/errors.h"

namespace simtrans {

void CodecConfig::Validate() const {
  if (!(frame_rate_hz > 0.0) || !(sample_rate_hz > 0.0)) {
    throw std::invalid_argument("frame and sample rates must be positive");
  }
  if (latent_dim < 1) throw std::invalid_argument("latent_dim must be >= 1");
  if (num_levels < 1 || num_levels > 16) throw std::invalid_argument("num_levels must be in 1..16");
  if (codebook_size < 2) throw std::invalid_argument("codebook_size must be >= 2");
  const double spf = sample_rate_hz / frame_rate_hz;
  if (std::abs(spf - std::round(spf)) > 1e-9 || spf < 1.0) {
    throw std::invalid_argument("sample rate must hold an integer number of samples per frame");
  }
}

int CodecConfig::SamplesPerFrame() const {
  return static_cast<int>(std::lround(sample_rate_hz / frame_rate_hz));
}

int CodecConfig::FramesFor(std::size_t num_samples) const {
  return static_cast<int>(num_samples / static_cast<std::size_t>(SamplesPerFrame()));
}

TokenGrid::TokenGrid(int frames, int levels, Token fill, double frame_rate_hz)
    : frames(frames), levels(levels), frame_rate_hz(frame_rate_hz) {
  if (frames < 0 || levels < 0) throw std::invalid_argument("negative grid shape");
  tokens.assign(static_cast<std::size_t>(frames) * levels, fill);
}

void WriteTokenGrid(std::ostream& os, const TokenGrid& grid) {
  io::WriteMagic(os, "TGR1");
  io::Write<std::uint32_t>(os, static_cast<std::uint32_t>(grid.frames));
  io::Write<std::uint32_t>(os, static_cast<std::uint32_t>(grid.levels));
  for (Token tok : grid.tokens) io::Write<std::uint16_t>(os, tok);
}

TokenGrid ReadTokenGrid(std::istream& is) {
  io::ExpectMagic(is, "TGR1");
  const auto frames = io::Read<std::uint32_t>(is);
  const auto levels = io::Read<std::uint32_t>(is);
  if (frames > (1u << 24) || levels > 64) throw DataError("token grid shape out of range");
  TokenGrid grid(static_cast<int>(frames), static_cast<int>(levels));
  for (auto& tok : grid.tokens) tok = io::Read<std::uint16_t>(is);
  return grid;
}

void SaveTokenGrid(const std::string& path, const TokenGrid& grid) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write " + path);
  WriteTokenGrid(os, grid);
}

TokenGrid LoadTokenGrid(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot read " + path);
  return ReadTokenGrid(is);
}

void WriteCodebooks(std::ostream& os, const CodebookStack<float>& codebooks,
                    const CodecConfig& config) {
  io::WriteMagic(os, "RVQ1");
  io::Write<std::uint32_t>(os, static_cast<std::uint32_t>(codebooks.latent_dim()));
  io::Write<std::uint32_t>(os, static_cast<std::uint32_t>(codebooks.num_levels()));
  io::Write<std::uint32_t>(os, static_cast<std::uint32_t>(codebooks.codebook_size()));
  io::Write<std::uint32_t>(os, static_cast<std::uint32_t>(std::lround(config.sample_rate_hz)));
  io::Write<std::uint32_t>(os, static_cast<std::uint32_t>(std::lround(config.frame_rate_hz * 1000.0)));
  for (const auto& level : codebooks.entries) {
    for (Eigen::Index i = 0; i < level.size(); ++i) io::Write<float>(os, level.data()[i]);
  }
}

CodebookStack<float> ReadCodebooks(std::istream& is, CodecConfig* config) {
  io::ExpectMagic(is, "RVQ1");
  const auto dim = io::Read<std::uint32_t>(is);
  const auto levels = io::Read<std::uint32_t>(is);
  const auto size = io::Read<std::uint32_t>(is);
  const auto sample_rate = io::Read<std::uint32_t>(is);
  const auto frame_rate_milli = io::Read<std::uint32_t>(is);
  if (dim == 0 || dim > 4096 || levels == 0 || levels > 16 || size < 2 || size > 65536) {
    throw DataError("codebook header out of range");
  }
  std::vector<MatrixF> entries;
  for (std::uint32_t q = 0; q < levels; ++q) {
    MatrixF level(size, dim);
    for (Eigen::Index i = 0; i < level.size(); ++i) level.data()[i] = io::Read<float>(is);
    if (!level.allFinite()) throw DataError("non-finite codebook entry");
    entries.push_back(std::move(level));
  }
  if (config != nullptr) {
    config->latent_dim = static_cast<int>(dim);
    config->num_levels = static_cast<int>(levels);
    config->codebook_size = static_cast<int>(size);
    config->sample_rate_hz = sample_rate;
    config->frame_rate_hz = frame_rate_milli / 1000.0;
  }
  return CodebookStack<float>::FromEntries(std::move(entries));
}

void SaveCodebooks(const std::string& path, const CodebookStack<float>& codebooks,
                   const CodecConfig& config) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write " + path);
  WriteCodebooks(os, codebooks, config);
}

CodebookStack<float> LoadCodebooks(const std::string& path, CodecConfig* config) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot read " + path);
  return ReadCodebooks(is, config);
}

}  // namespace simtrans
