#include "simtrans/streams.h"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "simtrans/binary_io.h"
#include "simtrans/errors.h"

namespace simtrans {

TokenGrid ToStreamTokens(const TokenGrid& codec_grid) {
  TokenGrid out = codec_grid;
  for (auto& tok : out.tokens) tok = static_cast<Token>(tok + kAudioFirstCode);
  return out;
}

TokenGrid ToCodecTokens(const TokenGrid& stream_grid) {
  TokenGrid out = stream_grid;
  for (auto& tok : out.tokens) {
    if (tok < kAudioFirstCode) throw std::invalid_argument("special token has no codec index");
    tok = static_cast<Token>(tok - kAudioFirstCode);
  }
  return out;
}

TokenGrid ApplyAcousticDelay(const TokenGrid& grid, int delay_steps) {
  if (delay_steps < 0) throw std::invalid_argument("delay_steps must be >= 0");
  TokenGrid out = grid;
  for (int t = 0; t < grid.frames; ++t) {
    for (int q = 1; q < grid.levels; ++q) {
      out.at(t, q) = t >= delay_steps ? grid.at(t - delay_steps, q) : kAudioDelayPad;
    }
  }
  return out;
}

TokenGrid RemoveAcousticDelay(const TokenGrid& grid, int delay_steps) {
  if (delay_steps < 0) throw std::invalid_argument("delay_steps must be >= 0");
  const int frames = std::max(grid.frames - delay_steps, 0);
  TokenGrid out(frames, grid.levels, 0, grid.frame_rate_hz);
  for (int t = 0; t < frames; ++t) {
    out.at(t, 0) = grid.at(t, 0);
    for (int q = 1; q < grid.levels; ++q) out.at(t, q) = grid.at(t + delay_steps, q);
  }
  return out;
}

Multistream::Multistream(int frames, int levels) : frames_(frames), levels_(levels) {
  if (frames < 0 || levels < 1) throw std::invalid_argument("bad multistream shape");
  data_.assign(static_cast<std::size_t>(frames) * width(), 0);
}

MultistreamFrame Multistream::frame(int t) const {
  MultistreamFrame f;
  f.text = text(t);
  for (int q = 0; q < levels_; ++q) {
    f.target_audio.push_back(target(t, q));
    f.source_audio.push_back(source(t, q));
  }
  return f;
}

void Multistream::Append(const MultistreamFrame& frame) {
  if (static_cast<int>(frame.target_audio.size()) != levels_ ||
      static_cast<int>(frame.source_audio.size()) != levels_) {
    throw std::invalid_argument("frame level count mismatch");
  }
  data_.push_back(frame.text);
  data_.insert(data_.end(), frame.target_audio.begin(), frame.target_audio.end());
  data_.insert(data_.end(), frame.source_audio.begin(), frame.source_audio.end());
  ++frames_;
}

Multistream Multistream::Prefix(int frames) const {
  if (frames < 0 || frames > frames_) throw std::out_of_range("prefix longer than stream");
  Multistream out(frames, levels_);
  std::copy(data_.begin(), data_.begin() + static_cast<std::ptrdiff_t>(frames) * width(),
            out.data_.begin());
  return out;
}

Multistream BuildMultistream(const TokenGrid& target, const TokenGrid& source,
                             const InnerMonologuePlan& text) {
  if (target.frames != source.frames || target.frames != text.frames()) {
    throw std::invalid_argument("stream length mismatch: target " + std::to_string(target.frames) +
                                ", source " + std::to_string(source.frames) + ", text " +
                                std::to_string(text.frames()));
  }
  if (target.levels != source.levels) throw std::invalid_argument("stream level mismatch");
  Multistream out(target.frames, target.levels);
  for (int t = 0; t < target.frames; ++t) {
    out.text(t) = text.tokens[t];
    for (int q = 0; q < target.levels; ++q) {
      out.target(t, q) = target.at(t, q);
      out.source(t, q) = source.at(t, q);
    }
  }
  return out;
}

SplitStreams SplitMultistream(const Multistream& streams) {
  SplitStreams out{TokenGrid(streams.frames(), streams.levels()),
                   TokenGrid(streams.frames(), streams.levels()), {}};
  out.text.tokens.resize(streams.frames());
  for (int t = 0; t < streams.frames(); ++t) {
    out.text.tokens[t] = streams.text(t);
    for (int q = 0; q < streams.levels(); ++q) {
      out.target.at(t, q) = streams.target(t, q);
      out.source.at(t, q) = streams.source(t, q);
    }
  }
  return out;
}

InnerMonologuePlan BuildInnerMonologue(std::span<const PlannedWord> words, int total_frames) {
  if (total_frames < 0) throw std::invalid_argument("negative frame count");
  InnerMonologuePlan plan;
  plan.tokens.assign(total_frames, kTextPad);
  int next_free = 0;
  for (const auto& word : words) {
    if (word.start_frame < next_free) throw std::invalid_argument("words overlap");
    if (word.tokens.empty()) throw std::invalid_argument("empty word");
    const int end = word.start_frame + static_cast<int>(word.tokens.size());
    if (end > total_frames) throw std::invalid_argument("word extends past the last frame");
    for (std::size_t k = 0; k < word.tokens.size(); ++k) {
      if (word.tokens[k] < kTextFirstWord) throw std::invalid_argument("word uses a reserved text id");
      plan.tokens[word.start_frame + k] = word.tokens[k];
    }
    next_free = end;
  }
  return plan;
}

int FrameOfTime(double time_s, double frame_rate_hz) {
  return static_cast<int>(std::floor(time_s * frame_rate_hz + 1e-9));
}

std::pair<TokenGrid, InnerMonologuePlan> InsertEosMarkers(const TokenGrid& source,
                                                         const InnerMonologuePlan& text,
                                                         int source_end_frame,
                                                         std::optional<int> output_end_frame) {
  if (source_end_frame < 0 || source_end_frame >= source.frames) {
    throw std::out_of_range("source end frame " + std::to_string(source_end_frame) +
                            " out of range");
  }
  TokenGrid src = source;
  for (int q = 0; q < src.levels; ++q) src.at(source_end_frame, q) = kAudioInputEos;

  InnerMonologuePlan plan = text;
  int last = -1;
  if (output_end_frame) {
    last = *output_end_frame;
  } else {
    for (int t = 0; t < plan.frames(); ++t) {
      if (plan.tokens[t] >= kTextFirstWord) last = t;
    }
  }
  const int eos = last + 1;
  if (eos < 0 || eos >= plan.frames()) {
    throw std::out_of_range("text EOS frame " + std::to_string(eos) + " out of range");
  }
  if (plan.tokens[eos] >= kTextFirstWord) throw std::invalid_argument("text EOS would overwrite a word");
  plan.tokens[eos] = kTextEos;
  return {std::move(src), std::move(plan)};
}

void WriteMultistream(std::ostream& os, const Multistream& streams) {
  io::WriteMagic(os, "MSF1");
  io::Write<std::uint32_t>(os, static_cast<std::uint32_t>(streams.frames()));
  io::Write<std::uint32_t>(os, static_cast<std::uint32_t>(streams.levels()));
  for (Token tok : streams.data()) io::Write<std::uint16_t>(os, tok);
}

Multistream ReadMultistream(std::istream& is) {
  io::ExpectMagic(is, "MSF1");
  const auto frames = io::Read<std::uint32_t>(is);
  const auto levels = io::Read<std::uint32_t>(is);
  if (frames > (1u << 24) || levels == 0 || levels > 64) throw DataError("multistream shape out of range");
  Multistream out(static_cast<int>(frames), static_cast<int>(levels));
  for (int t = 0; t < out.frames(); ++t) {
    for (int k = 0; k < out.width(); ++k) out.slot(t, k) = io::Read<std::uint16_t>(is);
  }
  return out;
}

void SaveMultistream(const std::string& path, const Multistream& streams) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write " + path);
  WriteMultistream(os, streams);
}

Multistream LoadMultistream(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot read " + path);
  return ReadMultistream(is);
}

}  // namespace simtrans
