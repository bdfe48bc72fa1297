#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "simtrans/codec.h"
#include "simtrans/tensor.h"

namespace simtrans {

// Text stream ids.
inline constexpr Token kTextPad = 0;
inline constexpr Token kTextEos = 1;
inline constexpr Token kTextBos = 2;  // temporal input only
inline constexpr Token kTextFirstWord = 3;

// Audio stream ids. Codec index k is stream id k + kAudioFirstCode.
inline constexpr Token kAudioDelayPad = 0;  // the pre-delay special token
inline constexpr Token kAudioInputEos = 1;
inline constexpr Token kAudioBos = 2;  // temporal input only
inline constexpr Token kAudioFirstCode = 3;

TokenGrid ToStreamTokens(const TokenGrid& codec_grid);
// Throws std::invalid_argument on special ids.
TokenGrid ToCodecTokens(const TokenGrid& stream_grid);

// Level 0 untouched; level q >= 1 at frame t holds level q of frame t - delay,
// and the special pad before that. Frame count is preserved.
TokenGrid ApplyAcousticDelay(const TokenGrid& grid, int delay_steps = 2);
// Inverse shift. The result has max(T - delay, 0) frames.
TokenGrid RemoveAcousticDelay(const TokenGrid& grid, int delay_steps = 2);

struct MultistreamFrame {
  Token text = kTextPad;
  std::vector<Token> target_audio;
  std::vector<Token> source_audio;

  bool operator==(const MultistreamFrame&) const = default;
};

// Padded per-frame text tokens aligned with the output audio.
struct InnerMonologuePlan {
  std::vector<Token> tokens;

  int frames() const { return static_cast<int>(tokens.size()); }
  bool operator==(const InnerMonologuePlan&) const = default;
};

// Dense T x (1 + 2Q) token table: text, Q target levels, Q source levels.
class Multistream {
 public:
  Multistream() = default;
  Multistream(int frames, int levels);

  int frames() const { return frames_; }
  int levels() const { return levels_; }
  int width() const { return 1 + 2 * levels_; }

  Token& slot(int t, int k) { return data_[static_cast<std::size_t>(t) * width() + k]; }
  Token slot(int t, int k) const { return data_[static_cast<std::size_t>(t) * width() + k]; }
  Token& text(int t) { return slot(t, 0); }
  Token text(int t) const { return slot(t, 0); }
  Token& target(int t, int q) { return slot(t, 1 + q); }
  Token target(int t, int q) const { return slot(t, 1 + q); }
  Token& source(int t, int q) { return slot(t, 1 + levels_ + q); }
  Token source(int t, int q) const { return slot(t, 1 + levels_ + q); }

  std::span<const Token> row(int t) const {
    return {data_.data() + static_cast<std::size_t>(t) * width(), static_cast<std::size_t>(width())};
  }
  MultistreamFrame frame(int t) const;
  void Append(const MultistreamFrame& frame);
  // First `frames` frames.
  Multistream Prefix(int frames) const;

  const std::vector<Token>& data() const { return data_; }
  bool operator==(const Multistream&) const = default;

 private:
  int frames_ = 0;
  int levels_ = 0;
  std::vector<Token> data_;
};

Multistream BuildMultistream(const TokenGrid& target, const TokenGrid& source,
                             const InnerMonologuePlan& text);

struct SplitStreams {
  TokenGrid target;
  TokenGrid source;
  InnerMonologuePlan text;
};
SplitStreams SplitMultistream(const Multistream& streams);

struct PlannedWord {
  std::vector<Token> tokens;
  int start_frame = 0;
};

InnerMonologuePlan BuildInnerMonologue(std::span<const PlannedWord> words, int total_frames);

// floor(time * f_r), robust to representation error of exact frame times.
int FrameOfTime(double time_s, double frame_rate_hz);

// Replaces every source level at source_end_frame with the input EOS id and
// writes the text EOS one frame after the output ends. The output end is the
// last word token of the plan unless output_end_frame is given.
std::pair<TokenGrid, InnerMonologuePlan> InsertEosMarkers(
    const TokenGrid& source, const InnerMonologuePlan& text, int source_end_frame,
    std::optional<int> output_end_frame = std::nullopt);

// MSF1: magic, u32 T, u32 Q, then per frame (1 + 2Q) u16 tokens.
void WriteMultistream(std::ostream& os, const Multistream& streams);
Multistream ReadMultistream(std::istream& is);
void SaveMultistream(const std::string& path, const Multistream& streams);
Multistream LoadMultistream(const std::string& path);

}  // namespace simtrans
