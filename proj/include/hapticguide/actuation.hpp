#pragma once

#include "hapticguide/core.hpp"
#include "hapticguide/cue_policy.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

namespace hapticguide {

inline constexpr std::size_t kMotorCount = 6;
using Intensities = std::array<std::uint8_t, kMotorCount>;

/// Motor placement on the band, degrees counterclockwise from the wearer's
/// right when viewing the dorsal wrist.
struct BandGeometry {
  std::array<double, kMotorCount> motor_angles_deg = {0.0, 60.0, 120.0, 180.0, 240.0, 300.0};

  void validate() const;
  /// Index of the motor whose angle is closest (circularly) to angle_deg.
  std::size_t nearest_motor(double angle_deg) const;
};

struct Keyframe {
  Micros duration_us = 0;
  Intensities intensity{};

  bool operator==(const Keyframe&) const = default;
};

/// Piecewise-constant per-motor envelope.
struct ActuationPattern {
  std::vector<Keyframe> keyframes;
  bool repeat = false;

  Micros total_duration_us() const;
  /// Envelope value at local phase (time since activation). Repeating
  /// patterns wrap; finished one-shot patterns yield zeros.
  Intensities value_at(Micros phase_us) const;
  bool finished_at(Micros phase_us) const { return !repeat && phase_us >= total_duration_us(); }

  void validate() const;

  bool operator==(const ActuationPattern&) const = default;
};

/// Total map CueId -> pattern.
class Codebook {
 public:
  Codebook() = default;

  const ActuationPattern& operator[](CueId cue) const { return patterns_[index_of(cue)]; }
  void set(CueId cue, ActuationPattern pattern);

  /// Every cue maps to a valid pattern and Success does not repeat.
  void validate() const;

  bool operator==(const Codebook&) const = default;

 private:
  std::array<ActuationPattern, kCueCount> patterns_{};
};

Codebook default_codebook(const PolicyConfig& cfg, const BandGeometry& geom = {});

struct MotorFrame {
  Micros at_us = 0;
  Intensities intensity{};
  std::uint8_t seq = 0;

  bool operator==(const MotorFrame&) const = default;
};

/// A cue being played back since started_at_us.
struct ActiveCue {
  CueId cue;
  Micros started_at_us;
};

/// Per-channel max over the active cues' envelopes at now_us.
MotorFrame render_frame(std::span<const ActiveCue> active, const Codebook& codebook,
                        Micros now_us, std::uint8_t seq = 0);

inline constexpr std::size_t kWireFrameSize = 9;
inline constexpr std::uint8_t kWireSync = 0xAA;
using WireFrame = std::array<std::uint8_t, kWireFrameSize>;

/// [0xAA, seq, i0..i5, xor(bytes 1..7)]
WireFrame encode_frame(const MotorFrame& frame);

enum class DecodeError { BadLength, BadSync, BadChecksum };
std::string_view to_string(DecodeError e);

/// The wire format carries no timestamp; received_at_us is stamped on the result.
std::variant<MotorFrame, DecodeError> decode_frame(std::span<const std::uint8_t> bytes,
                                                   Micros received_at_us = 0);

/// Tracks which cues are playing and renders sequence-numbered frames.
class FrameRenderer {
 public:
  explicit FrameRenderer(Codebook codebook) : codebook_(std::move(codebook)) {}

  /// Applies policy events: Start adds a directional cue, Stop removes it,
  /// Burst (re)starts a one-shot pattern.
  void apply(const CueEvent& event);
  MotorFrame render(Micros now_us);

  const Codebook& codebook() const { return codebook_; }
  const std::vector<ActiveCue>& active() const { return active_; }

 private:
  Codebook codebook_;
  std::vector<ActiveCue> active_;
  std::uint8_t next_seq_ = 0;
};

}  // namespace hapticguide
