#include "hapticguide/actuation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace hapticguide {

void BandGeometry::validate() const {
  for (std::size_t i = 0; i < kMotorCount; ++i) {
    const double a = motor_angles_deg[i];
    if (!(a >= 0.0 && a < 360.0)) throw std::invalid_argument("motor angle outside [0,360)");
    for (std::size_t j = 0; j < i; ++j) {
      if (motor_angles_deg[j] == a) throw std::invalid_argument("motor angles must be distinct");
    }
  }
}

std::size_t BandGeometry::nearest_motor(double angle_deg) const {
  std::size_t best = 0;
  double best_distance = 1e9;
  for (std::size_t i = 0; i < kMotorCount; ++i) {
    double d = std::fmod(std::abs(motor_angles_deg[i] - angle_deg), 360.0);
    d = std::min(d, 360.0 - d);
    if (d < best_distance) {
      best_distance = d;
      best = i;
    }
  }
  return best;
}

Micros ActuationPattern::total_duration_us() const {
  Micros total = 0;
  for (const auto& k : keyframes) total += k.duration_us;
  return total;
}

Intensities ActuationPattern::value_at(Micros phase_us) const {
  const Micros total = total_duration_us();
  if (phase_us < 0 || total <= 0) return {};
  if (repeat) {
    phase_us %= total;
  } else if (phase_us >= total) {
    return {};
  }
  for (const auto& k : keyframes) {
    if (phase_us < k.duration_us) return k.intensity;
    phase_us -= k.duration_us;
  }
  return {};
}

void ActuationPattern::validate() const {
  if (keyframes.empty()) throw std::invalid_argument("pattern has no keyframes");
  for (const auto& k : keyframes) {
    if (k.duration_us <= 0) throw std::invalid_argument("keyframe duration must be positive");
  }
}

void Codebook::set(CueId cue, ActuationPattern pattern) {
  pattern.validate();
  patterns_[index_of(cue)] = std::move(pattern);
}

void Codebook::validate() const {
  for (CueId c : kAllCues) {
    try {
      (*this)[c].validate();
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(std::string(to_string(c)) + ": " + e.what());
    }
  }
  if ((*this)[CueId::Success].repeat) throw std::invalid_argument("Success pattern must not repeat");
}

namespace {

Intensities channels(const BandGeometry& geom, std::initializer_list<double> angles,
                     std::uint8_t level) {
  Intensities out{};
  for (double a : angles) out[geom.nearest_motor(a)] = level;
  return out;
}

Intensities all_channels(std::uint8_t level) {
  Intensities out;
  out.fill(level);
  return out;
}

}  // namespace

Codebook default_codebook(const PolicyConfig& cfg, const BandGeometry& geom) {
  cfg.validate();
  geom.validate();
  const auto half = static_cast<std::uint8_t>(cfg.directional_intensity);
  const auto full = static_cast<std::uint8_t>(cfg.state_intensity);
  const Micros on = ms_to_us(cfg.pulse_on_ms);
  const Micros off = ms_to_us(cfg.pulse_off_ms);

  auto pulsed = [&](std::initializer_list<double> angles) {
    return ActuationPattern{{{on, channels(geom, angles, half)}, {off, {}}}, true};
  };

  Codebook book;
  book.set(CueId::Right, pulsed({0.0}));
  book.set(CueId::Up, pulsed({60.0, 120.0}));
  book.set(CueId::Left, pulsed({180.0}));
  book.set(CueId::Down, pulsed({240.0, 300.0}));
  // Depth cues: all-motor rhythms, long-short and short-short.
  book.set(CueId::Forward,
           ActuationPattern{{{ms_to_us(400), all_channels(half)}, {ms_to_us(200), {}}}, true});
  book.set(CueId::Back, ActuationPattern{{{ms_to_us(100), all_channels(half)},
                                          {ms_to_us(100), {}},
                                          {ms_to_us(100), all_channels(half)},
                                          {ms_to_us(500), {}}},
                                         true});
  book.set(CueId::Success,
           ActuationPattern{{{ms_to_us(cfg.state_burst_ms), all_channels(full)}}, false});
  return book;
}

MotorFrame render_frame(std::span<const ActiveCue> active, const Codebook& codebook,
                        Micros now_us, std::uint8_t seq) {
  MotorFrame frame{now_us, {}, seq};
  for (const ActiveCue& a : active) {
    const Intensities v = codebook[a.cue].value_at(now_us - a.started_at_us);
    for (std::size_t ch = 0; ch < kMotorCount; ++ch) {
      frame.intensity[ch] = std::max(frame.intensity[ch], v[ch]);
    }
  }
  return frame;
}

WireFrame encode_frame(const MotorFrame& frame) {
  WireFrame out{};
  out[0] = kWireSync;
  out[1] = frame.seq;
  std::copy(frame.intensity.begin(), frame.intensity.end(), out.begin() + 2);
  std::uint8_t checksum = 0;
  for (std::size_t i = 1; i < kWireFrameSize - 1; ++i) checksum ^= out[i];
  out[kWireFrameSize - 1] = checksum;
  return out;
}

std::string_view to_string(DecodeError e) {
  switch (e) {
    case DecodeError::BadLength: return "BadLength";
    case DecodeError::BadSync: return "BadSync";
    case DecodeError::BadChecksum: return "BadChecksum";
  }
  return "?";
}

std::variant<MotorFrame, DecodeError> decode_frame(std::span<const std::uint8_t> bytes,
                                                   Micros received_at_us) {
  if (bytes.size() != kWireFrameSize) return DecodeError::BadLength;
  if (bytes[0] != kWireSync) return DecodeError::BadSync;
  std::uint8_t checksum = 0;
  for (std::size_t i = 1; i < kWireFrameSize - 1; ++i) checksum ^= bytes[i];
  if (checksum != bytes[kWireFrameSize - 1]) return DecodeError::BadChecksum;
  MotorFrame frame;
  frame.at_us = received_at_us;
  frame.seq = bytes[1];
  std::copy(bytes.begin() + 2, bytes.begin() + 2 + kMotorCount, frame.intensity.begin());
  return frame;
}

void FrameRenderer::apply(const CueEvent& event) {
  auto same_cue = [&](const ActiveCue& a) { return a.cue == event.cue; };
  switch (event.kind) {
    case CueEventKind::Start:
      if (std::none_of(active_.begin(), active_.end(), same_cue)) {
        active_.push_back({event.cue, event.at_us});
      }
      break;
    case CueEventKind::Stop:
      std::erase_if(active_, same_cue);
      break;
    case CueEventKind::Burst:
      std::erase_if(active_, same_cue);
      active_.push_back({event.cue, event.at_us});
      break;
  }
}

MotorFrame FrameRenderer::render(Micros now_us) {
  MotorFrame f = render_frame(active_, codebook_, now_us, next_seq_++);
  std::erase_if(active_, [&](const ActiveCue& a) {
    return codebook_[a.cue].finished_at(now_us - a.started_at_us);
  });
  return f;
}

}  // namespace hapticguide
