#pragma once

#include "hapticguide/actuation.hpp"
#include "hapticguide/core.hpp"
#include "hapticguide/cue_policy.hpp"

#include <vector>

namespace hapticguide {

/// Couples the guidance policy to the frame renderer on a single engine
/// timeline. Poses arrive at arbitrary monotone times; frames are emitted on
/// the fixed 10 ms grid, each rendered from the cue state latched at its own
/// timestamp. A frame that coincides with a pose sees that pose's events.
class GuidanceEngine {
 public:
  GuidanceEngine(PolicyConfig policy, Codebook codebook, TargetSpec target,
                 Micros frame_period_us = kFramePeriodUs);

  struct Output {
    std::vector<CueEvent> events;
    std::vector<MotorFrame> frames;
  };

  /// Throws std::invalid_argument if t_us precedes the previous pose.
  Output on_pose(Micros t_us, const Vec3& tool);

  /// Renders all remaining grid frames with timestamps <= t_us without a pose.
  std::vector<MotorFrame> flush_until(Micros t_us);

  const TargetSpec& target() const { return target_; }
  const GuidancePolicy& policy() const { return policy_; }
  const FrameRenderer& renderer() const { return renderer_; }
  std::optional<Micros> last_pose_us() const { return last_pose_us_; }

 private:
  void render_before(Micros t_us, bool inclusive, std::vector<MotorFrame>& out);

  GuidancePolicy policy_;
  FrameRenderer renderer_;
  TargetSpec target_;
  Micros frame_period_us_;
  Micros next_frame_us_ = 0;
  std::optional<Micros> last_pose_us_;
};

}  // namespace hapticguide
