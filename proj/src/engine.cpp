#include "hapticguide/engine.hpp"

#include <stdexcept>

namespace hapticguide {

GuidanceEngine::GuidanceEngine(PolicyConfig policy, Codebook codebook, TargetSpec target,
                               Micros frame_period_us)
    : policy_(policy), renderer_(std::move(codebook)), target_(target),
      frame_period_us_(frame_period_us) {
  target_.validate();
  renderer_.codebook().validate();
  if (frame_period_us_ <= 0) throw std::invalid_argument("frame period must be positive");
}

void GuidanceEngine::render_before(Micros t_us, bool inclusive, std::vector<MotorFrame>& out) {
  while (inclusive ? next_frame_us_ <= t_us : next_frame_us_ < t_us) {
    out.push_back(renderer_.render(next_frame_us_));
    next_frame_us_ += frame_period_us_;
  }
}

GuidanceEngine::Output GuidanceEngine::on_pose(Micros t_us, const Vec3& tool) {
  if (last_pose_us_ && t_us < *last_pose_us_) {
    throw std::invalid_argument("pose timestamp regression");
  }
  if (!is_finite(tool)) throw std::invalid_argument("non-finite tool position");
  Output out;
  render_before(t_us, false, out.frames);
  out.events = policy_.step(tool, target_, t_us);
  for (const CueEvent& e : out.events) renderer_.apply(e);
  render_before(t_us, true, out.frames);
  last_pose_us_ = t_us;
  return out;
}

std::vector<MotorFrame> GuidanceEngine::flush_until(Micros t_us) {
  std::vector<MotorFrame> out;
  render_before(t_us, true, out);
  return out;
}

}  // namespace hapticguide
