#include "skyloop/smoothing.hpp"

#include <cmath>
#include <stdexcept>

namespace skyloop::smoothing {

void SmootherParams::validate() const {
  if (!(s > 0.0) || !std::isfinite(s)) throw std::invalid_argument("smoother.s must be > 0");
  if (!(t_x > 0.0) || !std::isfinite(t_x)) {
    throw std::invalid_argument("smoother.t_x_seconds must be > 0");
  }
}

SmootherState SmootherState::settled(const Pose& correction, const SmootherParams& params) {
  params.validate();
  SmootherState st;
  st.correction_old = correction;
  st.correction_new = correction;
  st.params = params;
  return st;
}

double alpha(double t, const SmootherParams& params) {
  if (t < 0.0) throw std::invalid_argument("alpha: t must be >= 0");
  return 1.0 / (1.0 + params.s * std::exp(t - params.t_x));
}

SmootherState on_optimization_event(const SmootherState& state, const Pose& new_correction,
                                    Timestamp now) {
  if (state.active && now < state.event_time) {
    throw std::invalid_argument("optimization event earlier than the previous one");
  }
  SmootherState next = state;
  next.correction_old = smoothed_correction(state, now);
  next.correction_new = new_correction;
  next.event_time = now;
  next.active = true;
  return next;
}

Pose smoothed_correction(const SmootherState& state, Timestamp now) {
  if (!state.active) return state.correction_new;
  const double t = now - state.event_time;
  if (t < 0.0) throw std::invalid_argument("smoothed_correction: time before event");
  const double a = alpha(t, state.params);
  const Pose& o = state.correction_old;
  const Pose& n = state.correction_new;
  return Pose(slerp(n.rotation, o.rotation, a), a * o.translation + (1.0 - a) * n.translation);
}

Pose global_pose(const SmootherState& state, const Pose& local_pose, Timestamp now) {
  return compose(smoothed_correction(state, now), local_pose);
}

CorrectionSmoother::CorrectionSmoother(const Pose& initial, const SmootherParams& params)
    : state_(std::make_shared<const SmootherState>(SmootherState::settled(initial, params))) {}

void CorrectionSmoother::on_optimization_event(const Pose& new_correction, Timestamp now) {
  auto current = snapshot();
  auto next = std::make_shared<const SmootherState>(
      smoothing::on_optimization_event(*current, new_correction, now));
  std::lock_guard lock(mutex_);
  state_ = std::move(next);
}

std::shared_ptr<const SmootherState> CorrectionSmoother::snapshot() const {
  std::lock_guard lock(mutex_);
  return state_;
}

Pose CorrectionSmoother::smoothed_correction(Timestamp now) const {
  return smoothing::smoothed_correction(*snapshot(), now);
}

Pose CorrectionSmoother::global_pose(const Pose& local_pose, Timestamp now) const {
  return smoothing::global_pose(*snapshot(), local_pose, now);
}

}  // namespace skyloop::smoothing
