#pragma once

#include <memory>
#include <mutex>

#include "skyloop/geometry.hpp"

namespace skyloop::smoothing {

/// Logistic transition alpha(t) = 1 / (1 + s exp(t - t_x)).
struct SmootherParams {
  double s = 1.5;
  double t_x = 3.0;  // seconds

  void validate() const;
};

/// Old/new map->local corrections around the most recent optimization event.
/// Inactive states carry correction_old == correction_new.
struct SmootherState {
  Pose correction_old;
  Pose correction_new;
  Timestamp event_time;
  SmootherParams params;
  bool active = false;

  static SmootherState settled(const Pose& correction, const SmootherParams& params = {});
};

/// Weight of the old correction `t` seconds after an event. Strictly decreasing, in (0, 1).
double alpha(double t, const SmootherParams& params);

/// Restarts the transition from whatever the smoother outputs at `now`, so overlapping
/// events never produce a jump beyond (1 - alpha(0)) of the new step.
SmootherState on_optimization_event(const SmootherState& state, const Pose& new_correction,
                                    Timestamp now);

/// alpha * old + (1 - alpha) * new for translation, slerp(new, old, alpha) for rotation.
Pose smoothed_correction(const SmootherState& state, Timestamp now);

/// Smoothed correction applied to the unfiltered local pose.
Pose global_pose(const SmootherState& state, const Pose& local_pose, Timestamp now);

/// Shared holder for one optimizer thread and any number of pose readers.
/// Readers copy an immutable state pointer, so they see either the pre-event or
/// post-event state in full and never wait on optimization.
class CorrectionSmoother {
 public:
  explicit CorrectionSmoother(const Pose& initial = Pose::identity(),
                              const SmootherParams& params = {});

  void on_optimization_event(const Pose& new_correction, Timestamp now);
  Pose smoothed_correction(Timestamp now) const;
  Pose global_pose(const Pose& local_pose, Timestamp now) const;
  std::shared_ptr<const SmootherState> snapshot() const;

 private:
  mutable std::mutex mutex_;  // guards the pointer swap only
  std::shared_ptr<const SmootherState> state_;
};

}  // namespace skyloop::smoothing
