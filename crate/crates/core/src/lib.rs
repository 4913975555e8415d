/*!
# npexec

Simulation and schedulability analysis of ROS 2 executor semantics.

The crate has four parts:

- [`model`]: timers, subscriptions, task sets, chains and the task-set file format.
- [`sim`]: a deterministic discrete-event simulator of the default executor,
  the events executor (release-only and release-and-execute) and its
  priority-queue variants, plus an ideal non-preemptive reference scheduler.
- [`analysis`]: release-overhead bounds, non-preemptive fixed-priority
  response times, the non-preemptive EDF demand test and end-to-end
  latency bounds.
- [`gen`]: UUniFast-discard task-set synthesis with automotive periods,
  chain generation and the built-in camera/LiDAR/IMU case study.

All times are integer nanoseconds (see [`time`]).
*/

pub mod analysis;
pub mod experiment;
pub mod gen;
pub mod model;
pub mod sim;
pub mod time;
