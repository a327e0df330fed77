//! Attitude control toolkit for quadrotors.
//!
//! * [`dynamics`]: rotational dynamics, Jacobians, and RK4 integration.
//! * [`controllers`]: sliding-mode and backstepping laws, torque saturation.
//! * [`lnmpc`]: the Lyapunov-constrained NMPC and its embedded QP solver.
//! * [`stability`]: norm bounds, the recursive-feasibility certificate, and a
//!   runtime Lyapunov monitor.
//! * [`sim`]: reference scenarios, disturbances, closed-loop runs, metrics,
//!   and CSV logs.

pub mod controllers;
pub mod dynamics;
pub mod error;
pub mod lnmpc;
pub mod sim;
pub mod stability;

pub use controllers::{
    bsc_control, lyapunov_rate, saturate, sliding_surface, smc_control, smc_lyapunov,
    tracking_error, BscGains, ReferenceSample, SlidingValue, SmcGains, TrackingError,
};
pub use dynamics::{
    attitude_derivative, dynamics_jacobians, gyro_coupling, rk4_step, rk4_step_sensitivities,
    AttitudeState, ControlTorque, UavParams,
};
pub use error::{Error, Result};
pub use lnmpc::{
    HorizonConfig, Lnmpc, LnmpcConfig, MpcWeights, OcpProblem, OcpSolution, SolveStatus,
    SolverOptions, StateConstraints,
};
