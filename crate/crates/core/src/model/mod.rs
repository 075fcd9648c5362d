//! Scene description, array responses, channels, sensing streams and received signals.

pub mod channel;
pub mod geometry;
pub mod scene;
pub mod signal;
pub mod steering;
pub mod streams;

pub use channel::{los_path, make_bs_irs_channel, make_cascade_channel, scene_channel};
pub use geometry::{bearing, geometry_params, wrap_angle, GeometryParams};
pub use scene::{dbm_to_watts, watts_to_dbm, IrsDescriptor, PathSpec, Point, Reflection, SceneConfig, SPEED_OF_LIGHT};
pub use signal::{delay_rows, fractional_taps, effective_signal, synthesize_received, RankClass, ReceivedSignal, SynthesisOptions};
pub use steering::{steering_derivative, steering_second_derivative, steering_vector};
pub use streams::{make_orthogonal_streams, spectral_derivative, SensingStreams, TOL_RANK};
