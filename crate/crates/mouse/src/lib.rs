//! Synthetic top-down depth images of a mouse, and the pose and part-label
//! experiments built on the forest core.
//!
//! Units are millimetres throughout. The body frame has x forward, y left
//! and z up; the floor is z = 0 and the camera looks straight down at it.

pub mod camera;
pub mod error;
pub mod estimate;
pub mod ik;
pub mod imageio;
pub mod noise;
pub mod pipeline;
pub mod pixels;
pub mod poses;
pub mod render;
pub mod skeleton;
pub mod synth;

pub use camera::Camera;
pub use error::{Error, Result};
pub use render::{DepthImage, LabelImage, PartLabel};
pub use skeleton::{forward_kinematics, PosedSkeleton, SkeletonModel, SkeletonPose};
pub use synth::{SynthConfig, SyntheticImage};
