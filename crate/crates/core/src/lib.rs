pub mod config;
pub mod control;
pub mod ekf;
pub mod features;
pub mod imaging;
pub mod planner;
pub mod selfcheck;
pub mod sim;
pub mod stereo;
