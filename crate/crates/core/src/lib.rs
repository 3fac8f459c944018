pub mod experiments;
pub mod gait;
pub mod gp;
pub mod hbr;
pub mod planner;
pub mod qd;
pub mod scalar;
pub mod se2;
pub mod util;
