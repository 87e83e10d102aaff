pub mod calib;
pub mod dataset;
pub mod imaging;
pub mod nn;
pub mod orbit;
pub mod plot;
pub mod pose;
pub mod trajgen;
