pub mod chem;
pub mod features;
pub mod fragment;
pub mod masking;
pub mod nn;
pub mod model;
pub mod objectives;
pub mod pipeline;
