pub mod entropy;
pub mod experiment;
pub mod explore;
pub mod fixtures;
pub mod grid;
pub mod localization;
pub mod mapping;
pub mod sensor;
pub mod sim;
