//! Detector graph: configuration, layer plan, parameters and forward pass.

pub mod config;
pub mod network;
pub mod params;
pub mod plan;
pub mod preprocess;

pub use config::{ExtraKind, NetworkConfig};
pub use network::{build_network, ForwardTrace, HeadOutput, NamedParam, Network};
pub use params::{Init, ParamSource, RandomInit, StoreSource, ZeroInit};
pub use plan::NetworkPlan;
pub use preprocess::{preprocess, RgbImage};
