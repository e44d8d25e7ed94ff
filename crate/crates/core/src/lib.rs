//! SCUBA: a sidelink MAC that time-shares a device's radio with its primary cellular link.
//!
//! The crate covers paging arithmetic ([`paging`]), the primary-RAT mode machine
//! ([`cellular`]), the SCUBA MAC ([`mac`]), seeded traffic ([`traffic`]), an SF-stepped
//! simulator ([`engine`]), measurement ([`metrics`]) and the closed-form models
//! ([`analytics`]).

pub mod analytics;
pub mod cellular;
pub mod engine;
pub mod error;
pub mod mac;
pub mod metrics;
pub mod paging;
pub mod traffic;

pub use cellular::{CellMode, CellularConfig, CellularState, ModeGroup, SlAvailability};
pub use engine::{Scenario, Topology};
pub use error::{Result, ScubaError};
pub use mac::{Activity, HarqConfig, HarqScheme, Packet, SamConfig, ScubaMode, UeIndex};
pub use metrics::{MetricsReport, PowerProfile};
pub use paging::{PagingConfig, PoSchedule, Sf, SlPagingConfig, UeIdentity};
pub use traffic::{StreamPurpose, TrafficKind, TrafficModel};
