//! Network surface of the twin: the HTTP JSON API, the WebSocket live
//! stream, the TCP controller link and the serve configuration file.

pub mod clock;
pub mod config;
pub mod http;
pub mod link;
pub mod live;
pub mod serve;

pub use clock::Clock;
pub use config::{ConfigFileError, ServeConfig};
pub use http::{router, AppState, Limits, SeriesResponse, SubmitCommand};
pub use link::ControllerLink;
pub use serve::{serve, start, Running, ServeError};
