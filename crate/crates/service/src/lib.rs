//! HTTP/JSON front end for method selection sessions.
//!
//! [`api::Service`] wraps the engine and a [`store::SessionStore`];
//! [`http::router`] exposes it over axum.

pub mod api;
pub mod config;
pub mod http;
pub mod store;

pub use api::{ApiError, Service};
pub use config::Config;
pub use http::router;
