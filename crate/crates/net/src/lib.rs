//! Network adapters: a chat-completion policy client, an HTTP environment
//! client and the simulated-site environment server.

pub mod chat;
pub mod envclient;
pub mod simserve;

pub use chat::{ChatConfig, ChatPolicy};
pub use envclient::HttpEnvironment;
pub use simserve::{spawn_router, spawn_simserve, ServerHandle};
