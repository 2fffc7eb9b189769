//! Session service for the browser panel.

pub mod protocol;
pub mod server;
pub mod session;

pub use protocol::{parse_command, Command, Layout, Message, Snapshot};
pub use server::{run_session, serve, serve_on};
pub use session::{layout, load_profile, script_commands, script_on_grid, Session, PROFILES};
