//! Cultural turn-based Spyfall as an evaluation harness.
//!
//! * [`game`]: the deterministic rules engine.
//! * [`agent`]: per-seat views, prompt rendering, response parsing, scripted
//!   bots and the remote chat-completion client.
//! * [`orchestrator`]: tournament planning, the match loop and the record store.
//! * [`analytics`]: ratings, win rates, leakage, entropy and vote metrics.
//! * [`corpus`]: bundled entity pools and the pool file format.

pub mod agent;
pub mod analytics;
pub mod corpus;
pub mod game;
pub mod orchestrator;
pub mod seed;
