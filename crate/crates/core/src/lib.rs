//! Facilitation engine for asynchronous group ideation.
//!
//! Collaborators talk to the engine one-on-one through chat sessions. During
//! idea generation the engine shows each person a few of the group's ideas
//! as inspiration and suggests how to build on them; during idea selection it
//! walks people through the pool one idea at a time, contrasting their
//! opinion with the group's. Two facilitation policies are provided: a fixed
//! structured schedule and an adaptive one driven by UCB bandits.

pub mod bandit;
pub mod conversation;
pub mod domain;
pub mod messages;
pub mod orchestrator;
pub mod policies;
pub mod scoring;
pub mod sim;
pub mod similarity;
