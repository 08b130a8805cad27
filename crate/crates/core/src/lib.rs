pub mod chat;
pub mod cli;
pub mod config;
pub mod dialogue;
pub mod fingerprint;
pub mod lexicon;
pub mod metrics;
pub mod service;
pub mod smiles;
pub mod tasks;
