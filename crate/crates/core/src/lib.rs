//! Nested lattice codes with a lattice list decoder, and the relay-channel
//! protocols built on it.
//!
//! Modules, bottom-up:
//! - [`lattice`]: Construction-A lattices, quantizer, mod reduction, dithers, codebooks.
//! - [`chain`]: prefix-nested lattice chains and list-lattice sizing.
//! - [`channel`]: dithered encoding, MMSE front end, list decoders, point-to-point Monte Carlo.
//! - [`relay`]: block-Markov decode-and-forward over the degraded relay channel.
//! - [`twrc`]: two-way relay channel with direct links, sum decoding and binning.
//! - [`region`]: closed-form rates, cut-set bounds and constant-gap reports.

pub mod chain;
pub mod channel;
pub mod error;
pub mod field;
pub mod lattice;
pub mod optimize;
pub mod region;
pub mod relay;
pub mod stats;
pub mod twrc;

pub use chain::{build_chain, size_list_lattice, ChainSpec, LatticeChain};
pub use channel::{list_decode, list_decode_q_form, simulate_p2p, AwgnParams, ListDecodeResult, ListDecoder};
pub use error::{Error, Result};
pub use lattice::{enumerate_codebook, is_sublattice, Codebook, CodebookEntry, Lattice, LatticeRecord};
