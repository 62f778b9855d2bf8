//! Construction and simulation of concatenated blocklet fusion networks:
//! stabilizer-code blocklets, foliated and concatenated protocols, erasure
//! and Pauli noise, optimal erasure decoding, hierarchical decoding,
//! product-code distance analysis and interleaving delay planning.

pub mod blocklet;
pub mod builder;
pub mod codes;
pub mod gf2;
pub mod network;
