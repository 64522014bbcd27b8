//! Simulation of the Jaynes-Cummings-Hubbard model on small graphs of coupled
//! resonators: exact many-body dynamics after a detuning quench or ramp,
//! number-fluctuation order parameters, and a single-site mean-field theory.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod experiments;
pub mod graphs;
pub mod hilbert;
pub mod meanfield;
pub mod model;
pub mod observables;
pub mod sparse;

pub use graphs::{build_graph, enumerate_connected_graphs, Graph, GraphCatalogEntry, Partition};
pub use hilbert::{enumerate_basis, Basis, StateVector};
pub use model::{assemble_jch, prepare_mott_state, ModelParams, SparseHamiltonian};
