//! Periodic grids, Fourier transforms, the kinetic sub-flow and discrete norms.

mod dump;
mod field;
mod grid;

pub use dump::{read_field, write_density_text, write_field, FORMAT_VERSION, MAGIC};
pub use field::{
    forward_transform, inverse_transform, kinetic_flow, kinetic_flow_in_place, l2_error, l2_norm,
    thread_transform_pairs, transform_pairs, Field, Frame, Spectrum,
};
pub use grid::{make_grid, Grid};
