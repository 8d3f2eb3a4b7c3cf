//! Progressive-mesh streaming simulator.
//!
//! The crate has two halves. The codec half ([`mesh`]) turns a triangle
//! mesh into a base mesh plus replayable vertex splits, partitioned into
//! ten resolution levels with a binary wire form. The simulation half
//! models mobile clients walking a field of objects, requesting levels
//! over a contended wireless uplink, caching what arrives, and reporting
//! latency, hit-ratio, and perception metrics per minute.
//!
//! Geometry is generic over the scalar type through [`Real`]; the wire
//! format and the simulation clock are always f64, so `f32` meshes
//! round-trip exactly.

pub mod cache;
pub mod cli;
pub mod client;
pub mod medium;
pub mod mesh;
mod real;
pub mod scene;
pub mod server;
pub mod sim;
mod vec3;

pub use real::Real;
pub use vec3::Vec3;

/// Single-precision mesh.
pub type Mesh32 = mesh::TriangleMesh<f32>;
/// Double-precision mesh, the default throughout the simulator.
pub type Mesh64 = mesh::TriangleMesh<f64>;
/// Double-precision level stream.
pub type PmStream64 = mesh::PmStream<f64>;
