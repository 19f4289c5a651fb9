pub mod convert;
pub mod lctrs;
pub mod pipeline;
pub mod ri;
pub mod solver;
pub mod syntax;
pub mod tableau;
pub mod termination;
pub mod terms;
pub mod theory;
pub mod transform;
pub mod whilelang;
