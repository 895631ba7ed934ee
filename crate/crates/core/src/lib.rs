pub mod expr;
pub mod geometry;
pub mod interp;
pub mod quad;
pub mod scene;
pub mod transform;
pub mod inversion;
pub mod gauge;
pub mod run;
