pub mod specfun;
pub mod expr;
pub mod basis;
pub mod quad;
pub mod linalg;
pub mod solver;
pub mod bench;
pub mod cli;
