pub mod data;
pub mod decomposition;
pub mod error;
pub mod io;
pub mod linalg;
pub mod oracle;
pub mod parallel;
pub mod selection;
pub mod spline;
pub mod simlab;
pub mod tasks;
