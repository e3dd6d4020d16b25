pub mod capgraph;
pub mod cli;
pub mod netsim;
pub mod protocol;
pub mod rbcast;
pub mod rscode;
