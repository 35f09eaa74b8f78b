pub mod bench;
pub mod hypergraph;
pub mod model;
pub mod oracle;
pub mod problems;
pub mod run;
pub mod tensor;
pub mod trainer;
