pub mod classfile;
pub mod ir;
pub mod normalize;
pub mod cpg;
pub mod kb;
pub mod scanner;
pub mod modharness;
pub mod corpus;
