pub mod cli;
pub mod depcheck;
pub mod iset;
pub mod isccemit;
pub mod kmodel;
pub mod miniir;
pub mod modeltext;
pub mod oracle;
