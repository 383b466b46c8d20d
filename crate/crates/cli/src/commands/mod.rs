pub mod build_vocab;
pub mod cct;
pub mod embellish;
pub mod preprocess;
pub mod report;
pub mod score;
pub mod train;
