pub mod dictionary;
pub mod lang;
pub mod monitor;
pub mod process;
pub mod scale;
pub mod store;
pub mod table;
pub mod universe;
