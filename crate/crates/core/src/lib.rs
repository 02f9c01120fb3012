pub mod cli;
pub mod framework;
pub mod histories;
pub mod linalg;
pub mod oracle;
pub mod sample;
pub mod scenario;
pub mod stablefacts;
