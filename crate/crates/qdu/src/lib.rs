pub mod baselines;
pub mod choice;
pub mod ellsberg;
pub mod hilbert;
pub mod machina;
pub mod optimizer;
pub mod report;
pub mod urn;
