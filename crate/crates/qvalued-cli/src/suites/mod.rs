pub mod competitor;
pub mod current;
pub mod dirichlet;
pub mod embed;
pub mod lipapprox;
pub mod metric;
pub mod rhostar;
