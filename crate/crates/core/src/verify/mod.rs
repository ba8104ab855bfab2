//! Independent optimality checks: a Jacobi eigensolver, the certificate
//! checker and a brute-force determinant-minimization oracle.

pub mod certificate;
pub mod eigen;
pub mod oracle;

pub use certificate::{
    certificate_for_diagonal, check_certificate, verify_solution, CertTolerances, Certificate,
};
pub use eigen::{sym_eigen, sym_eigenvalues, SymEigen};
pub use oracle::{brute_force_oracle, OracleResult};
