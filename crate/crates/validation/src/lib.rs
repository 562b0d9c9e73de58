//! Test-only package. The `acceptance` target checks the reference
//! configuration against its target values and prints one verdict line per
//! check. It lives apart from the core crate so that its expected failures do
//! not stop the rest of the suite, because `cargo test` halts at the first
//! failing binary.
