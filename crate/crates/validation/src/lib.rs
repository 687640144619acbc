//! Harness for the acceptance target in `tests/acceptance.rs`. Kept in its
//! own package so the long runs come after every other test binary.

use std::io::Write;

/// Prints `PASS name: detail` or `FAIL name: detail` straight to stdout,
/// bypassing test capture, then fails the test if `pass` is false.
pub fn report(name: &str, pass: bool, detail: String) {
    let line = format!("{} {name}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
    assert!(pass, "{name}: {detail}");
}
