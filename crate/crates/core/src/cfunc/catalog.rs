//! Named noise spectra on `[0, B]`.

use num_rational::BigRational;

use super::CFunc;
use crate::error::{Error, Result};

/// Fixed catalog entries as `(name, expression)`.
pub const ENTRIES: &[(&str, &str)] = &[
    ("flat", "1"),
    ("affine", "1+f"),
    ("quadratic", "1+f*f"),
    ("sine", "2+sin(2*pi*f)"),
    ("halfsine", "2+sin(pi*f)"),
    ("decay", "1/4+exp(-f)"),
    ("cosine", "3/2+cos(2*pi*f)"),
    ("sqrt", "1+sqrt(1+f)"),
];

/// Expression of the oscillatory stress entry `stress-k`: `sin(2^k f)/2 + 1`.
pub fn stress_expr(k: u32) -> String {
    format!("sin({}*f)/2+1", 1u64 << k)
}

/// Expression behind a catalog name (`flat`, `affine`, ..., `stress-<k>`).
pub fn expr_for(name: &str) -> Result<String> {
    if let Some(k) = name.strip_prefix("stress-") {
        let k: u32 = k.parse().map_err(|_| Error::InvalidArgument(format!("bad stress parameter in {name:?}")))?;
        if k > 40 {
            return Err(Error::InvalidArgument(format!("stress parameter {k} too large")));
        }
        return Ok(stress_expr(k));
    }
    ENTRIES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, e)| e.to_string())
        .ok_or_else(|| Error::InvalidArgument(format!("unknown catalog entry {name:?}")))
}

/// Catalog entry as a function on `[0, bandwidth]`.
pub fn noise(name: &str, bandwidth: &BigRational) -> Result<CFunc> {
    let e = expr_for(name)?;
    Ok(CFunc::parse(&e, BigRational::from_integer(0.into()), bandwidth.clone())?.with_name(name))
}

/// All fixed entries plus `stress-0`, `stress-2` and `stress-4`.
pub fn names() -> Vec<String> {
    let mut v: Vec<String> = ENTRIES.iter().map(|(n, _)| n.to_string()).collect();
    v.extend(["stress-0", "stress-2", "stress-4"].map(String::from));
    v
}
